// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kgprompt/num/params.hpp"
#include "kgprompt/text/vocab.hpp"
#include "kgprompt/util/random.hpp"

namespace kgprompt::model {

struct EncoderConfig {
  int layers = 4;
  int hidden = 64;
  int heads = 4;
  int ffn = 128;
  int max_text_len = 64;
  bool position_encoding = true;
};

enum class FreezeDirection { kBottom, kTop };

struct FreezeSpec {
  FreezeDirection direction = FreezeDirection::kBottom;
  int count = -1;  // -1 freezes every layer
  bool word_embeddings = true;
};

// Layer inputs recorded during a forward pass; inputs[j] is [B, L, H] as
// seen by layer j after prompt substitution.
template <typename T>
struct EncoderTrace {
  std::vector<num::Tensor<T>> inputs;
};

/// Post-LN transformer encoder whose prompt positions are overwritten at the
/// input of every layer that receives a prompt tensor.
///
/// The sequence layout is [prompt_0 .. prompt_{k-1}, text tokens]. Learned
/// position encodings cover text slots only.
template <typename T>
class Encoder {
 public:
  Encoder(const EncoderConfig& cfg, int vocab_size, util::Rng& rng, num::ParameterGroup<T>& group);

  // Applies to parameters owned by this encoder. Layers outside the frozen
  // range become trainable.
  void set_freeze(const FreezeSpec& spec);

  /// `prompts[j]` is [B, k, H]. With one entry per layer, layer j input
  /// positions [0, k) are replaced by prompts[j]; with a single entry only
  /// the first layer receives prompts. Returns the last-layer states
  /// [B, k + T_max, H].
  num::Tensor<T> forward(const std::vector<num::Tensor<T>>& prompts, std::span<const text::QueryText> batch,
                         EncoderTrace<T>* trace = nullptr) const;

  const EncoderConfig& config() const { return cfg_; }
  std::int64_t forward_count() const { return forwards_; }
  const std::vector<std::string>& layer_parameter_names(int layer) const {
    return layer_names_.at(static_cast<std::size_t>(layer));
  }

 private:
  struct Layer {
    num::Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
  };
  num::Tensor<T> run_layer(const Layer& layer, const num::Tensor<T>& x, std::span<const std::int64_t> lengths) const;

  EncoderConfig cfg_;
  num::ParameterGroup<T>* group_;
  num::Tensor<T> word_, pos_;
  std::vector<Layer> layers_;
  std::vector<std::vector<std::string>> layer_names_;
  mutable std::int64_t forwards_ = 0;
};

extern template class Encoder<float>;
extern template class Encoder<double>;

}  // namespace kgprompt::model
