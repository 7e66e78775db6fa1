// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "kgprompt/num/params.hpp"
#include "kgprompt/util/random.hpp"

namespace kgprompt::model {

enum class PromptMode { kLayerwise, kInputOnly };

struct PromptConfig {
  int embed_dim = 32;        // d
  int hidden = 128;          // d_h
  int layers = 4;            // l
  int width = 64;            // H
  int per_source = 2;        // k_src; k = 2 k_src slots per layer
  PromptMode mode = PromptMode::kLayerwise;
  // Per-source slot count for the input-only mode (k' / 2). Zero picks
  // layers * per_source, which matches the layer-wise parameter count.
  int input_only_per_source = 0;
};

// Prompt vectors split by source. Each vector entry is one layer's
// [B, slots, H] block; input-only mode yields a single entry.
template <typename T>
struct PromptHalves {
  std::vector<num::Tensor<T>> entity;
  std::vector<num::Tensor<T>> relation;
};

/// Maps (entity, relation) embeddings to soft prompts through one two-layer
/// ReLU network per source, F(x) = W_out relu(W_in x).
template <typename T>
class PromptGenerator {
 public:
  PromptGenerator(const PromptConfig& cfg, util::Rng& rng, num::ParameterGroup<T>& group);

  // e_head, e_rel: [B, d].
  PromptHalves<T> generate_halves(const num::Tensor<T>& e_head, const num::Tensor<T>& e_rel) const;

  // Per layer [B, k, H], entity slots first.
  std::vector<num::Tensor<T>> generate(const num::Tensor<T>& e_head, const num::Tensor<T>& e_rel) const;

  // Slots per source in each emitted block.
  int slots_per_source() const { return slots_; }
  int layers_emitted() const { return emitted_; }
  // Prompt vectors injected per query across all layers.
  int injected_per_query() const { return 2 * slots_ * emitted_; }
  const PromptConfig& config() const { return cfg_; }

 private:
  num::Tensor<T> map(const num::Tensor<T>& x, const num::Tensor<T>& w_in, const num::Tensor<T>& w_out) const;
  std::vector<num::Tensor<T>> split_layers(const num::Tensor<T>& flat) const;

  PromptConfig cfg_;
  int slots_ = 0;
  int emitted_ = 0;
  num::Tensor<T> ent_in_, ent_out_, rel_in_, rel_out_;
};

// Trainable parameters of a generator with this configuration.
std::int64_t prompt_parameter_count(const PromptConfig& cfg);

/// Last-layer prompt-slot states to scorer inputs: mean-pool each source
/// half, then project H -> d.
template <typename T>
struct QueryRepresentation {
  num::Tensor<T> z_head, z_rel;  // [B, H]
  num::Tensor<T> head, rel;      // [B, d]
};

template <typename T>
class Extractor {
 public:
  Extractor(int width, int embed_dim, util::Rng& rng, num::ParameterGroup<T>& group);

  // Joint layout: entity slots [0, s), relation slots [s, 2s).
  QueryRepresentation<T> extract(const num::Tensor<T>& states, int slots_per_source) const;
  // Separated layout: each pass holds its own source's slots at [0, s).
  QueryRepresentation<T> extract(const num::Tensor<T>& entity_states, const num::Tensor<T>& relation_states,
                                 int slots_per_source) const;

 private:
  QueryRepresentation<T> project(num::Tensor<T> zh, num::Tensor<T> zr) const;
  num::Tensor<T> u_head_, u_rel_;  // [H, d]
};

extern template class PromptGenerator<float>;
extern template class PromptGenerator<double>;
extern template class Extractor<float>;
extern template class Extractor<double>;

}  // namespace kgprompt::model
