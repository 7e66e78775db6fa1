// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Local adversarial regularization: real entities that share a
// discriminative keyword with the gold tail serve as hard negatives.

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgprompt/kg/graph.hpp"
#include "kgprompt/num/tensor.hpp"
#include "kgprompt/util/random.hpp"

namespace kgprompt::lar {

enum class Source { kKeyword, kRandom };
enum class SignMode { kCorrected, kAsWritten };

Source parse_source(std::string_view s);
SignMode parse_sign_mode(std::string_view s);

struct LarConfig {
  int samples = 8;
  double margin = 1.0;
  Source source = Source::kKeyword;
  SignMode sign = SignMode::kCorrected;
  double df_max = 0.05;
  int min_token_len = 3;
};

class LarIndex {
 public:
  // Index tokens are the lowercased purely alphabetic tokens of name and
  // description with at least `min_token_len` letters, kept only when at
  // most `df_max` of all entities contain them.
  static LarIndex build(const kg::KnowledgeGraph& graph, double df_max, int min_token_len);

  int num_entities() const { return static_cast<int>(candidates_.size()); }
  // Sorted ids sharing at least one index token with `entity`.
  const std::vector<int>& candidates(int entity) const { return candidates_.at(static_cast<std::size_t>(entity)); }
  // Sorted index tokens of `entity`.
  const std::vector<std::string>& tokens(int entity) const { return tokens_.at(static_cast<std::size_t>(entity)); }

  // `entity_id\tid,id,...` per entity, by id.
  std::string dump() const;

 private:
  std::vector<std::vector<int>> candidates_;
  std::vector<std::vector<std::string>> tokens_;
};

struct LarSample {
  std::vector<int> ids;
  // ids[0, keyword_count) came from the candidate list; the rest are pads.
  int keyword_count = 0;
};

/// Draws `n` distinct adversaries for `target`, none of which is the target
/// or in `exclude` (sorted). Keyword candidates come first; any shortfall is
/// filled uniformly from the remaining entities.
LarSample sample_lar(const LarIndex& index, int target, int n, Source source, util::Rng& rng,
                     std::span<const int> exclude);

/// Per-row margin loss. f_true [B], f_adv [B, n] -> [B].
/// corrected: max(mean(f_adv) - f_true + margin, 0)
/// as-written: max(f_true - mean(f_adv) + margin, 0)
template <typename T>
num::Tensor<T> lar_loss(const num::Tensor<T>& f_true, const num::Tensor<T>& f_adv, T margin, SignMode mode);

}  // namespace kgprompt::lar
