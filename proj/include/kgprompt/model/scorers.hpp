// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string_view>

#include "kgprompt/model/prompt.hpp"
#include "kgprompt/num/params.hpp"
#include "kgprompt/util/random.hpp"

namespace kgprompt::model {

enum class ScorerKind { kTransE, kDistMult, kConvE, kTextOnly };

ScorerKind parse_scorer(std::string_view s);
const char* scorer_name(ScorerKind k);

struct ScorerConfig {
  ScorerKind kind = ScorerKind::kConvE;
  int transe_norm = 2;
  int conve_channels = 8;
  int conve_reshape_h = 4;  // each of h and r becomes an h x w map
  int conve_reshape_w = 8;
  int conve_kernel = 3;
};

// Single-fact reference scorers over plain vectors.
double transe_score(std::span<const double> h, std::span<const double> r, std::span<const double> t, int p);
double distmult_score(std::span<const double> h, std::span<const double> r, std::span<const double> t);

// Batched all-tail forms: h, r [B, d], tails [N, d] -> [B, N].
template <typename T>
num::Tensor<T> transe_scores(const num::Tensor<T>& h, const num::Tensor<T>& r, const num::Tensor<T>& tails, int p);
template <typename T>
num::Tensor<T> distmult_scores(const num::Tensor<T>& h, const num::Tensor<T>& r, const num::Tensor<T>& tails);
// z_h, z_r [B, H]; w_cls [N, 2H].
template <typename T>
num::Tensor<T> text_only_scores(const num::Tensor<T>& z_head, const num::Tensor<T>& z_rel,
                                const num::Tensor<T>& w_cls);

/// Scoring head over the entity table. ConvE and TextOnly own parameters.
template <typename T>
class Scorer {
 public:
  Scorer(const ScorerConfig& cfg, int embed_dim, int num_entities, int text_width, util::Rng& rng,
         num::ParameterGroup<T>& group);

  // Scores every entity in `entities` [N, d] as the tail of each query.
  num::Tensor<T> score_all(const QueryRepresentation<T>& q, const num::Tensor<T>& entities) const;

  // ConvE feature map before the dot product with tails: [B, d], >= 0.
  num::Tensor<T> conve_features(const num::Tensor<T>& h, const num::Tensor<T>& r) const;

  const ScorerConfig& config() const { return cfg_; }

 private:
  ScorerConfig cfg_;
  int d_;
  num::Tensor<T> kernel_, kernel_bias_, fc_, fc_bias_, w_cls_;
};

extern template class Scorer<float>;
extern template class Scorer<double>;

}  // namespace kgprompt::model
