// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/model/scorers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "kgprompt/num/ops.hpp"

namespace kgprompt::model {

namespace {

template <typename T>
num::Tensor<T> normal_tensor(num::Shape shape, double sd, util::Rng& rng) {
  std::vector<T> v(static_cast<std::size_t>(num::numel(shape)));
  for (auto& x : v) x = static_cast<T>(sd * util::normal(rng));
  return num::Tensor<T>::from(std::move(shape), std::move(v));
}

}  // namespace

ScorerKind parse_scorer(std::string_view s) {
  if (s == "transe") return ScorerKind::kTransE;
  if (s == "distmult") return ScorerKind::kDistMult;
  if (s == "conve") return ScorerKind::kConvE;
  if (s == "text_only") return ScorerKind::kTextOnly;
  throw std::invalid_argument("unknown scorer '" + std::string(s) + "' (want transe, distmult, conve or text_only)");
}

const char* scorer_name(ScorerKind k) {
  switch (k) {
    case ScorerKind::kTransE: return "transe";
    case ScorerKind::kDistMult: return "distmult";
    case ScorerKind::kConvE: return "conve";
    case ScorerKind::kTextOnly: return "text_only";
  }
  return "?";
}

double transe_score(std::span<const double> h, std::span<const double> r, std::span<const double> t, int p) {
  double acc = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double d = h[i] + r[i] - t[i];
    acc += p == 1 ? std::abs(d) : d * d;
  }
  return p == 1 ? -acc : -std::sqrt(acc);
}

double distmult_score(std::span<const double> h, std::span<const double> r, std::span<const double> t) {
  double acc = 0;
  for (std::size_t i = 0; i < h.size(); ++i) acc += h[i] * r[i] * t[i];
  return acc;
}

template <typename T>
num::Tensor<T> transe_scores(const num::Tensor<T>& h, const num::Tensor<T>& r, const num::Tensor<T>& tails, int p) {
  return num::scale(num::pairwise_distance(num::add(h, r), tails, p), T(-1));
}

template <typename T>
num::Tensor<T> distmult_scores(const num::Tensor<T>& h, const num::Tensor<T>& r, const num::Tensor<T>& tails) {
  return num::matmul_nt(num::mul(h, r), tails);
}

template <typename T>
num::Tensor<T> text_only_scores(const num::Tensor<T>& z_head, const num::Tensor<T>& z_rel,
                                const num::Tensor<T>& w_cls) {
  return num::matmul_nt(num::concat<T>({z_head, z_rel}, 1), w_cls);
}

template <typename T>
Scorer<T>::Scorer(const ScorerConfig& cfg, int embed_dim, int num_entities, int text_width, util::Rng& rng,
                  num::ParameterGroup<T>& group)
    : cfg_(cfg), d_(embed_dim) {
  if (cfg.kind == ScorerKind::kTransE && cfg.transe_norm != 1 && cfg.transe_norm != 2) {
    throw std::invalid_argument("transe_norm must be 1 or 2");
  }
  if (cfg.kind == ScorerKind::kConvE) {
    if (cfg.conve_reshape_h * cfg.conve_reshape_w != embed_dim) {
      throw std::invalid_argument("conve reshape " + std::to_string(cfg.conve_reshape_h) + "x" +
                                  std::to_string(cfg.conve_reshape_w) + " does not factor embed_dim " +
                                  std::to_string(embed_dim));
    }
    if (cfg.conve_kernel < 1 || cfg.conve_kernel % 2 == 0 || cfg.conve_channels < 1) {
      throw std::invalid_argument("conve kernel must be odd and channels positive");
    }
    const std::int64_t c = cfg.conve_channels, k = cfg.conve_kernel;
    const std::int64_t flat = c * 2 * cfg.conve_reshape_h * cfg.conve_reshape_w;
    kernel_ = group.add("scorer.conve.kernel", normal_tensor<T>({c, 1, k, k}, 1.0 / static_cast<double>(k), rng));
    kernel_bias_ = group.add("scorer.conve.kernel_bias", num::Tensor<T>::zeros({c}));
    fc_ = group.add("scorer.conve.fc", normal_tensor<T>({flat, embed_dim}, 1.0 / std::sqrt(static_cast<double>(flat)), rng));
    fc_bias_ = group.add("scorer.conve.fc_bias", num::Tensor<T>::zeros({embed_dim}));
  }
  if (cfg.kind == ScorerKind::kTextOnly) {
    w_cls_ = group.add("scorer.text_only.w_cls",
                       normal_tensor<T>({num_entities, 2 * text_width}, 1.0 / std::sqrt(2.0 * text_width), rng));
  }
}

template <typename T>
num::Tensor<T> Scorer<T>::conve_features(const num::Tensor<T>& h, const num::Tensor<T>& r) const {
  using namespace num;
  const std::int64_t b = h.dim(0), a = cfg_.conve_reshape_h, w = cfg_.conve_reshape_w;
  auto img = concat<T>({reshape(h, {b, 1, a, w}), reshape(r, {b, 1, a, w})}, 2);
  auto conv = relu(conv2d(img, kernel_, kernel_bias_, cfg_.conve_kernel / 2));
  auto flat = reshape(conv, {b, conv.size() / b});
  return relu(add_bias(matmul(flat, fc_), fc_bias_));
}

template <typename T>
num::Tensor<T> Scorer<T>::score_all(const QueryRepresentation<T>& q, const num::Tensor<T>& entities) const {
  switch (cfg_.kind) {
    case ScorerKind::kTransE: return transe_scores(q.head, q.rel, entities, cfg_.transe_norm);
    case ScorerKind::kDistMult: return distmult_scores(q.head, q.rel, entities);
    case ScorerKind::kConvE: return num::matmul_nt(conve_features(q.head, q.rel), entities);
    case ScorerKind::kTextOnly: return text_only_scores(q.z_head, q.z_rel, w_cls_);
  }
  throw std::logic_error("unhandled scorer");
}

#define KGPROMPT_INSTANTIATE_SCORERS(T)                                                                  \
  template num::Tensor<T> transe_scores(const num::Tensor<T>&, const num::Tensor<T>&, const num::Tensor<T>&, int); \
  template num::Tensor<T> distmult_scores(const num::Tensor<T>&, const num::Tensor<T>&, const num::Tensor<T>&);    \
  template num::Tensor<T> text_only_scores(const num::Tensor<T>&, const num::Tensor<T>&, const num::Tensor<T>&);   \
  template class Scorer<T>;

KGPROMPT_INSTANTIATE_SCORERS(float)
KGPROMPT_INSTANTIATE_SCORERS(double)

#undef KGPROMPT_INSTANTIATE_SCORERS

}  // namespace kgprompt::model
