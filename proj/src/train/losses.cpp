// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/train/losses.hpp"

#include <stdexcept>
#include <string>

#include "kgprompt/num/ops.hpp"

namespace kgprompt::train {

template <typename T>
num::Tensor<T> ce_loss(const num::Tensor<T>& scores, std::span<const std::int64_t> targets, double eps,
                       SmoothingNormalizer norm) {
  if (scores.rank() != 2 || scores.dim(0) != static_cast<std::int64_t>(targets.size())) {
    num::throw_shape_error("ce_loss", scores.shape(), {static_cast<std::int64_t>(targets.size()), -1});
  }
  if (eps < 0.0 || eps >= 1.0) throw std::invalid_argument("label smoothing must lie in [0, 1)");
  const std::int64_t b = scores.dim(0), v = scores.dim(1);
  const double off = norm == SmoothingNormalizer::kVocab ? eps / static_cast<double>(v)
                                                         : (v > 1 ? eps / static_cast<double>(v - 1) : 0.0);
  // Weights are pre-negated and pre-multiplied by V so that V * mean gives
  // the row sum.
  std::vector<T> w(static_cast<std::size_t>(b * v), static_cast<T>(-off));
  for (std::int64_t i = 0; i < b; ++i) {
    const auto t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= v) throw std::out_of_range("ce_loss: target " + std::to_string(t) + " outside [0, V)");
    w[static_cast<std::size_t>(i * v + t)] = static_cast<T>(-(1.0 - eps));
  }
  auto weights = num::Tensor<T>::from({b, v}, std::move(w));
  auto weighted = num::mul(num::log_softmax(scores), weights);
  return num::scale(num::mean_range(weighted, 1, 0, v), static_cast<T>(v));
}

double alpha_schedule(std::int64_t step, double alpha, double alpha_step) {
  if (step < 0) throw std::invalid_argument("alpha_schedule: negative step");
  const double ramp = alpha_step * static_cast<double>(step);
  return ramp >= alpha * (1.0 - 1e-12) ? alpha : ramp;
}

template <typename T>
LossParts<T> total_loss(const num::Tensor<T>& scores, std::span<const std::int64_t> targets,
                        std::span<const std::int64_t> lar_ids, int lar_samples, double eps,
                        SmoothingNormalizer norm, double alpha_eff, double margin, lar::SignMode sign) {
  LossParts<T> out;
  auto ce = ce_loss(scores, targets, eps, norm);
  out.total = num::sum(ce);
  out.ce = static_cast<double>(out.total.item());
  if (alpha_eff > 0.0 || !lar_ids.empty()) {
    const auto b = static_cast<std::int64_t>(targets.size());
    if (static_cast<std::int64_t>(lar_ids.size()) != b * lar_samples) {
      throw std::invalid_argument("total_loss: expected " + std::to_string(b * lar_samples) + " LAR ids, got " +
                                  std::to_string(lar_ids.size()));
    }
    auto f_true = num::reshape(num::gather_cols(scores, targets, 1), {b});
    auto f_adv = num::gather_cols(scores, lar_ids, lar_samples);
    auto l = num::sum(lar::lar_loss(f_true, f_adv, static_cast<T>(margin), sign));
    out.lar = static_cast<double>(l.item());
    if (alpha_eff > 0.0) out.total = num::add(out.total, num::scale(l, static_cast<T>(alpha_eff)));
  }
  return out;
}

#define KGPROMPT_INSTANTIATE_LOSSES(T)                                                                        \
  template num::Tensor<T> ce_loss(const num::Tensor<T>&, std::span<const std::int64_t>, double,              \
                                  SmoothingNormalizer);                                                       \
  template LossParts<T> total_loss(const num::Tensor<T>&, std::span<const std::int64_t>,                     \
                                   std::span<const std::int64_t>, int, double, SmoothingNormalizer, double,  \
                                   double, lar::SignMode);

KGPROMPT_INSTANTIATE_LOSSES(float)
KGPROMPT_INSTANTIATE_LOSSES(double)

#undef KGPROMPT_INSTANTIATE_LOSSES

}  // namespace kgprompt::train
