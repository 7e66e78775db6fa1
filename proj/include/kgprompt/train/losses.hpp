// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

#include "kgprompt/lar/lar.hpp"
#include "kgprompt/num/tensor.hpp"

namespace kgprompt::train {

// Off-target label mass divided by |V| (default) or |V| - 1 (conventional).
enum class SmoothingNormalizer { kVocab, kVocabMinusOne };

/// Label-smoothed cross entropy per row of scores [B, V] -> [B]:
/// -(1 - eps) log p(target) - (eps / N) sum_{t != target} log p(t).
template <typename T>
num::Tensor<T> ce_loss(const num::Tensor<T>& scores, std::span<const std::int64_t> targets, double eps,
                       SmoothingNormalizer norm = SmoothingNormalizer::kVocab);

/// min(alpha, alpha_step * step); snaps to alpha once the ramp reaches it.
double alpha_schedule(std::int64_t step, double alpha, double alpha_step);

template <typename T>
struct LossParts {
  num::Tensor<T> total;  // scalar
  double ce = 0.0;       // summed over the batch
  double lar = 0.0;      // summed over the batch, unweighted
};

/// Sum over the batch of ce_loss + alpha_eff * lar_loss. `lar_ids` holds
/// `lar_samples` adversary ids per row; it may be empty when alpha_eff is 0.
template <typename T>
LossParts<T> total_loss(const num::Tensor<T>& scores, std::span<const std::int64_t> targets,
                        std::span<const std::int64_t> lar_ids, int lar_samples, double eps,
                        SmoothingNormalizer norm, double alpha_eff, double margin, lar::SignMode sign);

}  // namespace kgprompt::train
