// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "kgprompt/num/params.hpp"

namespace kgprompt::num {

template <typename T>
AdamWStats adamw_step(ParameterGroup<T>& group, const AdamWConfig& cfg) {
  AdamWStats stats;
  const std::int64_t t = ++group.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);

  for (auto& p : group.entries()) {
    if (!p.trainable() || !p.tensor.has_grad()) continue;
    auto g = p.tensor.grad();
    bool finite = true;
    for (auto x : g) finite = finite && std::isfinite(x);
    if (!finite) {
      ++stats.skipped_nonfinite;
      continue;
    }
    if (p.m.empty()) {
      p.m.assign(g.size(), T(0));
      p.v.assign(g.size(), T(0));
    }
    auto w = p.tensor.mutable_values();
    const T decay = static_cast<T>(1.0 - cfg.lr * cfg.weight_decay);
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] *= decay;
      p.m[i] = b1 * p.m[i] + (T(1) - b1) * g[i];
      p.v[i] = b2 * p.v[i] + (T(1) - b2) * g[i] * g[i];
      const double mhat = static_cast<double>(p.m[i]) / bc1;
      const double vhat = static_cast<double>(p.v[i]) / bc2;
      w[i] -= static_cast<T>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
    ++stats.updated;
  }
  return stats;
}

template AdamWStats adamw_step(ParameterGroup<float>&, const AdamWConfig&);
template AdamWStats adamw_step(ParameterGroup<double>&, const AdamWConfig&);

}  // namespace kgprompt::num
