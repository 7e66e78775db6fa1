// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kgprompt/num/ops.hpp"
#include "kgprompt/num/tensor.hpp"

namespace kgprompt::num {

struct GradCheckEntry {
  std::string name;
  bool skipped = false;
  // ||analytic - numeric|| / max(||analytic||, ||numeric||); 0 when both vanish.
  double rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool finite = true;
  bool near_kink = false;
  // A frozen tensor came back holding an analytic gradient.
  bool frozen_violation = false;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) {
      if (!e.skipped) m = std::max(m, e.rel_error);
    }
    return m;
  }
  bool passed(double tol) const {
    return finite && !near_kink && !frozen_violation && max_rel_error() <= tol;
  }
};

/// Compares reverse-mode gradients of the scalar `f` with central finite
/// differences for each named tensor. `f` must rebuild its graph from the
/// given leaf tensors on every call. Tensors that do not require a gradient
/// are reported as skipped.
template <typename T>
GradCheckReport grad_check(const std::function<Tensor<T>()>& f,
                           std::vector<std::pair<std::string, Tensor<T>>> params, double step = 1e-5,
                           double kink_threshold = 1e-4) {
  GradCheckReport report;
  for (auto& [name, t] : params) t.zero_grad();

  KinkMonitor::arm(kink_threshold);
  Tensor<T> out = f();
  KinkMonitor::disarm();
  report.near_kink = KinkMonitor::hits() > 0;
  if (!std::isfinite(static_cast<double>(out.item()))) {
    report.finite = false;
    return report;
  }
  out.backward();

  for (auto& [name, t] : params) {
    GradCheckEntry e;
    e.name = name;
    if (!t.requires_grad()) {
      e.skipped = true;
      if (t.has_grad()) report.frozen_violation = true;
      report.entries.push_back(e);
      continue;
    }
    std::vector<double> analytic(static_cast<std::size_t>(t.size()), 0.0);
    if (t.has_grad()) {
      std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    }
    std::vector<double> numeric(analytic.size());
    {
      NoGradGuard ng;
      auto vals = t.mutable_values();
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const T orig = vals[i];
        vals[i] = static_cast<T>(orig + step);
        const double up = static_cast<double>(f().item());
        vals[i] = static_cast<T>(orig - step);
        const double down = static_cast<double>(f().item());
        vals[i] = orig;
        numeric[i] = (up - down) / (2.0 * step);
      }
    }
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      if (!std::isfinite(analytic[i]) || !std::isfinite(numeric[i])) report.finite = false;
      const double d = analytic[i] - numeric[i];
      diff2 += d * d;
      a2 += analytic[i] * analytic[i];
      n2 += numeric[i] * numeric[i];
      e.max_abs_error = std::max(e.max_abs_error, std::abs(d));
    }
    const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
    e.rel_error = denom > 0.0 ? std::sqrt(diff2) / denom : 0.0;
    report.entries.push_back(e);
  }
  for (auto& [name, t] : params) t.zero_grad();
  return report;
}

}  // namespace kgprompt::num
