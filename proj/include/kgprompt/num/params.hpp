// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kgprompt/num/tensor.hpp"

namespace kgprompt::num {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  // AdamW moments. Stay empty until the first update of a trainable tensor.
  std::vector<T> m;
  std::vector<T> v;

  bool trainable() const { return tensor.requires_grad(); }
};

/// Named parameter tensors plus the optimizer state that belongs to them.
template <typename T>
class ParameterGroup {
 public:
  Tensor<T> add(std::string name, Tensor<T> tensor, bool trainable = true) {
    for (const auto& p : params_) {
      if (p.name == name) throw std::invalid_argument("duplicate parameter name: " + name);
    }
    tensor.set_requires_grad(trainable);
    params_.push_back({std::move(name), tensor, {}, {}});
    return tensor;
  }

  // Switching to frozen drops any optimizer state the tensor carried.
  void set_trainable(std::string_view name, bool trainable) {
    auto& p = at(name);
    p.tensor.set_requires_grad(trainable);
    if (!trainable) {
      p.tensor.zero_grad();
      p.m.clear();
      p.v.clear();
    }
  }

  Parameter<T>& at(std::string_view name) {
    for (auto& p : params_) {
      if (p.name == name) return p;
    }
    throw std::out_of_range("no parameter named " + std::string(name));
  }
  const Parameter<T>& at(std::string_view name) const {
    return const_cast<ParameterGroup*>(this)->at(name);
  }
  bool contains(std::string_view name) const {
    for (const auto& p : params_) {
      if (p.name == name) return true;
    }
    return false;
  }

  std::vector<Parameter<T>>& entries() { return params_; }
  const std::vector<Parameter<T>>& entries() const { return params_; }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  std::int64_t trainable_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) {
      if (p.trainable()) n += p.tensor.size();
    }
    return n;
  }

  std::int64_t step = 0;

 private:
  std::vector<Parameter<T>> params_;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWStats {
  int updated = 0;
  int skipped_nonfinite = 0;
};

/// One AdamW update with decoupled weight decay over every trainable tensor
/// that holds a gradient. A tensor whose gradient contains a non-finite value
/// is left untouched and counted in the returned stats.
template <typename T>
AdamWStats adamw_step(ParameterGroup<T>& group, const AdamWConfig& cfg);

extern template AdamWStats adamw_step(ParameterGroup<float>&, const AdamWConfig&);
extern template AdamWStats adamw_step(ParameterGroup<double>&, const AdamWConfig&);

}  // namespace kgprompt::num
