// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgprompt::num {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Builds "op: shape mismatch [a] vs [b]".
[[noreturn]] void throw_shape_error(const char* op, const Shape& a, const Shape& b);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents.
  std::function<void(Node&)> backward;

  T* grad_data() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad.data();
  }
};

// Thread-local switch that stops ops from recording backward closures.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Handle to a node of the computation graph. Copies share storage.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value.assign(static_cast<std::size_t>(numel(shape)), T(0));
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (static_cast<std::int64_t>(values.size()) != numel(shape)) {
      throw ShapeError("tensor: " + std::to_string(values.size()) +
                       " values do not fill shape " + shape_str(shape));
    }
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor scalar(T v, bool requires_grad = false) { return from({}, {v}, requires_grad); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t dim(int i) const {
    return node_->shape[static_cast<std::size_t>(i < 0 ? rank() + i : i)];
  }
  std::int64_t size() const { return static_cast<std::int64_t>(node_->value.size()); }

  std::span<const T> values() const { return node_->value; }
  std::span<T> mutable_values() { return node_->value; }
  const T* data() const { return node_->value.data(); }
  T* data() { return node_->value.data(); }
  T item() const {
    if (size() != 1) throw ShapeError("item: tensor has shape " + shape_str(shape()));
    return node_->value[0];
  }

  std::span<const T> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const { return node_; }

  /// Copy of the values with no graph history.
  Tensor detach() const { return from(shape(), node_->value, false); }

  /// Reverse sweep from a scalar root; gradients accumulate into leaves.
  void backward() const;

 private:
  std::shared_ptr<Node<T>> node_;
};

// Creates the output node of an op. The backward closure is attached only
// when grad mode is on and at least one input requires a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values, std::vector<Tensor<T>> inputs,
                      const char* op, std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->op = op;
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (auto& in : inputs) n->parents.push_back(in.shared());
    n->backward = std::move(backward);
  }
  return Tensor<T>(std::move(n));
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace kgprompt::num
