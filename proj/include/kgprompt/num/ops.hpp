// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives. Every op computes its forward value eagerly and,
// when any input requires a gradient, records an exact vector-Jacobian
// product. Shapes are row-major; "rows" means all leading dimensions folded
// together against the last one.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kgprompt/num/tensor.hpp"

namespace kgprompt::num {

// A [..., K] x B [K, N] -> [..., N].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// A [..., K] x B[N, K]^T -> [..., N].
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset);

// X [..., N] + bias [N], broadcast over rows.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

// max(x, 0); the subgradient at 0 is 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& x);

// Normalizes the last dimension, then applies gain and bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

// Row-wise log-softmax over the last dimension, stabilized by the row max.
template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x);
template <typename T>
Tensor<T> softmax(const Tensor<T>& x);

// table [V, D] rows at ids -> [n, D]; backward scatter-adds into the table.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::int64_t> ids);

// S [B, V], picks S[b, ids[b*m + j]] -> [B, m].
template <typename T>
Tensor<T> gather_cols(const Tensor<T>& s, std::span<const std::int64_t> ids, std::int64_t per_row);

// Stride-1 2-D convolution with symmetric zero padding.
// x [B, Cin, H, W], kernel [Cout, Cin, KH, KW], bias [Cout] -> [B, Cout, H', W'].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::int64_t padding);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t begin, std::int64_t end);

// Mean over [begin, end) along `axis`; the axis is removed from the result.
template <typename T>
Tensor<T> mean_range(const Tensor<T>& x, int axis, std::int64_t begin, std::int64_t end);

// Full reductions to a scalar.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// p-norm (p = 1 or 2) of the whole tensor. The L1 subgradient at 0 is 0.
template <typename T>
Tensor<T> norm(const Tensor<T>& x, int p);

// D[b, v] = ||q_b - e_v||_p for q [B, D], e [V, D].
template <typename T>
Tensor<T> pairwise_distance(const Tensor<T>& q, const Tensor<T>& e, int p);

/// Multi-head scaled dot-product attention over q, k, v [B, L, H].
///
/// Keys at positions >= lengths[b] are masked out. Query rows past the length
/// are still computed so that downstream reshapes stay dense; callers must not
/// read them. When `probs_out` is non-null it receives the attention weights
/// laid out [B, heads, L, L].
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads,
                    std::span<const std::int64_t> lengths, std::vector<T>* probs_out = nullptr);

// Counts ReLU inputs whose magnitude falls below a threshold. Used by the
// gradient checker to reject evaluation points that sit on a kink.
struct KinkMonitor {
  static void arm(double threshold);
  static void disarm();
  static std::int64_t hits();
};

}  // namespace kgprompt::num
