// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/num/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

namespace kgprompt::num {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

std::int64_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

template <typename T>
void check_same(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw_shape_error(op, a.shape(), b.shape());
}

int norm_axis(int axis, int rank, const char* op) {
  int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(rank));
  }
  return a;
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::int64_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit r;
  for (int i = 0; i < axis; ++i) r.outer *= s[static_cast<std::size_t>(i)];
  r.extent = s[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

thread_local bool g_kink_armed = false;
thread_local double g_kink_threshold = 0.0;
thread_local std::int64_t g_kink_hits = 0;

}  // namespace

void KinkMonitor::arm(double threshold) {
  g_kink_armed = true;
  g_kink_threshold = threshold;
  g_kink_hits = 0;
}
void KinkMonitor::disarm() { g_kink_armed = false; }
std::int64_t KinkMonitor::hits() { return g_kink_hits; }

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (b.rank() != 2 || a.rank() < 1 || last_dim(a.shape()) != b.dim(0)) {
    throw_shape_error("matmul", a.shape(), b.shape());
  }
  const std::int64_t k = b.dim(0), n = b.dim(1), m = a.size() / k;
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  std::vector<T> out(static_cast<std::size_t>(m * n));
  MapMat<T>(out.data(), m, n).noalias() = CMapMat<T>(a.data(), m, k) * CMapMat<T>(b.data(), k, n);
  return make_result<T>(std::move(out_shape), std::move(out), {a, b}, "matmul",
                        [m, k, n](Node<T>& self) {
                          auto& pa = *self.parents[0];
                          auto& pb = *self.parents[1];
                          CMapMat<T> dc(self.grad.data(), m, n);
                          if (pa.requires_grad) {
                            MapMat<T>(pa.grad_data(), m, k).noalias() +=
                                dc * CMapMat<T>(pb.value.data(), k, n).transpose();
                          }
                          if (pb.requires_grad) {
                            MapMat<T>(pb.grad_data(), k, n).noalias() +=
                                CMapMat<T>(pa.value.data(), m, k).transpose() * dc;
                          }
                        });
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (b.rank() != 2 || a.rank() < 1 || last_dim(a.shape()) != b.dim(1)) {
    throw_shape_error("matmul_nt", a.shape(), b.shape());
  }
  const std::int64_t k = b.dim(1), n = b.dim(0), m = a.size() / k;
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  std::vector<T> out(static_cast<std::size_t>(m * n));
  MapMat<T>(out.data(), m, n).noalias() =
      CMapMat<T>(a.data(), m, k) * CMapMat<T>(b.data(), n, k).transpose();
  return make_result<T>(std::move(out_shape), std::move(out), {a, b}, "matmul_nt",
                        [m, k, n](Node<T>& self) {
                          auto& pa = *self.parents[0];
                          auto& pb = *self.parents[1];
                          CMapMat<T> dc(self.grad.data(), m, n);
                          if (pa.requires_grad) {
                            MapMat<T>(pa.grad_data(), m, k).noalias() +=
                                dc * CMapMat<T>(pb.value.data(), n, k);
                          }
                          if (pb.requires_grad) {
                            MapMat<T>(pb.grad_data(), n, k).noalias() +=
                                dc.transpose() * CMapMat<T>(pa.value.data(), m, k);
                          }
                        });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same("add", a, b);
  std::vector<T> out(a.values().begin(), a.values().end());
  const T* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, "add", [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      T* g = p->grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same("sub", a, b);
  std::vector<T> out(a.values().begin(), a.values().end());
  const T* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= pb[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, "sub", [](Node<T>& self) {
    if (self.parents[0]->requires_grad) {
      T* g = self.parents[0]->grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      T* g = self.parents[1]->grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same("mul", a, b);
  std::vector<T> out(a.values().begin(), a.values().end());
  const T* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, "mul", [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      T* g = pa.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      T* g = pb.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= factor;
  return make_result<T>(a.shape(), std::move(out), {a}, "scale", [factor](Node<T>& self) {
    T* g = self.parents[0]->grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += factor * self.grad[i];
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  std::vector<T> out(a.values().begin(), a.values().end());
  for (auto& v : out) v += offset;
  return make_result<T>(a.shape(), std::move(out), {a}, "add_scalar", [](Node<T>& self) {
    T* g = self.parents[0]->grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  const std::int64_t n = last_dim(x.shape());
  if (bias.size() != n || bias.rank() != 1) throw_shape_error("add_bias", x.shape(), bias.shape());
  const std::int64_t rows = x.size() / std::max<std::int64_t>(n, 1);
  std::vector<T> out(x.values().begin(), x.values().end());
  const T* b = bias.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    T* row = out.data() + r * n;
    for (std::int64_t j = 0; j < n; ++j) row[j] += b[j];
  }
  return make_result<T>(x.shape(), std::move(out), {x, bias}, "add_bias", [rows, n](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pb = *self.parents[1];
    if (px.requires_grad) {
      T* g = px.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      T* g = pb.grad_data();
      for (std::int64_t r = 0; r < rows; ++r) {
        const T* row = self.grad.data() + r * n;
        for (std::int64_t j = 0; j < n; ++j) g[j] += row[j];
      }
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.values().begin(), x.values().end());
  if (g_kink_armed) {
    for (auto v : out) {
      if (std::abs(static_cast<double>(v)) < g_kink_threshold) ++g_kink_hits;
    }
  }
  for (auto& v : out) v = v > T(0) ? v : T(0);
  return make_result<T>(x.shape(), std::move(out), {x}, "relu", [](Node<T>& self) {
    auto& px = *self.parents[0];
    T* g = px.grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (px.value[i] > T(0)) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const std::int64_t n = last_dim(x.shape());
  if (gain.size() != n || bias.size() != n) throw_shape_error("layer_norm", x.shape(), gain.shape());
  const std::int64_t rows = x.size() / n;
  std::vector<T> out(static_cast<std::size_t>(x.size()));
  std::vector<T> xhat(out.size());
  std::vector<T> inv_std(static_cast<std::size_t>(rows));
  const T* g = gain.data();
  const T* b = bias.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * n;
    T mu = 0;
    for (std::int64_t j = 0; j < n; ++j) mu += xr[j];
    mu /= T(n);
    T var = 0;
    for (std::int64_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= T(n);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(r)] = is;
    for (std::int64_t j = 0; j < n; ++j) {
      const T h = (xr[j] - mu) * is;
      xhat[static_cast<std::size_t>(r * n + j)] = h;
      out[static_cast<std::size_t>(r * n + j)] = h * g[j] + b[j];
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), {x, gain, bias}, "layer_norm",
      [rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const T* dy = self.grad.data();
        if (pg.requires_grad || pb.requires_grad) {
          T* dg = pg.requires_grad ? pg.grad_data() : nullptr;
          T* db = pb.requires_grad ? pb.grad_data() : nullptr;
          for (std::int64_t r = 0; r < rows; ++r) {
            for (std::int64_t j = 0; j < n; ++j) {
              const std::size_t i = static_cast<std::size_t>(r * n + j);
              if (dg) dg[j] += dy[i] * xhat[i];
              if (db) db[j] += dy[i];
            }
          }
        }
        if (px.requires_grad) {
          T* dx = px.grad_data();
          const T* gv = pg.value.data();
          std::vector<T> dxh(static_cast<std::size_t>(n));
          for (std::int64_t r = 0; r < rows; ++r) {
            T m1 = 0, m2 = 0;
            for (std::int64_t j = 0; j < n; ++j) {
              const std::size_t i = static_cast<std::size_t>(r * n + j);
              dxh[static_cast<std::size_t>(j)] = dy[i] * gv[j];
              m1 += dxh[static_cast<std::size_t>(j)];
              m2 += dxh[static_cast<std::size_t>(j)] * xhat[i];
            }
            m1 /= T(n);
            m2 /= T(n);
            const T is = inv_std[static_cast<std::size_t>(r)];
            for (std::int64_t j = 0; j < n; ++j) {
              const std::size_t i = static_cast<std::size_t>(r * n + j);
              dx[i] += is * (dxh[static_cast<std::size_t>(j)] - m1 - xhat[i] * m2);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x) {
  const std::int64_t n = last_dim(x.shape());
  const std::int64_t rows = x.size() / n;
  std::vector<T> out(static_cast<std::size_t>(x.size()));
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * n;
    T* yr = out.data() + r * n;
    const T mx = *std::max_element(xr, xr + n);
    T s = 0;
    for (std::int64_t j = 0; j < n; ++j) s += std::exp(xr[j] - mx);
    const T lse = mx + std::log(s);
    for (std::int64_t j = 0; j < n; ++j) yr[j] = xr[j] - lse;
  }
  return make_result<T>(x.shape(), std::move(out), {x}, "log_softmax", [rows, n](Node<T>& self) {
    T* dx = self.parents[0]->grad_data();
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* dy = self.grad.data() + r * n;
      const T* y = self.value.data() + r * n;
      T s = 0;
      for (std::int64_t j = 0; j < n; ++j) s += dy[j];
      for (std::int64_t j = 0; j < n; ++j) dx[r * n + j] += dy[j] - std::exp(y[j]) * s;
    }
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  const std::int64_t n = last_dim(x.shape());
  const std::int64_t rows = x.size() / n;
  std::vector<T> out(static_cast<std::size_t>(x.size()));
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * n;
    T* yr = out.data() + r * n;
    const T mx = *std::max_element(xr, xr + n);
    T s = 0;
    for (std::int64_t j = 0; j < n; ++j) s += (yr[j] = std::exp(xr[j] - mx));
    for (std::int64_t j = 0; j < n; ++j) yr[j] /= s;
  }
  return make_result<T>(x.shape(), std::move(out), {x}, "softmax", [rows, n](Node<T>& self) {
    T* dx = self.parents[0]->grad_data();
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* dy = self.grad.data() + r * n;
      const T* y = self.value.data() + r * n;
      T s = 0;
      for (std::int64_t j = 0; j < n; ++j) s += dy[j] * y[j];
      for (std::int64_t j = 0; j < n; ++j) dx[r * n + j] += y[j] * (dy[j] - s);
    }
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::int64_t> ids) {
  if (table.rank() != 2) throw ShapeError("gather_rows: table must be rank 2, got " + shape_str(table.shape()));
  const std::int64_t v = table.dim(0), d = table.dim(1);
  const auto n = static_cast<std::int64_t>(ids.size());
  std::vector<T> out(static_cast<std::size_t>(n * d));
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= v) {
      throw std::out_of_range("gather_rows: id " + std::to_string(id) + " outside table of " +
                              std::to_string(v) + " rows");
    }
    std::copy_n(table.data() + id * d, d, out.data() + i * d);
  }
  std::vector<std::int64_t> idx(ids.begin(), ids.end());
  return make_result<T>({n, d}, std::move(out), {table}, "gather_rows",
                        [d, idx = std::move(idx)](Node<T>& self) {
                          T* g = self.parents[0]->grad_data();
                          for (std::size_t i = 0; i < idx.size(); ++i) {
                            const T* src = self.grad.data() + static_cast<std::int64_t>(i) * d;
                            T* dst = g + idx[i] * d;
                            for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
                          }
                        });
}

template <typename T>
Tensor<T> gather_cols(const Tensor<T>& s, std::span<const std::int64_t> ids, std::int64_t per_row) {
  if (s.rank() != 2 || static_cast<std::int64_t>(ids.size()) != s.dim(0) * per_row) {
    throw ShapeError("gather_cols: " + std::to_string(ids.size()) + " ids for " + shape_str(s.shape()) +
                     " with " + std::to_string(per_row) + " per row");
  }
  const std::int64_t b = s.dim(0), v = s.dim(1);
  std::vector<T> out(ids.size());
  for (std::int64_t r = 0; r < b; ++r) {
    for (std::int64_t j = 0; j < per_row; ++j) {
      const std::int64_t id = ids[static_cast<std::size_t>(r * per_row + j)];
      if (id < 0 || id >= v) throw std::out_of_range("gather_cols: column " + std::to_string(id));
      out[static_cast<std::size_t>(r * per_row + j)] = s.data()[r * v + id];
    }
  }
  std::vector<std::int64_t> idx(ids.begin(), ids.end());
  return make_result<T>({b, per_row}, std::move(out), {s}, "gather_cols",
                        [v, per_row, idx = std::move(idx)](Node<T>& self) {
                          T* g = self.parents[0]->grad_data();
                          for (std::size_t i = 0; i < idx.size(); ++i) {
                            const auto r = static_cast<std::int64_t>(i) / per_row;
                            g[r * v + idx[i]] += self.grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::int64_t padding) {
  if (x.rank() != 4 || kernel.rank() != 4 || kernel.dim(1) != x.dim(1)) {
    throw_shape_error("conv2d", x.shape(), kernel.shape());
  }
  if (bias.size() != kernel.dim(0)) throw_shape_error("conv2d(bias)", kernel.shape(), bias.shape());
  const std::int64_t nb = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const std::int64_t oh = h + 2 * padding - kh + 1, ow = w + 2 * padding - kw + 1;
  if (oh <= 0 || ow <= 0) throw_shape_error("conv2d", x.shape(), kernel.shape());

  std::vector<T> out(static_cast<std::size_t>(nb * cout * oh * ow));
  const T* xv = x.data();
  const T* kv = kernel.data();
  for (std::int64_t b = 0; b < nb; ++b) {
    for (std::int64_t co = 0; co < cout; ++co) {
      T* o = out.data() + ((b * cout + co) * oh) * ow;
      for (std::int64_t i = 0; i < oh * ow; ++i) o[i] = bias.data()[co];
      for (std::int64_t ci = 0; ci < cin; ++ci) {
        const T* xp = xv + ((b * cin + ci) * h) * w;
        const T* kp = kv + ((co * cin + ci) * kh) * kw;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
          for (std::int64_t ox = 0; ox < ow; ++ox) {
            T acc = 0;
            for (std::int64_t ky = 0; ky < kh; ++ky) {
              const std::int64_t iy = oy + ky - padding;
              if (iy < 0 || iy >= h) continue;
              for (std::int64_t kx = 0; kx < kw; ++kx) {
                const std::int64_t ix = ox + kx - padding;
                if (ix < 0 || ix >= w) continue;
                acc += xp[iy * w + ix] * kp[ky * kw + kx];
              }
            }
            o[oy * ow + ox] += acc;
          }
        }
      }
    }
  }
  return make_result<T>(
      {nb, cout, oh, ow}, std::move(out), {x, kernel, bias}, "conv2d",
      [=](Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pk = *self.parents[1];
        auto& pb = *self.parents[2];
        T* dx = px.requires_grad ? px.grad_data() : nullptr;
        T* dk = pk.requires_grad ? pk.grad_data() : nullptr;
        T* db = pb.requires_grad ? pb.grad_data() : nullptr;
        for (std::int64_t b = 0; b < nb; ++b) {
          for (std::int64_t co = 0; co < cout; ++co) {
            const T* go = self.grad.data() + ((b * cout + co) * oh) * ow;
            if (db) {
              for (std::int64_t i = 0; i < oh * ow; ++i) db[co] += go[i];
            }
            for (std::int64_t ci = 0; ci < cin; ++ci) {
              const std::int64_t xoff = ((b * cin + ci) * h) * w;
              const std::int64_t koff = ((co * cin + ci) * kh) * kw;
              for (std::int64_t oy = 0; oy < oh; ++oy) {
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                  const T gval = go[oy * ow + ox];
                  if (gval == T(0)) continue;
                  for (std::int64_t ky = 0; ky < kh; ++ky) {
                    const std::int64_t iy = oy + ky - padding;
                    if (iy < 0 || iy >= h) continue;
                    for (std::int64_t kx = 0; kx < kw; ++kx) {
                      const std::int64_t ix = ox + kx - padding;
                      if (ix < 0 || ix >= w) continue;
                      if (dx) dx[xoff + iy * w + ix] += gval * pk.value[static_cast<std::size_t>(koff + ky * kw + kx)];
                      if (dk) dk[koff + ky * kw + kx] += gval * px.value[static_cast<std::size_t>(xoff + iy * w + ix)];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size()) throw_shape_error("reshape", x.shape(), shape);
  std::vector<T> out(x.values().begin(), x.values().end());
  return make_result<T>(std::move(shape), std::move(out), {x}, "reshape", [](Node<T>& self) {
    T* g = self.parents[0]->grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int ax = norm_axis(axis, parts[0].rank(), "concat");
  Shape out_shape = parts[0].shape();
  out_shape[static_cast<std::size_t>(ax)] = 0;
  std::vector<std::int64_t> extents;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != out_shape.size()) throw_shape_error("concat", parts[0].shape(), p.shape());
    extents.push_back(probe[static_cast<std::size_t>(ax)]);
    probe[static_cast<std::size_t>(ax)] = 0;
    Shape ref = out_shape;
    if (probe != ref) throw_shape_error("concat", parts[0].shape(), p.shape());
  }
  std::int64_t total = 0;
  for (auto e : extents) total += e;
  out_shape[static_cast<std::size_t>(ax)] = total;
  const AxisSplit sp = split_at(out_shape, ax);

  std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
  std::int64_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const std::int64_t chunk = extents[p] * sp.inner;
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      std::copy_n(parts[p].data() + o * chunk, chunk, out.data() + o * total * sp.inner + offset);
    }
    offset += chunk;
  }
  return make_result<T>(std::move(out_shape), std::move(out), parts, "concat",
                        [sp, total, extents](Node<T>& self) {
                          std::int64_t off = 0;
                          for (std::size_t p = 0; p < self.parents.size(); ++p) {
                            const std::int64_t chunk = extents[p] * sp.inner;
                            if (self.parents[p]->requires_grad) {
                              T* g = self.parents[p]->grad_data();
                              for (std::int64_t o = 0; o < sp.outer; ++o) {
                                const T* src = self.grad.data() + o * total * sp.inner + off;
                                for (std::int64_t i = 0; i < chunk; ++i) g[o * chunk + i] += src[i];
                              }
                            }
                            off += chunk;
                          }
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t begin, std::int64_t end) {
  const int ax = norm_axis(axis, x.rank(), "slice");
  const AxisSplit sp = split_at(x.shape(), ax);
  if (begin < 0 || end > sp.extent || begin > end) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside axis of extent " + std::to_string(sp.extent));
  }
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(ax)] = end - begin;
  const std::int64_t chunk = (end - begin) * sp.inner;
  std::vector<T> out(static_cast<std::size_t>(sp.outer * chunk));
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    std::copy_n(x.data() + (o * sp.extent + begin) * sp.inner, chunk, out.data() + o * chunk);
  }
  return make_result<T>(std::move(out_shape), std::move(out), {x}, "slice",
                        [sp, begin, chunk](Node<T>& self) {
                          T* g = self.parents[0]->grad_data();
                          for (std::int64_t o = 0; o < sp.outer; ++o) {
                            T* dst = g + (o * sp.extent + begin) * sp.inner;
                            const T* src = self.grad.data() + o * chunk;
                            for (std::int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
                          }
                        });
}

template <typename T>
Tensor<T> mean_range(const Tensor<T>& x, int axis, std::int64_t begin, std::int64_t end) {
  const int ax = norm_axis(axis, x.rank(), "mean_range");
  const AxisSplit sp = split_at(x.shape(), ax);
  if (begin < 0 || end > sp.extent || begin >= end) {
    throw ShapeError("mean_range: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for axis of extent " + std::to_string(sp.extent));
  }
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + ax);
  const T inv = T(1) / T(end - begin);
  std::vector<T> out(static_cast<std::size_t>(sp.outer * sp.inner), T(0));
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    T* dst = out.data() + o * sp.inner;
    for (std::int64_t a = begin; a < end; ++a) {
      const T* src = x.data() + (o * sp.extent + a) * sp.inner;
      for (std::int64_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
    for (std::int64_t i = 0; i < sp.inner; ++i) dst[i] *= inv;
  }
  return make_result<T>(std::move(out_shape), std::move(out), {x}, "mean_range",
                        [sp, begin, end, inv](Node<T>& self) {
                          T* g = self.parents[0]->grad_data();
                          for (std::int64_t o = 0; o < sp.outer; ++o) {
                            const T* src = self.grad.data() + o * sp.inner;
                            for (std::int64_t a = begin; a < end; ++a) {
                              T* dst = g + (o * sp.extent + a) * sp.inner;
                              for (std::int64_t i = 0; i < sp.inner; ++i) dst[i] += inv * src[i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = 0;
  for (auto v : x.values()) s += v;
  return make_result<T>({}, {s}, {x}, "sum", [](Node<T>& self) {
    auto& p = *self.parents[0];
    T* g = p.grad_data();
    for (std::size_t i = 0; i < p.value.size(); ++i) g[i] += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(x), T(1) / T(x.size()));
}

template <typename T>
Tensor<T> norm(const Tensor<T>& x, int p) {
  if (p != 1 && p != 2) throw std::invalid_argument("norm: p must be 1 or 2, got " + std::to_string(p));
  T s = 0;
  for (auto v : x.values()) s += p == 1 ? std::abs(v) : v * v;
  const T r = p == 1 ? s : std::sqrt(s);
  return make_result<T>({}, {r}, {x}, "norm", [p, r](Node<T>& self) {
    auto& px = *self.parents[0];
    T* g = px.grad_data();
    const T gy = self.grad[0];
    for (std::size_t i = 0; i < px.value.size(); ++i) {
      const T v = px.value[i];
      if (p == 1) {
        g[i] += gy * (v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)));
      } else if (r > T(0)) {
        g[i] += gy * v / r;
      }
    }
  });
}

template <typename T>
Tensor<T> pairwise_distance(const Tensor<T>& q, const Tensor<T>& e, int p) {
  if (p != 1 && p != 2) throw std::invalid_argument("pairwise_distance: p must be 1 or 2");
  if (q.rank() != 2 || e.rank() != 2 || q.dim(1) != e.dim(1)) {
    throw_shape_error("pairwise_distance", q.shape(), e.shape());
  }
  const std::int64_t nb = q.dim(0), nv = e.dim(0), d = q.dim(1);
  std::vector<T> out(static_cast<std::size_t>(nb * nv));
  for (std::int64_t b = 0; b < nb; ++b) {
    const T* qb = q.data() + b * d;
    for (std::int64_t v = 0; v < nv; ++v) {
      const T* ev = e.data() + v * d;
      T s = 0;
      for (std::int64_t j = 0; j < d; ++j) {
        const T diff = qb[j] - ev[j];
        s += p == 1 ? std::abs(diff) : diff * diff;
      }
      out[static_cast<std::size_t>(b * nv + v)] = p == 1 ? s : std::sqrt(s);
    }
  }
  return make_result<T>({nb, nv}, std::move(out), {q, e}, "pairwise_distance",
                        [nb, nv, d, p](Node<T>& self) {
                          auto& pq = *self.parents[0];
                          auto& pe = *self.parents[1];
                          T* dq = pq.requires_grad ? pq.grad_data() : nullptr;
                          T* de = pe.requires_grad ? pe.grad_data() : nullptr;
                          for (std::int64_t b = 0; b < nb; ++b) {
                            for (std::int64_t v = 0; v < nv; ++v) {
                              const std::size_t o = static_cast<std::size_t>(b * nv + v);
                              const T gy = self.grad[o];
                              const T dist = self.value[o];
                              if (gy == T(0) || (p == 2 && dist == T(0))) continue;
                              for (std::int64_t j = 0; j < d; ++j) {
                                const T diff = pq.value[static_cast<std::size_t>(b * d + j)] -
                                               pe.value[static_cast<std::size_t>(v * d + j)];
                                T dd;
                                if (p == 1) {
                                  dd = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
                                } else {
                                  dd = diff / dist;
                                }
                                if (dq) dq[b * d + j] += gy * dd;
                                if (de) de[v * d + j] -= gy * dd;
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads,
                    std::span<const std::int64_t> lengths, std::vector<T>* probs_out) {
  if (q.rank() != 3) throw ShapeError("attention: expected [B, L, H], got " + shape_str(q.shape()));
  check_same("attention", q, k);
  check_same("attention", q, v);
  const std::int64_t nb = q.dim(0), len = q.dim(1), hid = q.dim(2);
  if (heads <= 0 || hid % heads != 0) {
    throw ShapeError("attention: " + std::to_string(heads) + " heads do not divide width " +
                     std::to_string(hid));
  }
  if (static_cast<std::int64_t>(lengths.size()) != nb) {
    throw ShapeError("attention: " + std::to_string(lengths.size()) + " lengths for batch of " +
                     std::to_string(nb));
  }
  const std::int64_t dh = hid / heads;
  const T sc = T(1) / std::sqrt(T(dh));
  std::vector<T> probs(static_cast<std::size_t>(nb * heads * len * len), T(0));
  std::vector<T> out(static_cast<std::size_t>(q.size()), T(0));
  std::vector<std::int64_t> lens(lengths.begin(), lengths.end());

  for (std::int64_t b = 0; b < nb; ++b) {
    const std::int64_t kl = lens[static_cast<std::size_t>(b)];
    if (kl <= 0 || kl > len) throw ShapeError("attention: length " + std::to_string(kl) + " outside [1, L]");
    for (std::int64_t h = 0; h < heads; ++h) {
      for (std::int64_t i = 0; i < len; ++i) {
        T* pr = probs.data() + ((b * heads + h) * len + i) * len;
        const T* qi = q.data() + (b * len + i) * hid + h * dh;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::int64_t j = 0; j < kl; ++j) {
          const T* kj = k.data() + (b * len + j) * hid + h * dh;
          T s = 0;
          for (std::int64_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          pr[j] = s * sc;
          mx = std::max(mx, pr[j]);
        }
        T z = 0;
        for (std::int64_t j = 0; j < kl; ++j) z += (pr[j] = std::exp(pr[j] - mx));
        for (std::int64_t j = 0; j < kl; ++j) pr[j] /= z;
        T* oi = out.data() + (b * len + i) * hid + h * dh;
        for (std::int64_t j = 0; j < kl; ++j) {
          const T* vj = v.data() + (b * len + j) * hid + h * dh;
          for (std::int64_t c = 0; c < dh; ++c) oi[c] += pr[j] * vj[c];
        }
      }
    }
  }
  if (probs_out) *probs_out = probs;
  return make_result<T>(
      q.shape(), std::move(out), {q, k, v}, "attention",
      [nb, len, hid, heads, dh, sc, lens = std::move(lens), probs = std::move(probs)](Node<T>& self) {
        auto& pq = *self.parents[0];
        auto& pk = *self.parents[1];
        auto& pv = *self.parents[2];
        T* dq = pq.requires_grad ? pq.grad_data() : nullptr;
        T* dk = pk.requires_grad ? pk.grad_data() : nullptr;
        T* dv = pv.requires_grad ? pv.grad_data() : nullptr;
        std::vector<T> dp(static_cast<std::size_t>(len));
        for (std::int64_t b = 0; b < nb; ++b) {
          const std::int64_t kl = lens[static_cast<std::size_t>(b)];
          for (std::int64_t h = 0; h < heads; ++h) {
            for (std::int64_t i = 0; i < len; ++i) {
              const T* pr = probs.data() + ((b * heads + h) * len + i) * len;
              const std::int64_t qo = (b * len + i) * hid + h * dh;
              const T* go = self.grad.data() + qo;
              T dot = 0;
              for (std::int64_t j = 0; j < kl; ++j) {
                const std::int64_t vo = (b * len + j) * hid + h * dh;
                T s = 0;
                for (std::int64_t c = 0; c < dh; ++c) s += go[c] * pv.value[static_cast<std::size_t>(vo + c)];
                dp[static_cast<std::size_t>(j)] = s;
                dot += pr[j] * s;
                if (dv) {
                  for (std::int64_t c = 0; c < dh; ++c) dv[vo + c] += pr[j] * go[c];
                }
              }
              for (std::int64_t j = 0; j < kl; ++j) {
                const T ds = pr[j] * (dp[static_cast<std::size_t>(j)] - dot) * sc;
                if (ds == T(0)) continue;
                const std::int64_t ko = (b * len + j) * hid + h * dh;
                for (std::int64_t c = 0; c < dh; ++c) {
                  if (dq) dq[qo + c] += ds * pk.value[static_cast<std::size_t>(ko + c)];
                  if (dk) dk[ko + c] += ds * pq.value[static_cast<std::size_t>(qo + c)];
                }
              }
            }
          }
        }
      });
}

#define KGPROMPT_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                            \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> relu(const Tensor<T>&);                                                     \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);        \
  template Tensor<T> log_softmax(const Tensor<T>&);                                              \
  template Tensor<T> softmax(const Tensor<T>&);                                                  \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::int64_t>);               \
  template Tensor<T> gather_cols(const Tensor<T>&, std::span<const std::int64_t>, std::int64_t); \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::int64_t); \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                           \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                 \
  template Tensor<T> slice(const Tensor<T>&, int, std::int64_t, std::int64_t);                   \
  template Tensor<T> mean_range(const Tensor<T>&, int, std::int64_t, std::int64_t);              \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> mean(const Tensor<T>&);                                                     \
  template Tensor<T> norm(const Tensor<T>&, int);                                                \
  template Tensor<T> pairwise_distance(const Tensor<T>&, const Tensor<T>&, int);                 \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int,        \
                               std::span<const std::int64_t>, std::vector<T>*);

KGPROMPT_INSTANTIATE_OPS(float)
KGPROMPT_INSTANTIATE_OPS(double)

#undef KGPROMPT_INSTANTIATE_OPS

}  // namespace kgprompt::num
