// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "kgprompt/num/grad_check.hpp"
#include "kgprompt/num/ops.hpp"
#include "test_util.hpp"

namespace kgprompt::num {
namespace {

using testing::random_tensor;
using D = Tensor<double>;

constexpr double kTol = 1e-5;

// Contracts an op output against fixed random weights so every output entry
// contributes to the checked scalar.
D probe(const D& out, std::uint64_t seed = 99) {
  util::Rng rng(seed);
  auto w = random_tensor<double>(out.shape(), rng, 1.0, false);
  return sum(mul(out, w));
}

void expect_grads(const std::function<D()>& f, std::vector<std::pair<std::string, D>> params) {
  auto report = grad_check<double>(f, std::move(params));
  ASSERT_TRUE(report.finite);
  ASSERT_FALSE(report.near_kink);
  for (const auto& e : report.entries) {
    EXPECT_LE(e.rel_error, kTol) << e.name;
  }
}

TEST(Ops, MatmulForwardMatchesLoops) {
  util::Rng rng(1);
  auto a = random_tensor<double>({2, 3, 4}, rng);
  auto b = random_tensor<double>({4, 5}, rng);
  auto c = matmul(a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 3, 5}));
  for (int r = 0; r < 6; ++r) {
    for (int n = 0; n < 5; ++n) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += a.values()[r * 4 + k] * b.values()[k * 5 + n];
      EXPECT_NEAR(c.values()[r * 5 + n], s, 1e-12);
    }
  }
  auto bt = random_tensor<double>({5, 4}, rng);
  auto d = matmul_nt(a, bt);
  for (int r = 0; r < 6; ++r) {
    for (int n = 0; n < 5; ++n) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += a.values()[r * 4 + k] * bt.values()[n * 4 + k];
      EXPECT_NEAR(d.values()[r * 5 + n], s, 1e-12);
    }
  }
}

TEST(Ops, MatmulGradients) {
  util::Rng rng(2);
  auto a = random_tensor<double>({2, 3, 4}, rng);
  auto b = random_tensor<double>({4, 5}, rng);
  auto bt = random_tensor<double>({5, 4}, rng);
  expect_grads([&] { return probe(matmul(a, b)); }, {{"a", a}, {"b", b}});
  expect_grads([&] { return probe(matmul_nt(a, bt)); }, {{"a", a}, {"bt", bt}});
}

TEST(Ops, ElementwiseGradients) {
  util::Rng rng(3);
  auto a = random_tensor<double>({3, 4}, rng);
  auto b = random_tensor<double>({3, 4}, rng);
  auto bias = random_tensor<double>({4}, rng);
  expect_grads([&] { return probe(add(a, b)); }, {{"a", a}, {"b", b}});
  expect_grads([&] { return probe(sub(a, b)); }, {{"a", a}, {"b", b}});
  expect_grads([&] { return probe(mul(a, b)); }, {{"a", a}, {"b", b}});
  expect_grads([&] { return probe(scale(add_scalar(a, 0.3), -1.7)); }, {{"a", a}});
  expect_grads([&] { return probe(add_bias(a, bias)); }, {{"a", a}, {"bias", bias}});
  expect_grads([&] { return probe(relu(a)); }, {{"a", a}});
}

TEST(Ops, NormalizationGradients) {
  util::Rng rng(4);
  auto x = random_tensor<double>({2, 3, 6}, rng);
  auto g = random_tensor<double>({6}, rng);
  auto b = random_tensor<double>({6}, rng);
  expect_grads([&] { return probe(layer_norm(x, g, b)); }, {{"x", x}, {"g", g}, {"b", b}});
  expect_grads([&] { return probe(log_softmax(x)); }, {{"x", x}});
  expect_grads([&] { return probe(softmax(x)); }, {{"x", x}});
}

TEST(Ops, SoftmaxRowsSumToOne) {
  util::Rng rng(5);
  auto x = random_tensor<double>({7, 50}, rng, 30.0);
  auto p = softmax(x);
  for (int r = 0; r < 7; ++r) {
    double s = 0;
    for (int c = 0; c < 50; ++c) s += p.values()[r * 50 + c];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ops, IndexingGradients) {
  util::Rng rng(6);
  auto table = random_tensor<double>({5, 3}, rng);
  std::vector<std::int64_t> ids = {4, 0, 4, 2};
  expect_grads([&] { return probe(gather_rows(table, ids)); }, {{"table", table}});
  auto s = random_tensor<double>({2, 6}, rng);
  std::vector<std::int64_t> cols = {1, 5, 5, 0, 3, 3};
  expect_grads([&] { return probe(gather_cols(s, cols, 3)); }, {{"s", s}});
}

TEST(Ops, ShapeGradients) {
  util::Rng rng(7);
  auto a = random_tensor<double>({2, 3, 4}, rng);
  auto b = random_tensor<double>({2, 2, 4}, rng);
  expect_grads([&] { return probe(concat<double>({a, b}, 1)); }, {{"a", a}, {"b", b}});
  expect_grads([&] { return probe(slice(a, 1, 1, 3)); }, {{"a", a}});
  expect_grads([&] { return probe(slice(a, 2, 0, 2)); }, {{"a", a}});
  expect_grads([&] { return probe(mean_range(a, 1, 1, 3)); }, {{"a", a}});
  expect_grads([&] { return probe(reshape(a, {6, 4})); }, {{"a", a}});
  expect_grads([&] { return mean(a); }, {{"a", a}});
  expect_grads([&] { return norm(a, 2); }, {{"a", a}});
  expect_grads([&] { return norm(a, 1); }, {{"a", a}});
}

TEST(Ops, ConvGradientsAndValue) {
  util::Rng rng(8);
  auto x = random_tensor<double>({2, 1, 4, 3}, rng);
  auto k = random_tensor<double>({3, 1, 3, 3}, rng);
  auto b = random_tensor<double>({3}, rng);
  expect_grads([&] { return probe(conv2d(x, k, b, 1)); }, {{"x", x}, {"k", k}, {"b", b}});

  auto y = conv2d(x, k, b, 1);
  ASSERT_EQ(y.shape(), (Shape{2, 3, 4, 3}));
  // Direct evaluation of one interior and one border output.
  auto at = [&](int bb, int c, int i, int j) {
    double s = b.values()[c];
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        const int ii = i + di, jj = j + dj;
        if (ii < 0 || ii >= 4 || jj < 0 || jj >= 3) continue;
        s += k.values()[c * 9 + (di + 1) * 3 + (dj + 1)] * x.values()[bb * 12 + ii * 3 + jj];
      }
    }
    return s;
  };
  EXPECT_NEAR(y.values()[((1 * 3 + 2) * 4 + 1) * 3 + 1], at(1, 2, 1, 1), 1e-12);
  EXPECT_NEAR(y.values()[((0 * 3 + 1) * 4 + 0) * 3 + 2], at(0, 1, 0, 2), 1e-12);
}

TEST(Ops, DistanceGradients) {
  util::Rng rng(9);
  auto q = random_tensor<double>({3, 4}, rng);
  auto e = random_tensor<double>({5, 4}, rng);
  expect_grads([&] { return probe(pairwise_distance(q, e, 2)); }, {{"q", q}, {"e", e}});
  expect_grads([&] { return probe(pairwise_distance(q, e, 1)); }, {{"q", q}, {"e", e}});
}

TEST(Ops, AttentionGradients) {
  util::Rng rng(10);
  auto q = random_tensor<double>({2, 5, 4}, rng);
  auto k = random_tensor<double>({2, 5, 4}, rng);
  auto v = random_tensor<double>({2, 5, 4}, rng);
  std::vector<std::int64_t> lens = {5, 3};
  expect_grads([&] { return probe(attention(q, k, v, 2, lens)); }, {{"q", q}, {"k", k}, {"v", v}});
}

TEST(Ops, AttentionIgnoresMaskedKeys) {
  util::Rng rng(11);
  auto q = random_tensor<double>({1, 4, 4}, rng, 1.0, false);
  auto k = random_tensor<double>({1, 4, 4}, rng, 1.0, false);
  auto v = random_tensor<double>({1, 4, 4}, rng, 1.0, false);
  std::vector<std::int64_t> lens = {2};
  auto a = attention(q, k, v, 2, lens);
  auto k2 = k.detach();
  auto v2 = v.detach();
  for (int i = 8; i < 16; ++i) {
    k2.mutable_values()[i] = 100.0;
    v2.mutable_values()[i] = -100.0;
  }
  auto b = attention(q, k2, v2, 2, lens);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(a.values()[i], b.values()[i]);
}

TEST(Ops, ShapeErrorsNameTheOp) {
  auto a = D::zeros({2, 3});
  auto b = D::zeros({4, 5});
  try {
    matmul(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[2, 3]"), std::string::npos);
  }
  EXPECT_THROW(add(a, D::zeros({3, 2})), ShapeError);
}

TEST(GradCheck, FrozenTensorsAreSkipped) {
  util::Rng rng(12);
  auto a = random_tensor<double>({3}, rng);
  auto frozen = random_tensor<double>({3}, rng, 1.0, false);
  auto report = grad_check<double>([&] { return sum(mul(a, frozen)); }, {{"a", a}, {"frozen", frozen}});
  ASSERT_EQ(report.entries.size(), 2u);
  EXPECT_FALSE(report.entries[0].skipped);
  EXPECT_TRUE(report.entries[1].skipped);
  EXPECT_TRUE(report.passed(kTol));
}

TEST(GradCheck, FlagsPointsNearReluKink) {
  auto a = D::from({3}, {0.5, 3e-5, -2.0}, true);
  auto report = grad_check<double>([&] { return sum(relu(a)); }, {{"a", a}});
  EXPECT_TRUE(report.near_kink);
  EXPECT_FALSE(report.passed(kTol));
}

TEST(GradCheck, DetectsWrongGradient) {
  // A node whose backward deliberately doubles the true gradient.
  auto a = D::from({2}, {0.3, -0.4}, true);
  auto f = [&] {
    std::vector<double> v(a.values().begin(), a.values().end());
    auto out = make_result<double>({2}, v, {a}, "bad", [](Node<double>& self) {
      auto* g = self.parents[0]->grad_data();
      for (int i = 0; i < 2; ++i) g[i] += 2.0 * self.grad[static_cast<std::size_t>(i)];
    });
    return sum(out);
  };
  auto report = grad_check<double>(f, {{"a", a}});
  EXPECT_GT(report.max_rel_error(), 0.1);
}

TEST(Autodiff, SharedSubgraphAccumulates) {
  auto x = D::from({1}, {3.0}, true);
  auto y = mul(x, x);
  auto z = sum(add(y, y));
  z.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Autodiff, NoGradGuardRecordsNothing) {
  auto x = D::from({1}, {3.0}, true);
  NoGradGuard ng;
  auto y = mul(x, x);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.node()->parents.empty());
}

}  // namespace
}  // namespace kgprompt::num
