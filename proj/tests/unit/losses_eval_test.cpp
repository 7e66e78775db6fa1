// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "kgprompt/num/grad_check.hpp"
#include "kgprompt/train/eval.hpp"
#include "kgprompt/train/losses.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

namespace kgprompt::train {
namespace {

using num::Tensor;

// Smoothed cross entropy of one row, evaluated directly in long double.
double ce_oracle(const std::vector<double>& s, int target, double eps, bool minus_one) {
  long double mx = s[0];
  for (double x : s) mx = std::max<long double>(mx, x);
  long double z = 0;
  for (double x : s) z += std::exp(static_cast<long double>(x) - mx);
  const long double lse = mx + std::log(z);
  const auto v = static_cast<long double>(s.size());
  const long double off = eps / (minus_one ? v - 1 : v);
  long double loss = -(1 - eps) * (s[static_cast<std::size_t>(target)] - lse);
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (static_cast<int>(j) != target) loss -= off * (s[j] - lse);
  }
  return static_cast<double>(loss);
}

TEST(CeLoss, TwoEntityHandCases) {
  auto s = Tensor<double>::from({1, 2}, {0.0, 0.0});
  std::vector<std::int64_t> t = {0};
  EXPECT_NEAR(ce_loss(s, t, 0.0).item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(ce_loss(s, t, 0.1).item(), 0.95 * std::log(2.0), 1e-12);
  EXPECT_NEAR(ce_loss(s, t, 0.1, SmoothingNormalizer::kVocabMinusOne).item(), std::log(2.0), 1e-12);
}

TEST(CeLoss, MatchesScalarOracle) {
  const std::vector<std::vector<double>> rows = {{1.0, 2.0, 3.0}, {-4.0, 0.5, 0.5}, {1e4, -1e4, 0.0}, {2.0, -1.0}};
  for (const auto& r : rows) {
    for (int t = 0; t < static_cast<int>(r.size()); ++t) {
      for (double eps : {0.0, 0.1, 0.4}) {
        for (bool m1 : {false, true}) {
          auto s = Tensor<double>::from({1, static_cast<std::int64_t>(r.size())}, r);
          std::vector<std::int64_t> tg = {t};
          const double got = ce_loss(s, tg, eps, m1 ? SmoothingNormalizer::kVocabMinusOne : SmoothingNormalizer::kVocab).item();
          EXPECT_NEAR(got, ce_oracle(r, t, eps, m1), 1e-10 * std::max(1.0, std::abs(got)));
        }
      }
    }
  }
}

TEST(CeLoss, RejectsBadInput) {
  auto s = Tensor<double>::zeros({1, 3});
  std::vector<std::int64_t> out_of_range = {3}, two = {0, 1};
  EXPECT_THROW(ce_loss(s, out_of_range, 0.1), std::out_of_range);
  EXPECT_THROW(ce_loss(s, two, 0.1), num::ShapeError);
  std::vector<std::int64_t> ok = {0};
  EXPECT_THROW(ce_loss(s, ok, 1.0), std::invalid_argument);
}

TEST(Softmax, RowsSumToOneForExtremeScores) {
  util::Rng rng(8);
  auto s = testing::random_tensor<double>({16, 40}, rng, 1e4, false);
  auto p = num::softmax(s);
  for (int i = 0; i < 16; ++i) {
    double sum = 0;
    for (int j = 0; j < 40; ++j) {
      const double v = p.values()[i * 40 + j];
      ASSERT_TRUE(std::isfinite(v));
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(AlphaSchedule, RampsThenHoldsExactly) {
  EXPECT_EQ(alpha_schedule(0, 0.1, 1e-3), 0.0);
  EXPECT_NEAR(alpha_schedule(50, 0.1, 1e-3), 0.05, 1e-15);
  EXPECT_EQ(alpha_schedule(100, 0.1, 1e-3), 0.1);
  EXPECT_EQ(alpha_schedule(3, 0.3, 0.1), 0.3);
  EXPECT_EQ(alpha_schedule(10000, 0.1, 1e-5), 0.1);
  EXPECT_LT(alpha_schedule(9999, 0.1, 1e-5), 0.1);
  EXPECT_EQ(alpha_schedule(1000000, 0.1, 1e-5), 0.1);
  EXPECT_THROW(alpha_schedule(-1, 0.1, 1e-5), std::invalid_argument);
}

TEST(TotalLoss, HandExample) {
  auto s = Tensor<double>::from({1, 4}, {1.0, 2.0, 0.5, 3.0});
  std::vector<std::int64_t> t = {0}, adv = {1, 3};
  auto parts = total_loss(s, t, adv, 2, 0.1, SmoothingNormalizer::kVocab, 0.5, 1.0, lar::SignMode::kCorrected);
  const double ce = ce_oracle({1.0, 2.0, 0.5, 3.0}, 0, 0.1, false);
  const double lar = std::max(0.0, 2.5 - 1.0 + 1.0);
  EXPECT_NEAR(parts.ce, ce, 1e-12);
  EXPECT_NEAR(parts.lar, lar, 1e-12);
  EXPECT_NEAR(parts.total.item(), ce + 0.5 * lar, 1e-12);

  auto no_lar = total_loss(s, t, {}, 2, 0.1, SmoothingNormalizer::kVocab, 0.0, 1.0, lar::SignMode::kCorrected);
  EXPECT_NEAR(no_lar.total.item(), ce, 1e-12);
  EXPECT_THROW(total_loss(s, t, std::vector<std::int64_t>{1}, 2, 0.1, SmoothingNormalizer::kVocab, 0.5, 1.0,
                          lar::SignMode::kCorrected),
               std::invalid_argument);
}

TEST(TotalLoss, GradientOnFiveEntities) {
  util::Rng rng(12);
  auto s = testing::random_tensor<double>({3, 5}, rng);
  std::vector<std::int64_t> t = {0, 4, 2}, adv = {1, 2, 0, 3, 4, 1};
  for (auto sign : {lar::SignMode::kCorrected, lar::SignMode::kAsWritten}) {
    auto f = [&] {
      return total_loss(s, t, adv, 2, 0.1, SmoothingNormalizer::kVocab, 0.3, 2.0, sign).total;
    };
    auto rep = num::grad_check<double>(f, {{"scores", s}});
    EXPECT_TRUE(rep.passed(1e-5)) << rep.max_rel_error() << " kink " << rep.near_kink;
  }
}

// Independent rank: entities scoring at least the target, minus filtered
// ones, plus one.
std::int64_t rank_oracle(const std::vector<double>& row, int target, const std::set<int>& known) {
  std::int64_t worse_or_equal = 0;
  for (int e = 0; e < static_cast<int>(row.size()); ++e) {
    if (e == target || known.count(e)) continue;
    if (!(row[static_cast<std::size_t>(e)] < row[static_cast<std::size_t>(target)])) ++worse_or_equal;
  }
  return worse_or_equal + 1;
}

TEST(FilteredRank, HandCases) {
  std::vector<double> s = {0.1, 0.5, 0.5, 0.9, 0.2};
  std::vector<int> known = {3};
  EXPECT_EQ(filtered_rank(s, 1, known), 2);
  EXPECT_EQ(filtered_rank(s, 1, {}), 3);
  std::vector<int> with_target = {1, 2, 3};
  EXPECT_EQ(filtered_rank(s, 1, with_target), 1);
  EXPECT_EQ(filtered_rank(s, 0, {}), 5);
}

struct TableCase {
  int entities;
  int score_levels;
};

class RankOracle : public ::testing::TestWithParam<TableCase> {};

TEST_P(RankOracle, EvaluateQueriesMatchesBruteForce) {
  const auto [n, levels] = GetParam();
  auto g = testing::small_graph(n, 3, n, n / 4, static_cast<std::uint64_t>(n));
  auto filter = kg::build_filter_index(g);
  util::Rng rng(n);
  auto queries = g.queries(kg::Split::kTest);
  std::vector<std::vector<double>> table;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(n));
    for (auto& x : row) x = static_cast<double>(util::uniform_below(rng, static_cast<std::uint64_t>(levels)));
    table.push_back(row);
  }
  std::size_t cursor = 0;
  BatchScoreFn fn = [&](std::span<const kg::Query> batch) {
    std::vector<double> out;
    for (std::size_t i = 0; i < batch.size(); ++i) out.insert(out.end(), table[cursor + i].begin(), table[cursor + i].end());
    cursor += batch.size();
    return out;
  };
  auto rep = evaluate_queries(fn, queries, filter, n, 7);

  // Brute-force filter: every fact of every split in either direction.
  std::map<std::tuple<int, int>, std::set<int>> truth;
  for (auto split : {kg::Split::kTrain, kg::Split::kValid, kg::Split::kTest}) {
    for (const auto& q : g.queries(split)) truth[{q.head, q.relation}].insert(q.tail);
  }
  double rr = 0, h1 = 0, h3 = 0, h10 = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto known = truth[{queries[i].head, queries[i].relation}];
    known.erase(queries[i].tail);
    const auto r = rank_oracle(table[i], queries[i].tail, known);
    rr += 1.0 / static_cast<double>(r);
    h1 += r <= 1;
    h3 += r <= 3;
    h10 += r <= 10;
  }
  const double q = static_cast<double>(queries.size());
  EXPECT_EQ(rep.all.count, static_cast<std::int64_t>(queries.size()));
  EXPECT_EQ(rep.forward.count + rep.inverse.count, rep.all.count);
  EXPECT_DOUBLE_EQ(rep.all.mrr, rr / q);
  EXPECT_DOUBLE_EQ(rep.all.hits1, h1 / q);
  EXPECT_DOUBLE_EQ(rep.all.hits3, h3 / q);
  EXPECT_DOUBLE_EQ(rep.all.hits10, h10 / q);
  EXPECT_LE(rep.all.hits1, rep.all.hits3);
  EXPECT_LE(rep.all.hits3, rep.all.hits10);
  EXPECT_LE(rep.all.hits10, 1.0);
  EXPECT_GE(rep.all.mrr, rep.all.hits1);
}

INSTANTIATE_TEST_SUITE_P(Sizes, RankOracle,
                         ::testing::Values(TableCase{20, 3}, TableCase{20, 1000}, TableCase{1000, 50}));

TEST(Evaluate, ShiftInvariantAndEnsembleOfOneModelIsIdentity) {
  auto g = testing::small_graph(30, 2, 30, 8, 2);
  auto filter = kg::build_filter_index(g);
  auto cfg = testing::tiny_model_config(model::ScorerKind::kDistMult);
  cfg.graph_only = true;
  model::KgcModel<double> m(cfg, g, 3);
  auto base = model_score_fn(m);
  BatchScoreFn shifted = [&](std::span<const kg::Query> b) {
    auto s = base(b);
    for (auto& x : s) x += 17.0;
    return s;
  };
  auto queries = g.queries(kg::Split::kValid);
  auto a = evaluate_queries(base, queries, filter, 30, 5);
  auto b = evaluate_queries(shifted, queries, filter, 30, 5);
  auto c = evaluate_queries(averaged_softmax_fn(base, base, 30), queries, filter, 30, 5);
  EXPECT_EQ(a.to_text(), b.to_text());
  EXPECT_EQ(a.to_text(), c.to_text());
  auto d = evaluate_filtered(m, g, filter, kg::Split::kValid, 64, false);
  EXPECT_EQ(a.to_text(), d.to_text());
}

TEST(Evaluate, OneEncoderPassPerQuery) {
  auto g = testing::small_graph(25, 2, 10, 6, 9);
  auto filter = kg::build_filter_index(g);
  model::KgcModel<float> m(testing::tiny_model_config(), g, 1);
  auto rep = evaluate_filtered(m, g, filter, kg::Split::kTest, 4, false);
  EXPECT_EQ(rep.encoder_forwards, static_cast<std::int64_t>(g.queries(kg::Split::kTest).size()));
  EXPECT_EQ(rep.wall_seconds, 0.0);
}

TEST(EvalReport, TextLayout) {
  EvalReport r;
  r.all = {0.5, 0.25, 0.5, 1.0, 4};
  r.encoder_forwards = 4;
  const auto text = r.to_text();
  EXPECT_EQ(text.substr(0, 32), "mrr = 0.5000000000\nhits1 = 0.250");
  EXPECT_NE(text.find("encoder_forwards = 4\nwall_seconds = 0.000\n\n[forward]\n"), std::string::npos);
  EXPECT_NE(text.find("\n[inverse]\nmrr = 0.0000000000\n"), std::string::npos);
}

}  // namespace
}  // namespace kgprompt::train
