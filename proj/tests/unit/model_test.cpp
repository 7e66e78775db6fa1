// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "kgprompt/model/encoder.hpp"
#include "kgprompt/model/model.hpp"
#include "kgprompt/model/prompt.hpp"
#include "kgprompt/model/scorers.hpp"
#include "kgprompt/num/grad_check.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

namespace kgprompt::model {
namespace {

using num::Tensor;
using testing::random_tensor;

EncoderConfig small_encoder() {
  EncoderConfig c;
  c.layers = 3;
  c.hidden = 8;
  c.heads = 2;
  c.ffn = 16;
  c.max_text_len = 12;
  return c;
}

std::vector<text::QueryText> texts(int k) {
  return {{{3, 4, 5, 6}, k}, {{7, 8}, k}};
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Values of x[b, i, :] for i in [0, k).
std::vector<double> slots(const Tensor<double>& x, int b, int k) {
  const auto len = x.dim(1), h = x.dim(2);
  std::vector<double> out;
  for (int i = 0; i < k; ++i) {
    for (std::int64_t c = 0; c < h; ++c) out.push_back(x.values()[static_cast<std::size_t>((b * len + i) * h + c)]);
  }
  return out;
}

TEST(Encoder, LayerInputsHoldPromptsAtEveryLayer) {
  util::Rng rng = util::derive_rng(3, 1);
  num::ParameterGroup<double> g;
  Encoder<double> enc(small_encoder(), 10, rng, g);
  const int k = 2;
  std::vector<Tensor<double>> prompts;
  for (int j = 0; j < 3; ++j) prompts.push_back(random_tensor<double>({2, k, 8}, rng));
  EncoderTrace<double> trace;
  auto out = enc.forward(prompts, texts(k), &trace);
  ASSERT_EQ(trace.inputs.size(), 3u);
  EXPECT_EQ(out.shape(), (num::Shape{2, k + 4, 8}));
  for (int j = 0; j < 3; ++j) {
    for (int b = 0; b < 2; ++b) {
      auto want = slots(prompts[static_cast<std::size_t>(j)], b, k);
      EXPECT_EQ(slots(trace.inputs[static_cast<std::size_t>(j)], b, k), want) << "layer " << j;
    }
  }
}

TEST(Encoder, InputOnlyPromptsReachFirstLayerOnly) {
  util::Rng rng = util::derive_rng(3, 2);
  num::ParameterGroup<double> g;
  Encoder<double> enc(small_encoder(), 10, rng, g);
  auto p = random_tensor<double>({2, 3, 8}, rng);
  EncoderTrace<double> trace;
  enc.forward({p}, texts(3), &trace);
  EXPECT_EQ(slots(trace.inputs[0], 0, 3), slots(p, 0, 3));
  EXPECT_NE(slots(trace.inputs[1], 0, 3), slots(p, 0, 3));
}

TEST(Encoder, CountsSequencesEncoded) {
  util::Rng rng = util::derive_rng(3, 3);
  num::ParameterGroup<double> g;
  Encoder<double> enc(small_encoder(), 10, rng, g);
  auto p = random_tensor<double>({2, 1, 8}, rng);
  enc.forward({p}, texts(1));
  enc.forward({p}, texts(1));
  EXPECT_EQ(enc.forward_count(), 4);
}

TEST(Encoder, PaddingDoesNotLeakIntoShorterRows) {
  util::Rng rng = util::derive_rng(3, 4);
  num::ParameterGroup<double> g;
  Encoder<double> enc(small_encoder(), 10, rng, g);
  auto p = random_tensor<double>({2, 1, 8}, rng);
  auto both = enc.forward({p}, texts(1));
  auto p1 = num::slice(p, 0, 1, 2);
  std::vector<text::QueryText> alone = {texts(1)[1]};
  auto single = enc.forward({p1}, alone);
  // Row 1 has 1 + 2 real positions.
  auto a = slots(num::slice(both, 0, 1, 2), 0, 3);
  auto b = slots(single, 0, 3);
  EXPECT_LT(max_abs_diff(a, b), 1e-12);
}

TEST(Encoder, WithoutPositionsTokenOrderOnlyPermutes) {
  auto cfg = small_encoder();
  cfg.position_encoding = false;
  util::Rng rng = util::derive_rng(3, 5);
  num::ParameterGroup<double> g;
  Encoder<double> enc(cfg, 10, rng, g);
  auto p = random_tensor<double>({1, 1, 8}, rng);
  std::vector<text::QueryText> ab = {{{3, 4}, 1}}, ba = {{{4, 3}, 1}};
  auto x = enc.forward({p}, ab), y = enc.forward({p}, ba);
  EXPECT_LT(max_abs_diff(slots(x, 0, 1), slots(y, 0, 1)), 1e-12);

  num::ParameterGroup<double> g2;
  util::Rng rng2 = util::derive_rng(3, 5);
  Encoder<double> positional(small_encoder(), 10, rng2, g2);
  auto x2 = positional.forward({p}, ab), y2 = positional.forward({p}, ba);
  EXPECT_GT(max_abs_diff(slots(x2, 0, 1), slots(y2, 0, 1)), 1e-6);
}

TEST(Encoder, FreezeSpecs) {
  util::Rng rng = util::derive_rng(3, 6);
  num::ParameterGroup<double> g;
  Encoder<double> enc(small_encoder(), 10, rng, g);
  auto trainable = [&](int layer) {
    bool any = false;
    for (const auto& n : enc.layer_parameter_names(layer)) any |= g.at(n).trainable();
    return any;
  };
  for (const auto& p : g.entries()) EXPECT_FALSE(p.trainable()) << p.name;

  enc.set_freeze({FreezeDirection::kBottom, 1, true});
  EXPECT_FALSE(trainable(0));
  EXPECT_TRUE(trainable(1));
  EXPECT_TRUE(trainable(2));
  EXPECT_FALSE(g.at("encoder.word_embeddings").trainable());

  enc.set_freeze({FreezeDirection::kTop, 2, false});
  EXPECT_TRUE(trainable(0));
  EXPECT_FALSE(trainable(1));
  EXPECT_FALSE(trainable(2));
  EXPECT_TRUE(g.at("encoder.word_embeddings").trainable());

  enc.set_freeze({FreezeDirection::kBottom, 0, true});
  for (int j = 0; j < 3; ++j) EXPECT_TRUE(trainable(j));
}

PromptConfig small_prompt(PromptMode mode) {
  PromptConfig c;
  c.embed_dim = 4;
  c.hidden = 6;
  c.layers = 3;
  c.width = 5;
  c.per_source = 2;
  c.mode = mode;
  return c;
}

TEST(PromptGenerator, LayerwiseShapes) {
  util::Rng rng = util::derive_rng(4, 1);
  num::ParameterGroup<double> g;
  PromptGenerator<double> gen(small_prompt(PromptMode::kLayerwise), rng, g);
  auto out = gen.generate(random_tensor<double>({3, 4}, rng), random_tensor<double>({3, 4}, rng));
  ASSERT_EQ(out.size(), 3u);
  for (const auto& t : out) EXPECT_EQ(t.shape(), (num::Shape{3, 4, 5}));
  EXPECT_EQ(gen.injected_per_query(), 3 * 4);
}

TEST(PromptGenerator, InputOnlyMatchesLayerwiseBudget) {
  util::Rng rng = util::derive_rng(4, 2);
  num::ParameterGroup<double> g;
  auto cfg = small_prompt(PromptMode::kInputOnly);
  PromptGenerator<double> gen(cfg, rng, g);
  auto out = gen.generate(random_tensor<double>({2, 4}, rng), random_tensor<double>({2, 4}, rng));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].shape(), (num::Shape{2, 12, 5}));
  EXPECT_EQ(gen.injected_per_query(), 12);
  EXPECT_EQ(prompt_parameter_count(cfg), prompt_parameter_count(small_prompt(PromptMode::kLayerwise)));
  EXPECT_EQ(g.trainable_count(), prompt_parameter_count(cfg));

  cfg.input_only_per_source = 2;
  num::ParameterGroup<double> g2;
  EXPECT_THROW(PromptGenerator<double>(cfg, rng, g2), std::invalid_argument);
}

TEST(PromptGenerator, ZeroInputGivesZeroPrompts) {
  util::Rng rng = util::derive_rng(4, 3);
  num::ParameterGroup<double> g;
  PromptGenerator<double> gen(small_prompt(PromptMode::kLayerwise), rng, g);
  for (const auto& t : gen.generate(Tensor<double>::zeros({2, 4}), Tensor<double>::zeros({2, 4}))) {
    for (double v : t.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(PromptGenerator, PositivelyHomogeneous) {
  util::Rng rng = util::derive_rng(4, 4);
  num::ParameterGroup<double> g;
  PromptGenerator<double> gen(small_prompt(PromptMode::kLayerwise), rng, g);
  auto h = random_tensor<double>({2, 4}, rng), r = random_tensor<double>({2, 4}, rng);
  auto base = gen.generate(h, r);
  auto scaled = gen.generate(num::scale(h, 2.5), num::scale(r, 2.5));
  for (std::size_t j = 0; j < base.size(); ++j) {
    for (std::int64_t i = 0; i < base[j].size(); ++i) {
      EXPECT_NEAR(scaled[j].values()[i], 2.5 * base[j].values()[i], 1e-12);
    }
  }
}

TEST(PromptGenerator, RejectsWrongInputWidth) {
  util::Rng rng = util::derive_rng(4, 5);
  num::ParameterGroup<double> g;
  PromptGenerator<double> gen(small_prompt(PromptMode::kLayerwise), rng, g);
  EXPECT_THROW(gen.generate(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({2, 4})), num::ShapeError);
}

class PromptGrad : public ::testing::TestWithParam<PromptMode> {};

TEST_P(PromptGrad, MatchesFiniteDifferences) {
  util::Rng rng = util::derive_rng(4, 6);
  num::ParameterGroup<double> g;
  PromptGenerator<double> gen(small_prompt(GetParam()), rng, g);
  auto h = random_tensor<double>({2, 4}, rng), r = random_tensor<double>({2, 4}, rng);
  auto w = random_tensor<double>({2, gen.injected_per_query() / gen.layers_emitted(), 5}, rng, 1.0, false);
  auto f = [&] {
    auto out = gen.generate(h, r);
    Tensor<double> acc = num::sum(num::mul(out[0], w));
    for (std::size_t j = 1; j < out.size(); ++j) acc = num::add(acc, num::sum(num::mul(out[j], w)));
    return acc;
  };
  std::vector<std::pair<std::string, Tensor<double>>> ps = {{"h", h}, {"r", r}};
  for (auto& p : g.entries()) ps.emplace_back(p.name, p.tensor);
  auto rep = num::grad_check<double>(f, ps);
  EXPECT_TRUE(rep.passed(1e-5)) << rep.max_rel_error();
}

INSTANTIATE_TEST_SUITE_P(Modes, PromptGrad, ::testing::Values(PromptMode::kLayerwise, PromptMode::kInputOnly));

TEST(Scorers, HandExamples) {
  std::vector<double> h = {1, 0}, r = {0, 1}, t = {1, 1}, o = {0, 0};
  EXPECT_DOUBLE_EQ(transe_score(h, r, t, 2), 0.0);
  EXPECT_DOUBLE_EQ(transe_score(h, r, o, 2), -std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(transe_score(h, r, o, 1), -2.0);
  std::vector<double> a = {1, 2, 3}, b = {2, -1, 0.5}, c = {4, 1, 2};
  EXPECT_DOUBLE_EQ(distmult_score(a, b, c), 8.0 - 2.0 + 3.0);
}

TEST(Scorers, BatchedFormsMatchReferenceLoops) {
  util::Rng rng = util::derive_rng(5, 1);
  auto h = random_tensor<double>({3, 6}, rng), r = random_tensor<double>({3, 6}, rng);
  auto e = random_tensor<double>({7, 6}, rng);
  auto row = [](const Tensor<double>& t, std::int64_t i) {
    return std::span<const double>(t.values().data() + i * t.dim(1), static_cast<std::size_t>(t.dim(1)));
  };
  for (int p : {1, 2}) {
    auto s = transe_scores(h, r, e, p);
    for (int b = 0; b < 3; ++b) {
      for (int n = 0; n < 7; ++n) {
        const double want = transe_score(row(h, b), row(r, b), row(e, n), p);
        EXPECT_NEAR(s.values()[b * 7 + n], want, 1e-12);
        EXPECT_LE(s.values()[b * 7 + n], 0.0);
      }
    }
  }
  auto d = distmult_scores(h, r, e);
  for (int b = 0; b < 3; ++b) {
    for (int n = 0; n < 7; ++n) EXPECT_NEAR(d.values()[b * 7 + n], distmult_score(row(h, b), row(r, b), row(e, n)), 1e-12);
  }
}

TEST(Scorers, DistMultIsSymmetric) {
  util::Rng rng = util::derive_rng(5, 2);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> h(5), r(5), t(5);
    for (int j = 0; j < 5; ++j) {
      h[j] = util::normal(rng);
      r[j] = util::normal(rng);
      t[j] = util::normal(rng);
    }
    EXPECT_NEAR(distmult_score(h, r, t), distmult_score(t, r, h), 1e-12);
  }
}

TEST(Scorers, ConvEFeaturesAreNonNegative) {
  util::Rng rng = util::derive_rng(5, 3);
  num::ParameterGroup<double> g;
  ScorerConfig cfg;
  cfg.conve_reshape_h = 2;
  cfg.conve_reshape_w = 4;
  Scorer<double> s(cfg, 8, 5, 4, rng, g);
  auto f = s.conve_features(random_tensor<double>({6, 8}, rng, 3.0), random_tensor<double>({6, 8}, rng, 3.0));
  EXPECT_EQ(f.shape(), (num::Shape{6, 8}));
  for (double v : f.values()) EXPECT_GE(v, 0.0);
}

TEST(Scorers, ZeroWeightsGiveZeroScores) {
  util::Rng rng = util::derive_rng(5, 4);
  for (auto kind : {ScorerKind::kConvE, ScorerKind::kTextOnly}) {
    num::ParameterGroup<double> g;
    ScorerConfig cfg;
    cfg.kind = kind;
    cfg.conve_reshape_h = 2;
    cfg.conve_reshape_w = 4;
    Scorer<double> s(cfg, 8, 5, 4, rng, g);
    for (auto& p : g.entries()) {
      for (auto& v : p.tensor.mutable_values()) v = 0.0;
    }
    QueryRepresentation<double> q{random_tensor<double>({2, 4}, rng), random_tensor<double>({2, 4}, rng),
                                  random_tensor<double>({2, 8}, rng), random_tensor<double>({2, 8}, rng)};
    auto out = s.score_all(q, random_tensor<double>({5, 8}, rng));
    EXPECT_EQ(out.shape(), (num::Shape{2, 5}));
    for (double v : out.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Scorers, ParseNames) {
  EXPECT_EQ(parse_scorer("conve"), ScorerKind::kConvE);
  EXPECT_EQ(parse_scorer("text_only"), ScorerKind::kTextOnly);
  EXPECT_STREQ(scorer_name(ScorerKind::kTransE), "transe");
  EXPECT_THROW(parse_scorer("rotate"), std::invalid_argument);
}

class ScorerGrad : public ::testing::TestWithParam<ScorerKind> {};

TEST_P(ScorerGrad, MatchesFiniteDifferences) {
  util::Rng rng = util::derive_rng(5, 5);
  num::ParameterGroup<double> g;
  ScorerConfig cfg;
  cfg.kind = GetParam();
  cfg.conve_channels = 2;
  cfg.conve_reshape_h = 2;
  cfg.conve_reshape_w = 2;
  Scorer<double> s(cfg, 4, 5, 3, rng, g);
  for (auto& p : g.entries()) {
    for (auto& v : p.tensor.mutable_values()) v += 0.1 * util::normal(rng);
  }
  QueryRepresentation<double> q{random_tensor<double>({2, 3}, rng), random_tensor<double>({2, 3}, rng),
                                random_tensor<double>({2, 4}, rng), random_tensor<double>({2, 4}, rng)};
  auto e = random_tensor<double>({5, 4}, rng);
  auto w = random_tensor<double>({2, 5}, rng, 1.0, false);
  auto f = [&] { return num::sum(num::mul(s.score_all(q, e), w)); };
  std::vector<std::pair<std::string, Tensor<double>>> ps = {{"entities", e}};
  if (GetParam() == ScorerKind::kTextOnly) {
    ps.emplace_back("z_head", q.z_head);
    ps.emplace_back("z_rel", q.z_rel);
  } else {
    ps.emplace_back("head", q.head);
    ps.emplace_back("rel", q.rel);
  }
  for (auto& p : g.entries()) ps.emplace_back(p.name, p.tensor);
  auto rep = num::grad_check<double>(f, ps);
  EXPECT_TRUE(rep.passed(1e-5)) << rep.max_rel_error() << " kink " << rep.near_kink;
}

INSTANTIATE_TEST_SUITE_P(Kinds, ScorerGrad,
                         ::testing::Values(ScorerKind::kTransE, ScorerKind::kDistMult, ScorerKind::kConvE,
                                           ScorerKind::kTextOnly));

TEST(KgcModel, ForwardShapesAndCounter) {
  auto graph = testing::small_graph(12, 2, 10, 3, 1);
  for (auto strategy : {text::Strategy::kJoint, text::Strategy::kSeparated}) {
    auto cfg = testing::tiny_model_config();
    cfg.strategy = strategy;
    KgcModel<double> m(cfg, graph, 5);
    auto qs = graph.queries(kg::Split::kTrain);
    std::vector<kg::Query> batch(qs.begin(), qs.begin() + 4);
    ForwardTrace<double> trace;
    auto s = m.forward(batch, &trace);
    EXPECT_EQ(s.shape(), (num::Shape{4, 12}));
    const int passes = strategy == text::Strategy::kJoint ? 1 : 2;
    EXPECT_EQ(m.encoder_forwards(), 4 * passes);
    EXPECT_EQ(trace.encoder.inputs.size(), 2u);
  }
}

TEST(KgcModel, GraphOnlySkipsEncoder) {
  auto graph = testing::small_graph(12, 2, 10, 3, 1);
  auto cfg = testing::tiny_model_config();
  cfg.graph_only = true;
  KgcModel<double> m(cfg, graph, 5);
  EXPECT_EQ(m.encoder(), nullptr);
  auto qs = graph.queries(kg::Split::kTrain);
  m.forward(std::span(qs).first(3));
  EXPECT_EQ(m.encoder_forwards(), 0);
  cfg.scorer.kind = ScorerKind::kTextOnly;
  EXPECT_THROW(KgcModel<double>(cfg, graph, 5), std::invalid_argument);
}

TEST(KgcModel, SaveLoadRoundTrip) {
  auto graph = testing::small_graph(12, 2, 10, 3, 1);
  auto cfg = testing::tiny_model_config();
  KgcModel<double> a(cfg, graph, 5), b(cfg, graph, 6);
  num::Checkpoint ck;
  a.save(ck);
  b.load(ck);
  auto qs = graph.queries(kg::Split::kTrain);
  auto sa = a.forward(std::span(qs).first(3)), sb = b.forward(std::span(qs).first(3));
  EXPECT_EQ(std::vector<double>(sa.values().begin(), sa.values().end()),
            std::vector<double>(sb.values().begin(), sb.values().end()));
}

}  // namespace
}  // namespace kgprompt::model
