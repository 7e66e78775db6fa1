// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgprompt/kg/graph.hpp"
#include "kgprompt/model/model.hpp"
#include "kgprompt/util/random.hpp"

namespace kgprompt::testing {

// Small random KG held in memory. Every entity and relation occurs in train;
// valid and test take `held_out` facts each. Names and descriptions draw on
// a shared word pool so keyword overlaps exist.
inline kg::KnowledgeGraph small_graph(int entities, int relations, int extra_train, int held_out,
                                      std::uint64_t seed, bool augment = true) {
  static const char* kWords[] = {"amber", "basalt", "cedar", "delta", "ember", "fjord", "granite", "harbor",
                                 "indigo", "juniper", "kestrel", "lagoon", "meadow", "nectar", "onyx", "prairie"};
  util::Rng rng = util::derive_rng(seed, 99);
  auto pick = [&](int n) { return static_cast<int>(util::uniform_below(rng, static_cast<std::uint64_t>(n))); };
  auto e = [](int i) { return "e" + std::to_string(i); };
  auto r = [](int i) { return "r" + std::to_string(i); };
  std::vector<kg::RawFact> train, valid, test;
  int line = 0;
  for (int i = 0; i < entities; ++i) train.push_back({e(i), r(i % relations), e((i + 1) % entities), {}, ++line});
  for (int i = 0; i < extra_train; ++i) train.push_back({e(pick(entities)), r(pick(relations)), e(pick(entities)), {}, ++line});
  for (int i = 0; i < held_out; ++i) {
    valid.push_back({e(pick(entities)), r(pick(relations)), e(pick(entities)), {}, i + 1});
    test.push_back({e(pick(entities)), r(pick(relations)), e(pick(entities)), {}, i + 1});
  }
  std::vector<kg::TextRow> ent_text;
  for (int i = 0; i < entities; ++i) {
    std::string desc = std::string(kWords[pick(16)]) + " " + kWords[pick(16)] + " place";
    ent_text.push_back({e(i), {"Entity " + std::to_string(i), desc}});
  }
  std::vector<kg::TextRow> rel_text;
  for (int i = 0; i < relations; ++i) rel_text.push_back({r(i), {"relation " + std::to_string(i), ""}});
  auto g = kg::KnowledgeGraph::build(train, valid, test, ent_text, rel_text, false);
  return augment ? kg::augment_inverse(std::move(g)) : g;
}

// Tiny model configuration for fast forward passes.
inline model::ModelConfig tiny_model_config(model::ScorerKind scorer = model::ScorerKind::kConvE) {
  model::ModelConfig c;
  c.embed_dim = 8;
  c.embed_init_std = 0.5;
  c.prompt_hidden = 12;
  c.prompt_len = 2;
  c.scorer.kind = scorer;
  c.scorer.conve_channels = 2;
  c.scorer.conve_reshape_h = 2;
  c.scorer.conve_reshape_w = 4;
  c.encoder.layers = 2;
  c.encoder.hidden = 8;
  c.encoder.heads = 2;
  c.encoder.ffn = 12;
  c.encoder.max_text_len = 16;
  return c;
}

}  // namespace kgprompt::testing
