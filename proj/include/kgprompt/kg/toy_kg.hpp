// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kgprompt::kg {

struct ToyKgParams {
  std::uint64_t seed = 7;
  int continents = 3;
  int countries_per_continent = 3;
  int cities_per_country = 4;
  int persons_per_city = 4;
  int first_names = 24;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;
};

/// A derived relation and the chain of base relations that implies it.
struct ToyKgRule {
  std::string derived;
  std::vector<std::string> path;
};

const std::vector<ToyKgRule>& toy_kg_rules();
const std::vector<std::string>& toy_kg_base_relations();

struct ToyKgFiles {
  std::filesystem::path train, valid, test, entity_text, relation_text, readme;
};

/// Writes a synthetic geography/citizenship KG whose surface text is
/// deliberately misleading: city names borrow the name of a country on
/// another continent, person descriptions cite a foreign country, and first
/// names are shared across countries. Only the graph structure resolves the
/// held-out facts. Output is byte-identical for a given seed.
ToyKgFiles generate_toy_kg(const ToyKgParams& params, const std::filesystem::path& out_dir);

}  // namespace kgprompt::kg
