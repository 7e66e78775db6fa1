// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kgprompt/kg/graph.hpp"
#include "kgprompt/model/model.hpp"
#include "kgprompt/train/trainer.hpp"

namespace kgprompt::cli {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

struct RunConfig {
  kg::DatasetPaths paths;
  bool temporal = false;
  std::filesystem::path output_dir = "out";
  model::ModelConfig model;
  train::TrainConfig train;
  // Normalized `key = value` listing of every key, defaults included.
  std::string echo;
};

/// Parses `key = value` lines; `#` starts a comment. Relative paths resolve
/// against `base_dir`. Errors name `source` and the offending line.
RunConfig parse_config_text(std::string_view text, const std::string& source, const std::filesystem::path& base_dir,
                            bool check_files = true);
RunConfig parse_config(const std::filesystem::path& path);

// Every accepted key with its default, one `key = value` per line.
std::string default_config_listing();

// The listing for a parsed config.
std::string config_listing(const RunConfig& cfg);

// "bottom:2", "top:1", "all" or "none".
model::FreezeSpec parse_freeze(std::string_view s, bool word_embeddings);

enum class VariantKind { kSingle, kEnsemble };

struct Variant {
  std::string name = "full";
  VariantKind kind = VariantKind::kSingle;
};

/// Applies an ablation variant to a config: full, separated, no-graph,
/// non-layerwise, no-lar, random-lar, freeze=<bottom|top>:<n>, ensemble.
Variant apply_variant(RunConfig& cfg, std::string_view variant);

}  // namespace kgprompt::cli
