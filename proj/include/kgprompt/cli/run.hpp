// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string_view>

#include "kgprompt/cli/config.hpp"
#include "kgprompt/kg/graph.hpp"
#include "kgprompt/num/checkpoint.hpp"
#include "kgprompt/train/eval.hpp"
#include "kgprompt/train/trainer.hpp"

namespace kgprompt::cli {

struct Dataset {
  kg::KnowledgeGraph graph;
  kg::FilterIndex filter;
};

Dataset load_dataset(const RunConfig& cfg);

struct RunOutcome {
  train::TrainResult train;
  train::EvalReport valid;
  train::EvalReport test;
  // Best checkpoint; for the ensemble this is the text model.
  num::Checkpoint checkpoint;
  num::Checkpoint graph_checkpoint;  // ensemble only
};

/// Trains the configured model (or model pair for the ensemble variant) and
/// evaluates the selected parameters on valid and test. Epoch log lines go
/// to `progress` when non-null.
RunOutcome run_variant(const RunConfig& cfg, const Variant& variant, const Dataset& data, std::ostream* progress);

/// Entry point of the command-line tool. Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kgprompt::cli
