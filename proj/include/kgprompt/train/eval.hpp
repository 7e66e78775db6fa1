// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kgprompt/kg/graph.hpp"
#include "kgprompt/model/model.hpp"

namespace kgprompt::train {

struct Metrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::int64_t count = 0;
};

struct EvalReport {
  Metrics all;
  Metrics forward;
  Metrics inverse;
  std::int64_t encoder_forwards = 0;
  double wall_seconds = 0.0;

  // `key = value` lines with [forward] and [inverse] sections.
  std::string to_text() const;
};

/// 1 + |scores strictly above the target| + |non-target ties|, counting only
/// entities outside `known` (sorted; the target itself is never filtered).
std::int64_t filtered_rank(std::span<const double> scores, int target, std::span<const int> known);

// Returns row-major [B, V] scores for a batch of queries.
using BatchScoreFn = std::function<std::vector<double>(std::span<const kg::Query>)>;

/// Ranks every query against the filter and aggregates metrics, also split
/// by query direction.
EvalReport evaluate_queries(const BatchScoreFn& score, std::span<const kg::Query> queries,
                            const kg::FilterIndex& filter, int num_entities, int batch_size);

template <typename T>
BatchScoreFn model_score_fn(const model::KgcModel<T>& m);

// Softmax of each model's scores, averaged per query.
BatchScoreFn averaged_softmax_fn(BatchScoreFn a, BatchScoreFn b, int num_entities);

/// Filtered evaluation of one model over both directions of a split. Wall
/// time is recorded only when `timing` is set.
template <typename T>
EvalReport evaluate_filtered(const model::KgcModel<T>& m, const kg::KnowledgeGraph& graph,
                             const kg::FilterIndex& filter, kg::Split split, int batch_size, bool timing = true);

/// Bagging baseline: averages the softmax of a graph-only model and a
/// text model per query, then ranks as evaluate_filtered does.
template <typename T>
EvalReport ensemble_evaluate(const model::KgcModel<T>& graph_model, const model::KgcModel<T>& text_model,
                             const kg::KnowledgeGraph& graph, const kg::FilterIndex& filter, kg::Split split,
                             int batch_size, bool timing = true);

}  // namespace kgprompt::train
