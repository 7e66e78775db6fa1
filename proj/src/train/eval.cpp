// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/train/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "kgprompt/num/ops.hpp"

namespace kgprompt::train {

namespace {

struct Accumulator {
  double rr = 0, h1 = 0, h3 = 0, h10 = 0;
  std::int64_t n = 0;
  void add(std::int64_t rank) {
    rr += 1.0 / static_cast<double>(rank);
    h1 += rank <= 1;
    h3 += rank <= 3;
    h10 += rank <= 10;
    ++n;
  }
  Metrics finish() const {
    Metrics m;
    m.count = n;
    if (n == 0) return m;
    const auto d = static_cast<double>(n);
    m.mrr = rr / d;
    m.hits1 = h1 / d;
    m.hits3 = h3 / d;
    m.hits10 = h10 / d;
    return m;
  }
};

void write_metrics(std::string& out, const Metrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "mrr = %.10f\nhits1 = %.10f\nhits3 = %.10f\nhits10 = %.10f\ncount = %lld\n", m.mrr,
                m.hits1, m.hits3, m.hits10, static_cast<long long>(m.count));
  out += buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string EvalReport::to_text() const {
  std::string out;
  write_metrics(out, all);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "encoder_forwards = %lld\nwall_seconds = %.3f\n",
                static_cast<long long>(encoder_forwards), wall_seconds);
  out += buf;
  out += "\n[forward]\n";
  write_metrics(out, forward);
  out += "\n[inverse]\n";
  write_metrics(out, inverse);
  return out;
}

std::int64_t filtered_rank(std::span<const double> scores, int target, std::span<const int> known) {
  const double ts = scores[static_cast<std::size_t>(target)];
  std::int64_t rank = 1;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (static_cast<int>(e) == target) continue;
    if (scores[e] < ts) continue;
    if (std::binary_search(known.begin(), known.end(), static_cast<int>(e))) continue;
    ++rank;
  }
  return rank;
}

EvalReport evaluate_queries(const BatchScoreFn& score, std::span<const kg::Query> queries,
                            const kg::FilterIndex& filter, int num_entities, int batch_size) {
  if (queries.empty()) throw std::invalid_argument("evaluate: split has no queries");
  if (batch_size < 1) throw std::invalid_argument("evaluate: batch size must be positive");
  Accumulator all, fwd, inv;
  for (std::size_t start = 0; start < queries.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(queries.size(), start + static_cast<std::size_t>(batch_size));
    auto batch = queries.subspan(start, end - start);
    const auto scores = score(batch);
    if (scores.size() != batch.size() * static_cast<std::size_t>(num_entities)) {
      throw std::logic_error("evaluate: score function returned the wrong number of entries");
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& q = batch[i];
      std::span<const double> row(scores.data() + i * static_cast<std::size_t>(num_entities),
                                  static_cast<std::size_t>(num_entities));
      const auto rank = filtered_rank(row, q.tail, filter.candidates(q.head, q.relation, q.meta));
      all.add(rank);
      (q.direction == kg::Direction::kForward ? fwd : inv).add(rank);
    }
  }
  EvalReport r;
  r.all = all.finish();
  r.forward = fwd.finish();
  r.inverse = inv.finish();
  return r;
}

template <typename T>
BatchScoreFn model_score_fn(const model::KgcModel<T>& m) {
  return [&m](std::span<const kg::Query> batch) {
    num::NoGradGuard ng;
    auto s = m.forward(batch);
    return std::vector<double>(s.values().begin(), s.values().end());
  };
}

BatchScoreFn averaged_softmax_fn(BatchScoreFn a, BatchScoreFn b, int num_entities) {
  return [a = std::move(a), b = std::move(b), num_entities](std::span<const kg::Query> batch) {
    auto sa = a(batch);
    auto sb = b(batch);
    if (sa.size() != sb.size()) throw std::invalid_argument("ensemble: models disagree on the entity space");
    const auto rows = static_cast<std::int64_t>(batch.size());
    auto pa = num::softmax(num::Tensor<double>::from({rows, num_entities}, std::move(sa)));
    auto pb = num::softmax(num::Tensor<double>::from({rows, num_entities}, std::move(sb)));
    std::vector<double> out(pa.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (pa.values()[i] + pb.values()[i]);
    return out;
  };
}

template <typename T>
EvalReport evaluate_filtered(const model::KgcModel<T>& m, const kg::KnowledgeGraph& graph,
                             const kg::FilterIndex& filter, kg::Split split, int batch_size, bool timing) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto before = m.encoder_forwards();
  const auto queries = graph.queries(split);
  auto r = evaluate_queries(model_score_fn(m), queries, filter, graph.num_entities(), batch_size);
  r.encoder_forwards = m.encoder_forwards() - before;
  r.wall_seconds = timing ? seconds_since(t0) : 0.0;
  return r;
}

template <typename T>
EvalReport ensemble_evaluate(const model::KgcModel<T>& graph_model, const model::KgcModel<T>& text_model,
                             const kg::KnowledgeGraph& graph, const kg::FilterIndex& filter, kg::Split split,
                             int batch_size, bool timing) {
  if (graph_model.num_entities() != graph.num_entities() || text_model.num_entities() != graph.num_entities()) {
    throw std::invalid_argument("ensemble: model entity counts do not match the graph");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto before = graph_model.encoder_forwards() + text_model.encoder_forwards();
  const auto queries = graph.queries(split);
  auto fn = averaged_softmax_fn(model_score_fn(graph_model), model_score_fn(text_model), graph.num_entities());
  auto r = evaluate_queries(fn, queries, filter, graph.num_entities(), batch_size);
  r.encoder_forwards = graph_model.encoder_forwards() + text_model.encoder_forwards() - before;
  r.wall_seconds = timing ? seconds_since(t0) : 0.0;
  return r;
}

#define KGPROMPT_INSTANTIATE_EVAL(T)                                                                         \
  template BatchScoreFn model_score_fn(const model::KgcModel<T>&);                                          \
  template EvalReport evaluate_filtered(const model::KgcModel<T>&, const kg::KnowledgeGraph&,               \
                                        const kg::FilterIndex&, kg::Split, int, bool);                      \
  template EvalReport ensemble_evaluate(const model::KgcModel<T>&, const model::KgcModel<T>&,               \
                                        const kg::KnowledgeGraph&, const kg::FilterIndex&, kg::Split, int, \
                                        bool);

KGPROMPT_INSTANTIATE_EVAL(float)
KGPROMPT_INSTANTIATE_EVAL(double)

#undef KGPROMPT_INSTANTIATE_EVAL

}  // namespace kgprompt::train
