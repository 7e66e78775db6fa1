// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "kgprompt/train/eval.hpp"
#include "kgprompt/util/random.hpp"

namespace kgprompt::train {

namespace {

enum Stream : std::uint64_t { kShuffle = 11, kLar = 12 };

std::string describe_batch(const kg::KnowledgeGraph& g, std::span<const kg::Query> batch) {
  std::ostringstream os;
  for (const auto& q : batch) {
    os << "  " << g.entity_key(q.head) << '\t' << g.relation_key(q.relation) << '\t' << g.entity_key(q.tail);
    if (q.meta >= 0) os << '\t' << g.timestamp(q.meta);
    os << '\n';
  }
  return os.str();
}

}  // namespace

std::string TrainResult::log_text() const {
  std::string out;
  char buf[160];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%d\t%.8f\t%.8f\t%.8f\t%.3f\n", r.epoch, r.train_loss, r.valid_mrr, r.alpha_eff,
                  r.seconds);
    out += buf;
  }
  return out;
}

template <typename T>
TrainResult train(model::KgcModel<T>& m, const kg::KnowledgeGraph& graph, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (cfg.alpha < 0.0) throw std::invalid_argument("alpha must be non-negative");
  if (cfg.alpha > 0.0 && cfg.alpha_step <= 0.0) throw std::invalid_argument("alpha_step must be positive when alpha > 0");
  if (cfg.lar.samples < 1 || cfg.lar.margin < 0.0) throw std::invalid_argument("lar samples must be >= 1 and margin >= 0");

  const auto full_filter = kg::build_filter_index(graph);
  const auto train_filter = kg::build_filter_index(graph, {kg::Split::kTrain});
  const auto lar_index = lar::LarIndex::build(graph, cfg.lar.df_max, cfg.lar.min_token_len);
  auto queries = graph.queries(kg::Split::kTrain);
  util::Rng shuffle_rng = util::derive_rng(cfg.seed, kShuffle);
  util::Rng lar_rng = util::derive_rng(cfg.seed, kLar);
  const int n = cfg.lar.samples;

  TrainResult result;
  auto& group = m.params();
  std::int64_t step = 0;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    util::shuffle(std::span<kg::Query>(queries), shuffle_rng);
    double loss_sum = 0.0;
    double alpha_eff = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < queries.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      if (cfg.max_steps > 0 && step >= cfg.max_steps) break;
      const auto end = std::min(queries.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::span<const kg::Query> batch(queries.data() + start, end - start);
      alpha_eff = alpha_schedule(cfg.alpha_unit == AlphaUnit::kStep ? step : epoch - 1, cfg.alpha, cfg.alpha_step);

      std::vector<std::int64_t> targets, lar_ids;
      for (const auto& q : batch) {
        targets.push_back(q.tail);
        if (alpha_eff > 0.0) {
          const auto& known = train_filter.candidates(q.head, q.relation, q.meta);
          auto s = lar::sample_lar(lar_index, q.tail, n, cfg.lar.source, lar_rng, known);
          lar_ids.insert(lar_ids.end(), s.ids.begin(), s.ids.end());
        }
      }
      group.zero_grad();
      auto scores = m.forward(batch);
      auto parts = total_loss(scores, targets, lar_ids, n, cfg.label_smoothing, cfg.ls_normalizer, alpha_eff,
                              cfg.lar.margin, cfg.lar.sign);
      const double loss = static_cast<double>(parts.total.item());
      if (!std::isfinite(loss)) {
        throw NonFiniteLossError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                 std::to_string(step) + " (ce " + std::to_string(parts.ce) + ", lar " +
                                 std::to_string(parts.lar) + ", alpha_eff " + std::to_string(alpha_eff) +
                                 "); offending batch:\n" + describe_batch(graph, batch));
      }
      parts.total.backward();
      result.nonfinite_grad_warnings += num::adamw_step(group, cfg.adamw).skipped_nonfinite;
      loss_sum += loss;
      seen += batch.size();
      ++step;
    }
    group.zero_grad();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    rec.alpha_eff = alpha_eff;
    rec.valid_mrr = evaluate_filtered(m, graph, full_filter, kg::Split::kValid, cfg.eval_batch_size, false).all.mrr;
    rec.seconds = cfg.timing ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() : 0.0;
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.valid_mrr > result.best_valid_mrr) {
      result.best_valid_mrr = rec.valid_mrr;
      result.best_epoch = epoch;
      result.best = num::Checkpoint{};
      m.save(result.best);
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
    if (cfg.max_steps > 0 && step >= cfg.max_steps) break;
  }
  result.steps = step;
  if (result.best_epoch > 0) m.load(result.best);
  return result;
}

template TrainResult train(model::KgcModel<float>&, const kg::KnowledgeGraph&, const TrainConfig&,
                           const std::function<void(const EpochRecord&)>&);
template TrainResult train(model::KgcModel<double>&, const kg::KnowledgeGraph&, const TrainConfig&,
                           const std::function<void(const EpochRecord&)>&);

}  // namespace kgprompt::train
