// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgprompt/kg/graph.hpp"
#include "kgprompt/lar/lar.hpp"
#include "kgprompt/model/model.hpp"
#include "kgprompt/num/checkpoint.hpp"
#include "kgprompt/num/params.hpp"
#include "kgprompt/train/losses.hpp"

namespace kgprompt::train {

enum class AlphaUnit { kStep, kEpoch };

struct TrainConfig {
  std::uint64_t seed = 1;
  int batch_size = 32;
  int eval_batch_size = 64;
  int epochs = 200;
  int patience = 0;       // stop after this many epochs without improvement; 0 disables
  std::int64_t max_steps = 0;  // 0 = no step cap
  double label_smoothing = 0.1;
  SmoothingNormalizer ls_normalizer = SmoothingNormalizer::kVocab;
  double alpha = 0.1;
  double alpha_step = 1e-5;
  AlphaUnit alpha_unit = AlphaUnit::kStep;
  lar::LarConfig lar;
  num::AdamWConfig adamw;
  bool timing = true;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean total loss per training query
  double valid_mrr = 0.0;
  double alpha_eff = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  double best_valid_mrr = -1.0;
  std::int64_t steps = 0;
  int nonfinite_grad_warnings = 0;
  num::Checkpoint best;

  // `epoch\ttrain_loss\tvalid_mrr\talpha_eff\tseconds` per epoch.
  std::string log_text() const;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minibatch AdamW training on both directions of the train split. After
/// every epoch the model is scored on the valid split; the parameters of the
/// best epoch (earliest on ties) are kept in the result and restored into
/// the model on return.
template <typename T>
TrainResult train(model::KgcModel<T>& m, const kg::KnowledgeGraph& graph, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace kgprompt::train
