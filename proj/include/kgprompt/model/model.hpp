// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>

#include "kgprompt/kg/graph.hpp"
#include "kgprompt/model/encoder.hpp"
#include "kgprompt/model/prompt.hpp"
#include "kgprompt/model/scorers.hpp"
#include "kgprompt/num/checkpoint.hpp"
#include "kgprompt/text/vocab.hpp"

namespace kgprompt::model {

struct ModelConfig {
  // Graph-only models skip the encoder and score straight from the
  // embedding tables.
  bool graph_only = false;
  int embed_dim = 32;
  double embed_init_std = 0.01;
  int prompt_hidden = 128;
  int prompt_len = 2;  // per source
  int input_only_prompt_len = 0;
  PromptMode prompt_mode = PromptMode::kLayerwise;
  text::Strategy strategy = text::Strategy::kJoint;
  ScorerConfig scorer;
  EncoderConfig encoder;
  FreezeSpec freeze;
};

template <typename T>
struct ForwardTrace {
  std::vector<num::Tensor<T>> prompts;            // as injected into the primary pass
  std::vector<num::Tensor<T>> relation_prompts;   // separated strategy only
  EncoderTrace<T> encoder;
  EncoderTrace<T> relation_encoder;
  std::vector<text::QueryText> texts;
  QueryRepresentation<T> repr;
};

/// Embedding tables, prompt generator, frozen encoder, extractor and scorer
/// wired into one scoring function over all tail entities.
template <typename T>
class KgcModel {
 public:
  KgcModel(const ModelConfig& cfg, const kg::KnowledgeGraph& graph, std::uint64_t seed);

  // [B, |V|] tail scores.
  num::Tensor<T> forward(std::span<const kg::Query> batch, ForwardTrace<T>* trace = nullptr) const;

  num::ParameterGroup<T>& params() { return params_; }
  const num::ParameterGroup<T>& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  const text::Vocabulary& vocab() const { return vocab_; }
  std::int64_t encoder_forwards() const { return encoder_ ? encoder_->forward_count() : 0; }
  int num_entities() const { return num_entities_; }

  void set_freeze(const FreezeSpec& spec);
  const Encoder<T>* encoder() const { return encoder_.get(); }
  const PromptGenerator<T>* generator() const { return generator_.get(); }
  const Scorer<T>& scorer() const { return *scorer_; }
  const num::Tensor<T>& entity_table() const { return entities_; }
  const num::Tensor<T>& relation_table() const { return relations_; }

  void save(num::Checkpoint& ckpt) const;
  void load(const num::Checkpoint& ckpt);

 private:
  ModelConfig cfg_;
  int num_entities_;
  text::Vocabulary vocab_;
  std::optional<text::QueryTokenizer> tokenizer_;
  num::ParameterGroup<T> params_;
  num::Tensor<T> entities_, relations_;
  std::unique_ptr<Encoder<T>> encoder_;
  std::unique_ptr<PromptGenerator<T>> generator_;
  std::unique_ptr<Extractor<T>> extractor_;
  std::unique_ptr<Scorer<T>> scorer_;
};

extern template class KgcModel<float>;
extern template class KgcModel<double>;

}  // namespace kgprompt::model
