// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/model/model.hpp"

#include <stdexcept>

#include "kgprompt/num/ops.hpp"
#include "kgprompt/util/random.hpp"

namespace kgprompt::model {

namespace {

enum Stream : std::uint64_t { kEmbeddings = 1, kEncoder, kPrompt, kExtractor, kScorer };

template <typename T>
num::Tensor<T> normal_table(std::int64_t rows, std::int64_t cols, double sd, util::Rng& rng) {
  std::vector<T> v(static_cast<std::size_t>(rows * cols));
  for (auto& x : v) x = static_cast<T>(sd * util::normal(rng));
  return num::Tensor<T>::from({rows, cols}, std::move(v));
}

}  // namespace

template <typename T>
KgcModel<T>::KgcModel(const ModelConfig& cfg, const kg::KnowledgeGraph& graph, std::uint64_t seed)
    : cfg_(cfg), num_entities_(graph.num_entities()) {
  if (!graph.augmented()) throw std::logic_error("model requires an augmented graph");
  util::Rng emb_rng = util::derive_rng(seed, kEmbeddings);
  entities_ = params_.add("embed.entities", normal_table<T>(graph.num_entities(), cfg.embed_dim, cfg.embed_init_std, emb_rng));
  relations_ = params_.add("embed.relations", normal_table<T>(graph.num_relations(), cfg.embed_dim, cfg.embed_init_std, emb_rng));

  if (!cfg.graph_only) {
    vocab_ = text::Vocabulary::build(graph);
    tokenizer_.emplace(graph, vocab_, cfg.encoder.max_text_len);
    util::Rng enc_rng = util::derive_rng(seed, kEncoder);
    encoder_ = std::make_unique<Encoder<T>>(cfg.encoder, vocab_.size(), enc_rng, params_);
    encoder_->set_freeze(cfg.freeze);

    PromptConfig pc;
    pc.embed_dim = cfg.embed_dim;
    pc.hidden = cfg.prompt_hidden;
    pc.layers = cfg.encoder.layers;
    pc.width = cfg.encoder.hidden;
    pc.per_source = cfg.prompt_len;
    pc.mode = cfg.prompt_mode;
    pc.input_only_per_source = cfg.input_only_prompt_len;
    util::Rng prompt_rng = util::derive_rng(seed, kPrompt);
    generator_ = std::make_unique<PromptGenerator<T>>(pc, prompt_rng, params_);
    util::Rng ex_rng = util::derive_rng(seed, kExtractor);
    extractor_ = std::make_unique<Extractor<T>>(cfg.encoder.hidden, cfg.embed_dim, ex_rng, params_);
  } else if (cfg.scorer.kind == ScorerKind::kTextOnly) {
    throw std::invalid_argument("a graph-only model cannot use the text_only scorer");
  }
  util::Rng sc_rng = util::derive_rng(seed, kScorer);
  scorer_ = std::make_unique<Scorer<T>>(cfg.scorer, cfg.embed_dim, graph.num_entities(), cfg.encoder.hidden, sc_rng,
                                        params_);
}

template <typename T>
void KgcModel<T>::set_freeze(const FreezeSpec& spec) {
  if (encoder_) encoder_->set_freeze(spec);
  cfg_.freeze = spec;
}

template <typename T>
num::Tensor<T> KgcModel<T>::forward(std::span<const kg::Query> batch, ForwardTrace<T>* trace) const {
  using namespace num;
  std::vector<std::int64_t> heads, rels;
  for (const auto& q : batch) {
    heads.push_back(q.head);
    rels.push_back(q.relation);
  }
  auto e_head = gather_rows(entities_, heads);
  auto e_rel = gather_rows(relations_, rels);
  if (cfg_.graph_only) {
    QueryRepresentation<T> repr{{}, {}, e_head, e_rel};
    if (trace) trace->repr = repr;
    return scorer_->score_all(repr, entities_);
  }

  const int s = generator_->slots_per_source();
  QueryRepresentation<T> repr;
  if (cfg_.strategy == text::Strategy::kJoint) {
    std::vector<text::QueryText> texts;
    for (const auto& q : batch) {
      texts.push_back(tokenizer_->build(q.head, q.relation, q.meta, cfg_.strategy, 2 * s).primary);
    }
    auto prompts = generator_->generate(e_head, e_rel);
    auto states = encoder_->forward(prompts, texts, trace ? &trace->encoder : nullptr);
    repr = extractor_->extract(states, s);
    if (trace) {
      trace->prompts = prompts;
      trace->texts = std::move(texts);
    }
  } else {
    std::vector<text::QueryText> ent_texts, rel_texts;
    for (const auto& q : batch) {
      auto t = tokenizer_->build(q.head, q.relation, q.meta, cfg_.strategy, s);
      ent_texts.push_back(std::move(t.primary));
      rel_texts.push_back(std::move(*t.relation));
    }
    auto halves = generator_->generate_halves(e_head, e_rel);
    auto ent_states = encoder_->forward(halves.entity, ent_texts, trace ? &trace->encoder : nullptr);
    auto rel_states = encoder_->forward(halves.relation, rel_texts, trace ? &trace->relation_encoder : nullptr);
    repr = extractor_->extract(ent_states, rel_states, s);
    if (trace) {
      trace->prompts = halves.entity;
      trace->relation_prompts = halves.relation;
      trace->texts = std::move(ent_texts);
    }
  }
  if (trace) trace->repr = repr;
  return scorer_->score_all(repr, entities_);
}

template <typename T>
void KgcModel<T>::save(num::Checkpoint& ckpt) const {
  for (const auto& p : params_.entries()) ckpt.put<T>(p.name, p.tensor.shape(), p.tensor.values());
}

template <typename T>
void KgcModel<T>::load(const num::Checkpoint& ckpt) {
  for (auto& p : params_.entries()) {
    auto v = ckpt.get<T>(p.name, p.tensor.shape());
    std::copy(v.begin(), v.end(), p.tensor.mutable_values().begin());
  }
}

template class KgcModel<float>;
template class KgcModel<double>;

}  // namespace kgprompt::model
