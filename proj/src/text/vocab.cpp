// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/text/vocab.hpp"

#include <algorithm>
#include <stdexcept>

namespace kgprompt::text {

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    const bool word = c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (word) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary::Vocabulary() {
  add("[PAD]");
  add("[UNK]");
  add("[SEP]");
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

Vocabulary Vocabulary::build(const kg::KnowledgeGraph& graph) {
  Vocabulary v;
  for (int e = 0; e < graph.num_entities(); ++e) {
    for (const auto& t : tokenize(graph.entity_text(e).name)) v.add(t);
    for (const auto& t : tokenize(graph.entity_text(e).description)) v.add(t);
  }
  for (int r = 0; r < graph.num_relations(); ++r) {
    for (const auto& t : tokenize(graph.relation_text(r).name)) v.add(t);
  }
  for (const auto& stamp : graph.timestamps()) {
    for (const auto& t : tokenize(stamp)) v.add(t);
  }
  return v;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(std::string_view s) const {
  std::vector<int> ids;
  for (const auto& t : tokenize(s)) ids.push_back(id(t));
  return ids;
}

std::string Vocabulary::dump() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) out += tokens_[i] + "\t" + std::to_string(i) + "\n";
  return out;
}

QueryTokenizer::QueryTokenizer(const kg::KnowledgeGraph& graph, const Vocabulary& vocab, int max_text_len)
    : max_len_(max_text_len) {
  if (max_text_len < 3) throw std::invalid_argument("max_text_len must be at least 3");
  for (int e = 0; e < graph.num_entities(); ++e) {
    ent_name_.push_back(vocab.encode(graph.entity_text(e).name));
    ent_desc_.push_back(vocab.encode(graph.entity_text(e).description));
  }
  for (int r = 0; r < graph.num_relations(); ++r) rel_name_.push_back(vocab.encode(graph.relation_text(r).name));
  for (const auto& s : graph.timestamps()) stamp_.push_back(vocab.encode(s));
}

QueryTokens QueryTokenizer::build(int head, int relation, int meta, Strategy strategy, int prompt_slots) const {
  const auto& name = ent_name_.at(static_cast<std::size_t>(head));
  const auto& desc = ent_desc_.at(static_cast<std::size_t>(head));
  const auto& rel = rel_name_.at(static_cast<std::size_t>(relation));
  static const std::vector<int> kNoStamp;
  const auto& stamp = meta >= 0 ? stamp_.at(static_cast<std::size_t>(meta)) : kNoStamp;

  auto finish = [&](std::vector<int> toks) {
    if (toks.empty()) toks.push_back(kUnk);
    if (static_cast<int>(toks.size()) > max_len_) toks.resize(static_cast<std::size_t>(max_len_));
    return QueryText{std::move(toks), prompt_slots};
  };
  auto entity_part = [&](std::size_t reserved) {
    std::vector<int> toks(name.begin(), name.end());
    const auto budget = static_cast<std::size_t>(max_len_);
    const std::size_t used = toks.size() + reserved;
    const std::size_t room = used >= budget ? 0 : budget - used;
    toks.insert(toks.end(), desc.begin(), desc.begin() + static_cast<std::ptrdiff_t>(std::min(room, desc.size())));
    return toks;
  };

  QueryTokens out;
  if (strategy == Strategy::kJoint) {
    auto toks = entity_part(1 + rel.size() + stamp.size());
    if (toks.empty()) toks.push_back(kUnk);
    toks.push_back(kSep);
    toks.insert(toks.end(), rel.begin(), rel.end());
    toks.insert(toks.end(), stamp.begin(), stamp.end());
    out.primary = finish(std::move(toks));
  } else {
    out.primary = finish(entity_part(0));
    std::vector<int> rtoks(rel.begin(), rel.end());
    rtoks.insert(rtoks.end(), stamp.begin(), stamp.end());
    out.relation = finish(std::move(rtoks));
  }
  return out;
}

}  // namespace kgprompt::text
