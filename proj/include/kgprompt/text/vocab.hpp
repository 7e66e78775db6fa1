// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgprompt/kg/graph.hpp"

namespace kgprompt::text {

inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kSep = 2;

// Lowercases ASCII and splits on whitespace and ASCII punctuation. Bytes
// outside ASCII are kept inside tokens.
std::vector<std::string> tokenize(std::string_view s);

class Vocabulary {
 public:
  Vocabulary();

  // Specials first, then tokens in first-appearance order over entity text
  // (by id), relation text including inverses, and timestamps.
  static Vocabulary build(const kg::KnowledgeGraph& graph);

  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  std::vector<int> encode(std::string_view s) const;

  // `token\tid` per line.
  std::string dump() const;

 private:
  int add(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

enum class Strategy { kJoint, kSeparated };

/// Token sequence for one encoder pass. The encoder prepends `prompt_slots`
/// prompt positions ahead of `tokens`.
struct QueryText {
  std::vector<int> tokens;
  int prompt_slots = 0;
  int length() const { return prompt_slots + static_cast<int>(tokens.size()); }
};

struct QueryTokens {
  QueryText primary;                  // joint text, or the entity text when separated
  std::optional<QueryText> relation;  // separated strategy only
};

/// Builds encoder inputs from the text table. Joint text is
/// name(h) desc(h) [SEP] name(r) [date]; when the sequence exceeds
/// `max_text_len` the description is cut first.
class QueryTokenizer {
 public:
  QueryTokenizer(const kg::KnowledgeGraph& graph, const Vocabulary& vocab, int max_text_len);

  QueryTokens build(int head, int relation, int meta, Strategy strategy, int prompt_slots) const;
  int max_text_len() const { return max_len_; }

 private:
  std::vector<std::vector<int>> ent_name_, ent_desc_, rel_name_, stamp_;
  int max_len_;
};

}  // namespace kgprompt::text
