// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgprompt::kg {

/// Input error carrying the offending file and 1-based line number.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& file, int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

struct RawFact {
  std::string head;
  std::string relation;
  std::string tail;
  std::optional<std::string> meta;
  int line = 0;
};

// Parses `head\trelation\ttail[\tYYYY-MM-DD]` lines. Blank lines are skipped.
std::vector<RawFact> load_facts(const std::filesystem::path& path, bool temporal);

// True for a real calendar date written as YYYY-MM-DD.
bool is_valid_date(std::string_view s);

struct Fact {
  int head = 0;
  int relation = 0;
  int tail = 0;
  int meta = -1;  // index into KnowledgeGraph::timestamps(), -1 when static

  friend bool operator==(const Fact&, const Fact&) = default;
};

struct TextRecord {
  std::string name;
  std::string description;
};

struct TextRow {
  std::string id;
  TextRecord text;
};

enum class Split { kTrain, kValid, kTest };
const char* split_name(Split s);
Split parse_split(std::string_view s);

enum class Direction { kForward, kInverse };

/// One link-prediction query (head, relation, ?, meta) with its gold tail.
struct Query {
  int head = 0;
  int relation = 0;
  int tail = 0;
  int meta = -1;
  Direction direction = Direction::kForward;
};

struct DatasetPaths {
  std::filesystem::path train;
  std::filesystem::path valid;
  std::filesystem::path test;
  std::filesystem::path entity_text;
  std::optional<std::filesystem::path> relation_text;
};

// Insertion-ordered string <-> dense id table.
class IdTable {
 public:
  int intern(const std::string& key);
  std::optional<int> find(std::string_view key) const;
  const std::string& key(int id) const { return keys_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(keys_.size()); }

 private:
  std::vector<std::string> keys_;
  std::unordered_map<std::string, int> index_;
};

class KnowledgeGraph {
 public:
  static KnowledgeGraph load(const DatasetPaths& paths, bool temporal);

  // Ids are assigned in first-appearance order over train, valid, test, then
  // the entity and relation text rows. Valid/test entities and relations
  // must also appear in train.
  static KnowledgeGraph build(const std::vector<RawFact>& train, const std::vector<RawFact>& valid,
                              const std::vector<RawFact>& test, const std::vector<TextRow>& entity_text,
                              const std::vector<TextRow>& relation_text, bool temporal,
                              const std::array<std::string, 3>& labels = {"train", "valid", "test"});

  int num_entities() const { return entities_.size(); }
  // Includes the generated inverses once augmented.
  int num_relations() const { return augmented_ ? 2 * raw_relations_ : raw_relations_; }
  int num_raw_relations() const { return raw_relations_; }
  bool augmented() const { return augmented_; }
  bool temporal() const { return temporal_; }

  // r <-> r^-1; an involution on the augmented id space.
  int inverse(int relation) const;

  const std::vector<Fact>& facts(Split s) const;
  // Both query directions for every fact of the split; needs augmentation.
  std::vector<Query> queries(Split s) const;

  const std::string& entity_key(int id) const { return entities_.key(id); }
  const std::string& relation_key(int id) const;
  std::optional<int> find_entity(std::string_view key) const { return entities_.find(key); }
  std::optional<int> find_relation(std::string_view key) const { return relations_.find(key); }

  const TextRecord& entity_text(int id) const { return entity_text_.at(static_cast<std::size_t>(id)); }
  const TextRecord& relation_text(int id) const;

  const std::vector<std::string>& timestamps() const { return timestamps_; }
  const std::string& timestamp(int meta) const { return timestamps_.at(static_cast<std::size_t>(meta)); }

  friend KnowledgeGraph augment_inverse(KnowledgeGraph graph);

 private:
  IdTable entities_;
  IdTable relations_;
  int raw_relations_ = 0;
  bool augmented_ = false;
  bool temporal_ = false;
  std::vector<Fact> train_, valid_, test_;
  std::vector<TextRecord> entity_text_;
  std::vector<TextRecord> relation_text_;  // 2x raw size once augmented
  std::vector<std::string> inverse_keys_;
  std::vector<std::string> timestamps_;
};

/// Adds r^-1 = r + |R| for every raw relation. Throws on a second call.
KnowledgeGraph augment_inverse(KnowledgeGraph graph);

std::vector<TextRow> load_text_table(const std::filesystem::path& path, bool relation_table);

/// Known-true tails per (head, relation, meta) over a set of splits, in both
/// query directions.
class FilterIndex {
 public:
  const std::vector<int>& candidates(int head, int relation, int meta = -1) const;
  bool contains(int head, int relation, int meta, int tail) const;
  std::size_t num_keys() const { return map_.size(); }

  friend FilterIndex build_filter_index(const KnowledgeGraph& graph, const std::vector<Split>& splits);

 private:
  struct Key {
    int head, relation, meta;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  std::unordered_map<Key, std::vector<int>, KeyHash> map_;
};

FilterIndex build_filter_index(const KnowledgeGraph& graph,
                               const std::vector<Split>& splits = {Split::kTrain, Split::kValid,
                                                                   Split::kTest});

}  // namespace kgprompt::kg
