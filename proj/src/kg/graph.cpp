// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/kg/graph.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

namespace kgprompt::kg {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return c == ' ' || c == '\r' || c == '\n'; });
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string(), 0, "cannot open file");
  return in;
}

}  // namespace

DataError::DataError(const std::string& file, int line, const std::string& what)
    : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

bool is_valid_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  auto num = [&](std::size_t at, std::size_t len) {
    int v = 0;
    for (std::size_t i = at; i < at + len; ++i) v = v * 10 + (s[i] - '0');
    return v;
  };
  const std::chrono::year_month_day ymd{std::chrono::year{num(0, 4)},
                                        std::chrono::month{static_cast<unsigned>(num(5, 2))},
                                        std::chrono::day{static_cast<unsigned>(num(8, 2))}};
  return ymd.ok();
}

std::vector<RawFact> load_facts(const std::filesystem::path& path, bool temporal) {
  auto in = open_or_throw(path);
  std::vector<RawFact> facts;
  std::string line;
  int lineno = 0;
  const std::size_t want = temporal ? 4 : 3;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (is_blank(line)) continue;
    auto cols = split_tabs(line);
    if (cols.size() != want) {
      throw DataError(path.string(), lineno,
                      "expected " + std::to_string(want) + " tab-separated columns, found " +
                          std::to_string(cols.size()));
    }
    for (std::size_t i = 0; i < 3; ++i) {
      if (cols[i].empty()) throw DataError(path.string(), lineno, "empty id in column " + std::to_string(i + 1));
    }
    RawFact f{cols[0], cols[1], cols[2], std::nullopt, lineno};
    if (temporal) {
      if (!is_valid_date(cols[3])) {
        throw DataError(path.string(), lineno, "unparseable timestamp '" + cols[3] + "' (want YYYY-MM-DD)");
      }
      f.meta = cols[3];
    }
    facts.push_back(std::move(f));
  }
  return facts;
}

std::vector<TextRow> load_text_table(const std::filesystem::path& path, bool relation_table) {
  auto in = open_or_throw(path);
  std::vector<TextRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (is_blank(line)) continue;
    auto cols = split_tabs(line);
    const bool ok = relation_table ? (cols.size() == 2 || cols.size() == 3) : cols.size() == 3;
    if (!ok) {
      throw DataError(path.string(), lineno,
                      std::string("expected ") + (relation_table ? "id\\tname[\\tdescription]" : "id\\tname\\tdescription") +
                          ", found " + std::to_string(cols.size()) + " columns");
    }
    if (cols[0].empty()) throw DataError(path.string(), lineno, "empty id");
    rows.push_back({cols[0], {cols[1], cols.size() == 3 ? cols[2] : std::string()}});
  }
  return rows;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + std::string(s) + "' (want train, valid or test)");
}

int IdTable::intern(const std::string& key) {
  auto [it, inserted] = index_.emplace(key, static_cast<int>(keys_.size()));
  if (inserted) keys_.push_back(key);
  return it->second;
}

std::optional<int> IdTable::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

KnowledgeGraph KnowledgeGraph::load(const DatasetPaths& paths, bool temporal) {
  auto train = load_facts(paths.train, temporal);
  auto valid = load_facts(paths.valid, temporal);
  auto test = load_facts(paths.test, temporal);
  auto ent = load_text_table(paths.entity_text, false);
  std::vector<TextRow> rel;
  if (paths.relation_text) rel = load_text_table(*paths.relation_text, true);
  return build(train, valid, test, ent, rel, temporal,
               {paths.train.string(), paths.valid.string(), paths.test.string()});
}

KnowledgeGraph KnowledgeGraph::build(const std::vector<RawFact>& train, const std::vector<RawFact>& valid,
                                     const std::vector<RawFact>& test, const std::vector<TextRow>& entity_text,
                                     const std::vector<TextRow>& relation_text, bool temporal,
                                     const std::array<std::string, 3>& labels) {
  KnowledgeGraph g;
  g.temporal_ = temporal;
  IdTable stamps;

  auto convert = [&](const std::vector<RawFact>& raw, const std::string& split, bool must_exist) {
    std::vector<Fact> out;
    out.reserve(raw.size());
    for (const auto& r : raw) {
      if (must_exist) {
        for (const auto* e : {&r.head, &r.tail}) {
          if (!g.entities_.find(*e)) {
            throw DataError(split, r.line, "entity '" + *e + "' does not appear in train");
          }
        }
        if (!g.relations_.find(r.relation)) {
          throw DataError(split, r.line, "relation '" + r.relation + "' does not appear in train");
        }
      }
      if (temporal != r.meta.has_value()) {
        throw DataError(split, r.line, temporal ? "missing timestamp" : "unexpected timestamp");
      }
      Fact f;
      f.head = g.entities_.intern(r.head);
      f.relation = g.relations_.intern(r.relation);
      f.tail = g.entities_.intern(r.tail);
      f.meta = r.meta ? stamps.intern(*r.meta) : -1;
      out.push_back(f);
    }
    return out;
  };
  g.train_ = convert(train, labels[0], false);
  g.valid_ = convert(valid, labels[1], true);
  g.test_ = convert(test, labels[2], true);

  std::vector<std::optional<TextRecord>> etext;
  for (const auto& row : entity_text) {
    const int id = g.entities_.intern(row.id);
    if (static_cast<int>(etext.size()) <= id) etext.resize(static_cast<std::size_t>(id) + 1);
    etext[static_cast<std::size_t>(id)] = row.text;
  }
  std::vector<std::optional<TextRecord>> rtext;
  for (const auto& row : relation_text) {
    const int id = g.relations_.intern(row.id);
    if (static_cast<int>(rtext.size()) <= id) rtext.resize(static_cast<std::size_t>(id) + 1);
    rtext[static_cast<std::size_t>(id)] = row.text;
  }
  etext.resize(static_cast<std::size_t>(g.entities_.size()));
  rtext.resize(static_cast<std::size_t>(g.relations_.size()));
  for (int i = 0; i < g.entities_.size(); ++i) {
    auto& t = etext[static_cast<std::size_t>(i)];
    g.entity_text_.push_back(t ? *t : TextRecord{g.entities_.key(i), ""});
  }
  for (int i = 0; i < g.relations_.size(); ++i) {
    auto& t = rtext[static_cast<std::size_t>(i)];
    g.relation_text_.push_back(t ? *t : TextRecord{g.relations_.key(i), ""});
  }
  g.raw_relations_ = g.relations_.size();
  for (int i = 0; i < stamps.size(); ++i) g.timestamps_.push_back(stamps.key(i));
  return g;
}

int KnowledgeGraph::inverse(int relation) const {
  if (!augmented_) throw std::logic_error("inverse relations requested before augment_inverse");
  if (relation < 0 || relation >= 2 * raw_relations_) throw std::out_of_range("relation id out of range");
  return relation < raw_relations_ ? relation + raw_relations_ : relation - raw_relations_;
}

const std::vector<Fact>& KnowledgeGraph::facts(Split s) const {
  switch (s) {
    case Split::kTrain: return train_;
    case Split::kValid: return valid_;
    case Split::kTest: return test_;
  }
  throw std::invalid_argument("bad split");
}

std::vector<Query> KnowledgeGraph::queries(Split s) const {
  if (!augmented_) throw std::logic_error("queries require an augmented graph");
  const auto& fs = facts(s);
  std::vector<Query> out;
  out.reserve(fs.size() * 2);
  for (const auto& f : fs) {
    out.push_back({f.head, f.relation, f.tail, f.meta, Direction::kForward});
    out.push_back({f.tail, inverse(f.relation), f.head, f.meta, Direction::kInverse});
  }
  return out;
}

const std::string& KnowledgeGraph::relation_key(int id) const {
  if (id >= raw_relations_) return inverse_keys_.at(static_cast<std::size_t>(id - raw_relations_));
  return relations_.key(id);
}

const TextRecord& KnowledgeGraph::relation_text(int id) const {
  return relation_text_.at(static_cast<std::size_t>(id));
}

KnowledgeGraph augment_inverse(KnowledgeGraph graph) {
  if (graph.augmented_) throw std::logic_error("augment_inverse: graph is already augmented");
  for (int r = 0; r < graph.raw_relations_; ++r) {
    graph.inverse_keys_.push_back(graph.relations_.key(r) + "^-1");
    const auto& t = graph.relation_text_[static_cast<std::size_t>(r)];
    graph.relation_text_.push_back({"inverse " + t.name, t.description});
  }
  graph.augmented_ = true;
  return graph;
}

std::size_t FilterIndex::KeyHash::operator()(const Key& k) const noexcept {
  std::uint64_t h = static_cast<std::uint32_t>(k.head);
  h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(k.relation);
  h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(k.meta + 1);
  return static_cast<std::size_t>(h ^ (h >> 29));
}

const std::vector<int>& FilterIndex::candidates(int head, int relation, int meta) const {
  static const std::vector<int> kEmpty;
  auto it = map_.find(Key{head, relation, meta});
  return it == map_.end() ? kEmpty : it->second;
}

bool FilterIndex::contains(int head, int relation, int meta, int tail) const {
  const auto& c = candidates(head, relation, meta);
  return std::binary_search(c.begin(), c.end(), tail);
}

FilterIndex build_filter_index(const KnowledgeGraph& graph, const std::vector<Split>& splits) {
  if (!graph.augmented()) throw std::logic_error("build_filter_index requires an augmented graph");
  FilterIndex idx;
  for (auto s : splits) {
    for (const auto& f : graph.facts(s)) {
      idx.map_[{f.head, f.relation, f.meta}].push_back(f.tail);
      idx.map_[{f.tail, graph.inverse(f.relation), f.meta}].push_back(f.head);
    }
  }
  for (auto& [k, v] : idx.map_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return idx;
}

}  // namespace kgprompt::kg
