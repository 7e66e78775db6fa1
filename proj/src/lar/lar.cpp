// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/lar/lar.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "kgprompt/num/ops.hpp"
#include "kgprompt/text/vocab.hpp"

namespace kgprompt::lar {

Source parse_source(std::string_view s) {
  if (s == "keyword") return Source::kKeyword;
  if (s == "random") return Source::kRandom;
  throw std::invalid_argument("unknown lar source '" + std::string(s) + "' (want keyword or random)");
}

SignMode parse_sign_mode(std::string_view s) {
  if (s == "corrected") return SignMode::kCorrected;
  if (s == "as_written") return SignMode::kAsWritten;
  throw std::invalid_argument("unknown lar sign mode '" + std::string(s) + "' (want corrected or as_written)");
}

LarIndex LarIndex::build(const kg::KnowledgeGraph& graph, double df_max, int min_token_len) {
  const int n = graph.num_entities();
  std::vector<std::set<std::string>> raw(static_cast<std::size_t>(n));
  std::map<std::string, std::vector<int>> postings;
  for (int e = 0; e < n; ++e) {
    const auto& t = graph.entity_text(e);
    for (const auto& tok : text::tokenize(t.name + " " + t.description)) {
      if (static_cast<int>(tok.size()) < min_token_len) continue;
      if (!std::all_of(tok.begin(), tok.end(), [](char c) { return c >= 'a' && c <= 'z'; })) continue;
      if (raw[static_cast<std::size_t>(e)].insert(tok).second) postings[tok].push_back(e);
    }
  }
  LarIndex idx;
  idx.tokens_.resize(static_cast<std::size_t>(n));
  std::vector<std::set<int>> cand(static_cast<std::size_t>(n));
  for (const auto& [tok, ents] : postings) {
    if (static_cast<double>(ents.size()) > df_max * n) continue;
    for (int e : ents) {
      idx.tokens_[static_cast<std::size_t>(e)].push_back(tok);
      for (int o : ents) {
        if (o != e) cand[static_cast<std::size_t>(e)].insert(o);
      }
    }
  }
  for (auto& c : cand) idx.candidates_.emplace_back(c.begin(), c.end());
  return idx;
}

std::string LarIndex::dump() const {
  std::string out;
  for (int e = 0; e < num_entities(); ++e) {
    out += std::to_string(e) + "\t";
    const auto& c = candidates(e);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(c[i]);
    }
    out += "\n";
  }
  return out;
}

LarSample sample_lar(const LarIndex& index, int target, int n, Source source, util::Rng& rng,
                     std::span<const int> exclude) {
  if (n < 1) throw std::invalid_argument("sample_lar: n must be positive");
  auto excluded = [&](int e) { return e == target || std::binary_search(exclude.begin(), exclude.end(), e); };
  LarSample out;
  if (source == Source::kKeyword) {
    std::vector<int> pool;
    for (int c : index.candidates(target)) {
      if (!excluded(c)) pool.push_back(c);
    }
    const int take = std::min<int>(n, static_cast<int>(pool.size()));
    for (int i = 0; i < take; ++i) {
      const auto j = i + static_cast<std::size_t>(util::uniform_below(rng, pool.size() - static_cast<std::size_t>(i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
      out.ids.push_back(pool[static_cast<std::size_t>(i)]);
    }
    out.keyword_count = take;
  }
  if (static_cast<int>(out.ids.size()) < n) {
    std::vector<int> rest;
    for (int e = 0; e < index.num_entities(); ++e) {
      if (!excluded(e) && std::find(out.ids.begin(), out.ids.end(), e) == out.ids.end()) rest.push_back(e);
    }
    const auto need = static_cast<std::size_t>(n) - out.ids.size();
    if (rest.size() < need) {
      throw std::invalid_argument("sample_lar: only " + std::to_string(out.ids.size() + rest.size()) +
                                  " eligible entities for " + std::to_string(n) + " samples");
    }
    for (std::size_t i = 0; i < need; ++i) {
      const auto j = i + static_cast<std::size_t>(util::uniform_below(rng, rest.size() - i));
      std::swap(rest[i], rest[j]);
      out.ids.push_back(rest[i]);
    }
  }
  return out;
}

template <typename T>
num::Tensor<T> lar_loss(const num::Tensor<T>& f_true, const num::Tensor<T>& f_adv, T margin, SignMode mode) {
  if (f_adv.rank() != 2 || f_true.rank() != 1 || f_true.dim(0) != f_adv.dim(0)) {
    num::throw_shape_error("lar_loss", f_true.shape(), f_adv.shape());
  }
  auto adv = num::mean_range(f_adv, 1, 0, f_adv.dim(1));
  auto gap = mode == SignMode::kCorrected ? num::sub(adv, f_true) : num::sub(f_true, adv);
  return num::relu(num::add_scalar(gap, margin));
}

template num::Tensor<float> lar_loss(const num::Tensor<float>&, const num::Tensor<float>&, float, SignMode);
template num::Tensor<double> lar_loss(const num::Tensor<double>&, const num::Tensor<double>&, double, SignMode);

}  // namespace kgprompt::lar
