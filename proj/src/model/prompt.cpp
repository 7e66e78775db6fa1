// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/model/prompt.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kgprompt/num/ops.hpp"

namespace kgprompt::model {

namespace {

template <typename T>
num::Tensor<T> scaled_normal(std::int64_t rows, std::int64_t cols, util::Rng& rng) {
  const double sd = 1.0 / std::sqrt(static_cast<double>(rows));
  std::vector<T> v(static_cast<std::size_t>(rows * cols));
  for (auto& x : v) x = static_cast<T>(sd * util::normal(rng));
  return num::Tensor<T>::from({rows, cols}, std::move(v));
}

std::int64_t output_width(const PromptConfig& cfg) {
  const int slots = cfg.mode == PromptMode::kLayerwise ? cfg.per_source
                    : cfg.input_only_per_source > 0     ? cfg.input_only_per_source
                                                        : cfg.layers * cfg.per_source;
  const int emitted = cfg.mode == PromptMode::kLayerwise ? cfg.layers : 1;
  return static_cast<std::int64_t>(emitted) * slots * cfg.width;
}

}  // namespace

std::int64_t prompt_parameter_count(const PromptConfig& cfg) {
  return 2 * (static_cast<std::int64_t>(cfg.embed_dim) * cfg.hidden + cfg.hidden * output_width(cfg));
}

template <typename T>
PromptGenerator<T>::PromptGenerator(const PromptConfig& cfg, util::Rng& rng, num::ParameterGroup<T>& group)
    : cfg_(cfg) {
  if (cfg.per_source < 1) throw std::invalid_argument("prompt_len must be at least 1 slot per source");
  if (cfg.embed_dim < 1 || cfg.hidden < 1 || cfg.layers < 1 || cfg.width < 1) {
    throw std::invalid_argument("prompt generator: widths and layer count must be positive");
  }
  if (cfg.mode == PromptMode::kLayerwise) {
    slots_ = cfg.per_source;
    emitted_ = cfg.layers;
  } else {
    slots_ = cfg.input_only_per_source > 0 ? cfg.input_only_per_source : cfg.layers * cfg.per_source;
    emitted_ = 1;
    PromptConfig layerwise = cfg;
    layerwise.mode = PromptMode::kLayerwise;
    const auto want = static_cast<double>(prompt_parameter_count(layerwise));
    const auto have = static_cast<double>(prompt_parameter_count(cfg));
    if (std::abs(have - want) > 0.05 * want) {
      throw std::invalid_argument("input-only prompt length k'=" + std::to_string(2 * slots_) +
                                  " does not match the layer-wise parameter count within 5%; use k'=" +
                                  std::to_string(2 * cfg.layers * cfg.per_source));
    }
  }
  const std::int64_t out = static_cast<std::int64_t>(emitted_) * slots_ * cfg.width;
  ent_in_ = group.add("prompt.entity.w_in", scaled_normal<T>(cfg.embed_dim, cfg.hidden, rng));
  ent_out_ = group.add("prompt.entity.w_out", scaled_normal<T>(cfg.hidden, out, rng));
  rel_in_ = group.add("prompt.relation.w_in", scaled_normal<T>(cfg.embed_dim, cfg.hidden, rng));
  rel_out_ = group.add("prompt.relation.w_out", scaled_normal<T>(cfg.hidden, out, rng));
}

template <typename T>
num::Tensor<T> PromptGenerator<T>::map(const num::Tensor<T>& x, const num::Tensor<T>& w_in,
                                       const num::Tensor<T>& w_out) const {
  if (x.rank() != 2 || x.dim(1) != cfg_.embed_dim) {
    num::throw_shape_error("prompt generator input", x.shape(), {x.rank() ? x.dim(0) : 0, cfg_.embed_dim});
  }
  return num::matmul(num::relu(num::matmul(x, w_in)), w_out);
}

template <typename T>
std::vector<num::Tensor<T>> PromptGenerator<T>::split_layers(const num::Tensor<T>& flat) const {
  const std::int64_t b = flat.dim(0);
  auto blocks = num::reshape(flat, {b, emitted_, static_cast<std::int64_t>(slots_) * cfg_.width});
  std::vector<num::Tensor<T>> out;
  for (int j = 0; j < emitted_; ++j) {
    out.push_back(num::reshape(num::slice(blocks, 1, j, j + 1), {b, slots_, cfg_.width}));
  }
  return out;
}

template <typename T>
PromptHalves<T> PromptGenerator<T>::generate_halves(const num::Tensor<T>& e_head, const num::Tensor<T>& e_rel) const {
  return {split_layers(map(e_head, ent_in_, ent_out_)), split_layers(map(e_rel, rel_in_, rel_out_))};
}

template <typename T>
std::vector<num::Tensor<T>> PromptGenerator<T>::generate(const num::Tensor<T>& e_head,
                                                         const num::Tensor<T>& e_rel) const {
  auto halves = generate_halves(e_head, e_rel);
  std::vector<num::Tensor<T>> out;
  for (std::size_t j = 0; j < halves.entity.size(); ++j) {
    out.push_back(num::concat<T>({halves.entity[j], halves.relation[j]}, 1));
  }
  return out;
}

template <typename T>
Extractor<T>::Extractor(int width, int embed_dim, util::Rng& rng, num::ParameterGroup<T>& group) {
  u_head_ = group.add("extract.u_head", scaled_normal<T>(width, embed_dim, rng));
  u_rel_ = group.add("extract.u_rel", scaled_normal<T>(width, embed_dim, rng));
}

template <typename T>
QueryRepresentation<T> Extractor<T>::project(num::Tensor<T> zh, num::Tensor<T> zr) const {
  QueryRepresentation<T> q;
  q.head = num::matmul(zh, u_head_);
  q.rel = num::matmul(zr, u_rel_);
  q.z_head = std::move(zh);
  q.z_rel = std::move(zr);
  return q;
}

template <typename T>
QueryRepresentation<T> Extractor<T>::extract(const num::Tensor<T>& states, int s) const {
  if (states.rank() != 3 || states.dim(1) < 2 * s) {
    throw num::ShapeError("extract: states " + num::shape_str(states.shape()) + " hold fewer than " +
                          std::to_string(2 * s) + " prompt slots");
  }
  return project(num::mean_range(states, 1, 0, s), num::mean_range(states, 1, s, 2 * s));
}

template <typename T>
QueryRepresentation<T> Extractor<T>::extract(const num::Tensor<T>& entity_states,
                                             const num::Tensor<T>& relation_states, int s) const {
  return project(num::mean_range(entity_states, 1, 0, s), num::mean_range(relation_states, 1, 0, s));
}

template class PromptGenerator<float>;
template class PromptGenerator<double>;
template class Extractor<float>;
template class Extractor<double>;

}  // namespace kgprompt::model
