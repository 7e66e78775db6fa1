// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/model/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kgprompt/num/ops.hpp"

namespace kgprompt::model {

namespace {

template <typename T>
num::Tensor<T> normal_tensor(num::Shape shape, double stddev, util::Rng& rng) {
  std::vector<T> v(static_cast<std::size_t>(num::numel(shape)));
  for (auto& x : v) x = static_cast<T>(stddev * util::normal(rng));
  return num::Tensor<T>::from(std::move(shape), std::move(v));
}

template <typename T>
num::Tensor<T> filled(num::Shape shape, T value) {
  std::vector<T> v(static_cast<std::size_t>(num::numel(shape)), value);
  return num::Tensor<T>::from(std::move(shape), std::move(v));
}

}  // namespace

template <typename T>
Encoder<T>::Encoder(const EncoderConfig& cfg, int vocab_size, util::Rng& rng, num::ParameterGroup<T>& group)
    : cfg_(cfg), group_(&group) {
  if (cfg.layers < 1 || cfg.hidden < 1 || cfg.heads < 1 || cfg.ffn < 1) {
    throw std::invalid_argument("encoder: layers, hidden, heads and ffn must be positive");
  }
  if (cfg.hidden % cfg.heads != 0) {
    throw std::invalid_argument("encoder: hidden width " + std::to_string(cfg.hidden) + " is not divisible by " +
                                std::to_string(cfg.heads) + " heads");
  }
  const std::int64_t h = cfg.hidden, f = cfg.ffn;
  const double wstd = 1.0 / std::sqrt(static_cast<double>(h));
  const double fstd = 1.0 / std::sqrt(static_cast<double>(f));
  word_ = group.add("encoder.word_embeddings", normal_tensor<T>({vocab_size, h}, 1.0, rng));
  if (cfg.position_encoding) {
    pos_ = group.add("encoder.position_embeddings", normal_tensor<T>({cfg.max_text_len, h}, 0.5, rng));
  }
  for (int j = 0; j < cfg.layers; ++j) {
    const std::string p = "encoder.layer" + std::to_string(j) + ".";
    std::vector<std::string> names;
    auto add = [&](const std::string& n, num::Tensor<T> t) {
      names.push_back(p + n);
      return group.add(p + n, std::move(t));
    };
    Layer l;
    l.wq = add("attn.wq", normal_tensor<T>({h, h}, wstd, rng));
    l.bq = add("attn.bq", filled<T>({h}, T(0)));
    l.wk = add("attn.wk", normal_tensor<T>({h, h}, wstd, rng));
    l.bk = add("attn.bk", filled<T>({h}, T(0)));
    l.wv = add("attn.wv", normal_tensor<T>({h, h}, wstd, rng));
    l.bv = add("attn.bv", filled<T>({h}, T(0)));
    l.wo = add("attn.wo", normal_tensor<T>({h, h}, wstd, rng));
    l.bo = add("attn.bo", filled<T>({h}, T(0)));
    l.ln1_g = add("ln1.gain", filled<T>({h}, T(1)));
    l.ln1_b = add("ln1.bias", filled<T>({h}, T(0)));
    l.w1 = add("ffn.w1", normal_tensor<T>({h, f}, wstd, rng));
    l.b1 = add("ffn.b1", filled<T>({f}, T(0)));
    l.w2 = add("ffn.w2", normal_tensor<T>({f, h}, fstd, rng));
    l.b2 = add("ffn.b2", filled<T>({h}, T(0)));
    l.ln2_g = add("ln2.gain", filled<T>({h}, T(1)));
    l.ln2_b = add("ln2.bias", filled<T>({h}, T(0)));
    layers_.push_back(std::move(l));
    layer_names_.push_back(std::move(names));
  }
  set_freeze(FreezeSpec{});
}

template <typename T>
void Encoder<T>::set_freeze(const FreezeSpec& spec) {
  const int l = cfg_.layers;
  const int count = spec.count < 0 ? l : spec.count;
  if (count > l) {
    throw std::invalid_argument("freeze: cannot freeze " + std::to_string(count) + " of " + std::to_string(l) +
                                " layers");
  }
  for (int j = 0; j < l; ++j) {
    const bool frozen = spec.direction == FreezeDirection::kBottom ? j < count : j >= l - count;
    for (const auto& n : layer_names_[static_cast<std::size_t>(j)]) group_->set_trainable(n, !frozen);
  }
  group_->set_trainable("encoder.word_embeddings", !spec.word_embeddings);
  if (cfg_.position_encoding) group_->set_trainable("encoder.position_embeddings", !spec.word_embeddings);
}

template <typename T>
num::Tensor<T> Encoder<T>::run_layer(const Layer& l, const num::Tensor<T>& x,
                                     std::span<const std::int64_t> lengths) const {
  using namespace num;
  auto q = add_bias(matmul(x, l.wq), l.bq);
  auto k = add_bias(matmul(x, l.wk), l.bk);
  auto v = add_bias(matmul(x, l.wv), l.bv);
  auto a = add_bias(matmul(attention(q, k, v, cfg_.heads, lengths), l.wo), l.bo);
  auto x1 = layer_norm(add(x, a), l.ln1_g, l.ln1_b);
  auto f = add_bias(matmul(relu(add_bias(matmul(x1, l.w1), l.b1)), l.w2), l.b2);
  return layer_norm(add(x1, f), l.ln2_g, l.ln2_b);
}

template <typename T>
num::Tensor<T> Encoder<T>::forward(const std::vector<num::Tensor<T>>& prompts,
                                   std::span<const text::QueryText> batch, EncoderTrace<T>* trace) const {
  using namespace num;
  if (prompts.empty()) throw std::invalid_argument("encoder: no prompt tensor given");
  if (prompts.size() != 1 && static_cast<int>(prompts.size()) != cfg_.layers) {
    throw std::invalid_argument("encoder: expected 1 or " + std::to_string(cfg_.layers) + " prompt tensors, got " +
                                std::to_string(prompts.size()));
  }
  const auto nb = static_cast<std::int64_t>(batch.size());
  const std::int64_t h = cfg_.hidden;
  const std::int64_t k = prompts[0].rank() == 3 ? prompts[0].dim(1) : -1;
  for (const auto& p : prompts) {
    if (p.rank() != 3 || p.dim(0) != nb || p.dim(1) != k || p.dim(2) != h) {
      throw_shape_error("encoder prompts", p.shape(), {nb, k, h});
    }
  }
  std::int64_t tmax = 0;
  for (const auto& q : batch) {
    if (q.tokens.empty() || static_cast<int>(q.tokens.size()) > cfg_.max_text_len) {
      throw std::invalid_argument("encoder: text length " + std::to_string(q.tokens.size()) + " outside [1, " +
                                  std::to_string(cfg_.max_text_len) + "]");
    }
    tmax = std::max<std::int64_t>(tmax, static_cast<std::int64_t>(q.tokens.size()));
  }
  std::vector<std::int64_t> ids(static_cast<std::size_t>(nb * tmax), text::kPad);
  std::vector<std::int64_t> lengths(static_cast<std::size_t>(nb));
  for (std::int64_t b = 0; b < nb; ++b) {
    const auto& toks = batch[static_cast<std::size_t>(b)].tokens;
    for (std::size_t i = 0; i < toks.size(); ++i) ids[static_cast<std::size_t>(b * tmax) + i] = toks[i];
    lengths[static_cast<std::size_t>(b)] = k + static_cast<std::int64_t>(toks.size());
  }
  auto text = reshape(gather_rows(word_, ids), {nb, tmax, h});
  if (cfg_.position_encoding) {
    std::vector<std::int64_t> pos(static_cast<std::size_t>(nb * tmax));
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<std::int64_t>(i) % tmax;
    text = add(text, reshape(gather_rows(pos_, pos), {nb, tmax, h}));
  }
  auto x = concat<T>({prompts[0], text}, 1);
  for (int j = 0; j < cfg_.layers; ++j) {
    if (j > 0 && prompts.size() > 1) {
      x = concat<T>({prompts[static_cast<std::size_t>(j)], slice(x, 1, k, k + tmax)}, 1);
    }
    if (trace) trace->inputs.push_back(x);
    x = run_layer(layers_[static_cast<std::size_t>(j)], x, lengths);
  }
  forwards_ += nb;
  return x;
}

template class Encoder<float>;
template class Encoder<double>;

}  // namespace kgprompt::model
