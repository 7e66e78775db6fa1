// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Portable sampling helpers over std::mt19937_64. The standard distributions
// are implementation-defined, so anything that must reproduce bit-for-bit
// across toolchains goes through these instead.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace kgprompt::util {

using Rng = std::mt19937_64;

// Uniform integer in [0, n) by rejection; n must be positive.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  // Draws below 2^64 mod n would bias the low residues.
  const std::uint64_t threshold = (0 - n) % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x < threshold);
  return x % n;
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Standard normal via Box-Muller; consumes two draws per sample.
inline double normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

// Independent stream for a named purpose derived from a base seed.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace kgprompt::util
