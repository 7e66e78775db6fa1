// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Self-describing container of named arrays. Layout (little-endian):
//
//   "KGPCKPT1"
//   u64 config length, config bytes
//   u64 array count
//   per array: u32 name length, name, u8 dtype (1 = f32, 2 = f64),
//              u32 rank, u64 extents[rank], u64 byte count, raw values
//
// Values are stored as their exact bit patterns, so save/load round-trips
// are bit-exact.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kgprompt/num/tensor.hpp"

namespace kgprompt::num {

enum class DType : std::uint8_t { kF32 = 1, kF64 = 2 };

struct NamedArray {
  std::string name;
  DType dtype = DType::kF32;
  Shape shape;
  std::vector<char> bytes;
};

class Checkpoint {
 public:
  std::string config_echo;

  template <typename T>
  void put(const std::string& name, const Shape& shape, std::span<const T> values);

  // Throws when the array is missing or its shape or dtype disagrees.
  template <typename T>
  std::vector<T> get(const std::string& name, const Shape& shape) const;

  bool contains(const std::string& name) const;
  const std::vector<NamedArray>& arrays() const { return arrays_; }

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& blob);

 private:
  std::vector<NamedArray> arrays_;
};

extern template void Checkpoint::put<float>(const std::string&, const Shape&, std::span<const float>);
extern template void Checkpoint::put<double>(const std::string&, const Shape&, std::span<const double>);
extern template std::vector<float> Checkpoint::get<float>(const std::string&, const Shape&) const;
extern template std::vector<double> Checkpoint::get<double>(const std::string&, const Shape&) const;

}  // namespace kgprompt::num
