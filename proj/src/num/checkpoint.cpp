// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/num/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kgprompt::num {

namespace {

constexpr char kMagic[8] = {'K', 'G', 'P', 'C', 'K', 'P', 'T', '1'};

template <typename T>
constexpr DType dtype_of() {
  return sizeof(T) == 4 ? DType::kF32 : DType::kF64;
}

template <typename I>
void write_int(std::string& out, I v) {
  char buf[sizeof(I)];
  std::memcpy(buf, &v, sizeof(I));
  out.append(buf, sizeof(I));
}

class Reader {
 public:
  explicit Reader(const std::string& blob) : blob_(blob) {}

  template <typename I>
  I read_int() {
    I v;
    std::memcpy(&v, take(sizeof(I)), sizeof(I));
    return v;
  }
  std::string read_str(std::size_t n) { return std::string(take(n), n); }
  const char* take(std::size_t n) {
    if (pos_ + n > blob_.size()) throw std::runtime_error("checkpoint: truncated file");
    const char* p = blob_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == blob_.size(); }

 private:
  const std::string& blob_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename T>
void Checkpoint::put(const std::string& name, const Shape& shape, std::span<const T> values) {
  if (static_cast<std::int64_t>(values.size()) != numel(shape)) {
    throw ShapeError("checkpoint: " + name + " has " + std::to_string(values.size()) +
                     " values for shape " + shape_str(shape));
  }
  if (contains(name)) throw std::invalid_argument("checkpoint: duplicate array " + name);
  NamedArray a;
  a.name = name;
  a.dtype = dtype_of<T>();
  a.shape = shape;
  a.bytes.resize(values.size() * sizeof(T));
  if (!values.empty()) std::memcpy(a.bytes.data(), values.data(), a.bytes.size());
  arrays_.push_back(std::move(a));
}

template <typename T>
std::vector<T> Checkpoint::get(const std::string& name, const Shape& shape) const {
  for (const auto& a : arrays_) {
    if (a.name != name) continue;
    if (a.dtype != dtype_of<T>()) throw std::runtime_error("checkpoint: dtype mismatch for " + name);
    if (a.shape != shape) throw_shape_error(("checkpoint array " + name).c_str(), a.shape, shape);
    std::vector<T> out(a.bytes.size() / sizeof(T));
    if (!out.empty()) std::memcpy(out.data(), a.bytes.data(), a.bytes.size());
    return out;
  }
  throw std::runtime_error("checkpoint: missing array " + name);
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& a : arrays_) {
    if (a.name == name) return true;
  }
  return false;
}

std::string Checkpoint::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  write_int<std::uint64_t>(out, config_echo.size());
  out += config_echo;
  write_int<std::uint64_t>(out, arrays_.size());
  for (const auto& a : arrays_) {
    write_int<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    write_int<std::uint8_t>(out, static_cast<std::uint8_t>(a.dtype));
    write_int<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
    for (auto e : a.shape) write_int<std::uint64_t>(out, static_cast<std::uint64_t>(e));
    write_int<std::uint64_t>(out, a.bytes.size());
    out.append(a.bytes.data(), a.bytes.size());
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& blob) {
  Reader r(blob);
  if (std::memcmp(r.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  Checkpoint c;
  c.config_echo = r.read_str(r.read_int<std::uint64_t>());
  const auto count = r.read_int<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.read_str(r.read_int<std::uint32_t>());
    const auto dt = r.read_int<std::uint8_t>();
    if (dt != 1 && dt != 2) throw std::runtime_error("checkpoint: unknown dtype for " + a.name);
    a.dtype = static_cast<DType>(dt);
    const auto rank = r.read_int<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) a.shape.push_back(static_cast<std::int64_t>(r.read_int<std::uint64_t>()));
    const auto nbytes = r.read_int<std::uint64_t>();
    const std::size_t width = a.dtype == DType::kF32 ? 4 : 8;
    if (nbytes != static_cast<std::uint64_t>(numel(a.shape)) * width) {
      throw std::runtime_error("checkpoint: size mismatch for " + a.name);
    }
    const char* p = r.take(nbytes);
    a.bytes.assign(p, p + nbytes);
    c.arrays_.push_back(std::move(a));
  }
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot write " + path.string());
  const std::string blob = serialize();
  f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

template void Checkpoint::put<float>(const std::string&, const Shape&, std::span<const float>);
template void Checkpoint::put<double>(const std::string&, const Shape&, std::span<const double>);
template std::vector<float> Checkpoint::get<float>(const std::string&, const Shape&) const;
template std::vector<double> Checkpoint::get<double>(const std::string&, const Shape&) const;

}  // namespace kgprompt::num
