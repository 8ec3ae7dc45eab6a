// Copyright 2026 The Triple-GAN Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tgan/tensor.hpp"

// Layout: "TGAN", u32 version, u32 count, then per entry u16 name length,
// name bytes, u8 dtype (0 f32, 1 f64), u8 rank, rank × u32 dims, values;
// trailing u32 CRC-32 of everything before it. All integers little-endian.
namespace tgan::ckpt {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr std::uint32_t kVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Entry {
  std::string name;
  Tensor tensor;
};

namespace detail {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(std::span<const Entry> entries) {
  std::vector<std::uint8_t> out{'T', 'G', 'A', 'N'};
  detail::put<std::uint32_t>(out, kVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > 0xFFFF) throw CheckpointError("entry name too long: " + e.name.substr(0, 32));
    if (e.tensor.rank() > 0xFF) throw CheckpointError("tensor rank too large: " + e.name);
    detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.tensor.dtype()));
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.tensor.rank()));
    for (std::size_t d : e.tensor.shape()) detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : e.tensor.data()) {
      if (e.tensor.dtype() == Dtype::f32) detail::put<float>(out, static_cast<float>(v));
      else detail::put<double>(out, v);
    }
  }
  detail::put<std::uint32_t>(out, detail::crc(out));
  return out;
}

inline std::vector<Entry> decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw CheckpointError("checkpoint too short");
  const auto body = bytes.first(bytes.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 4);
  if (detail::crc(body) != stored) throw CheckpointError("checkpoint CRC mismatch");
  detail::Reader r(body);
  if (r.get_string(4) != "TGAN") throw CheckpointError("bad checkpoint magic");
  if (const auto v = r.get<std::uint32_t>(); v != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(v));
  const auto count = r.get<std::uint32_t>();
  std::vector<Entry> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = r.get_string(r.get<std::uint16_t>());
    const auto code = r.get<std::uint8_t>();
    if (code > 1) throw CheckpointError("bad dtype code in entry " + e.name);
    const auto dtype = static_cast<Dtype>(code);
    Shape shape(r.get<std::uint8_t>());
    for (auto& d : shape) d = r.get<std::uint32_t>();
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = dtype == Dtype::f32 ? static_cast<double>(r.get<float>()) : r.get<double>();
    e.tensor = Tensor(std::move(shape), std::move(values), dtype);
    out.push_back(std::move(e));
  }
  if (r.pos() != body.size()) throw CheckpointError("trailing bytes after last entry");
  return out;
}

inline void save(const std::filesystem::path& path, std::span<const Entry> entries) {
  const auto bytes = encode(entries);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("write failed: " + path.string());
}

inline std::vector<Entry> load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

inline const Entry& find(std::span<const Entry> entries, const std::string& name) {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw CheckpointError("checkpoint has no entry '" + name + "'");
}

/// Text stored as one f32 value per byte.
inline Tensor text_tensor(const std::string& s) {
  std::vector<double> v;
  for (unsigned char ch : s) v.push_back(ch);
  if (v.empty()) v.push_back(0.0);
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v), Dtype::f32);
}

inline std::string tensor_text(const Tensor& t) {
  std::string s;
  for (double v : t.data())
    if (v != 0.0) s.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  return s;
}

/// u64 split into two exact u32 halves.
inline Tensor u64_tensor(std::span<const std::uint64_t> values) {
  std::vector<double> v;
  for (std::uint64_t x : values) {
    v.push_back(static_cast<double>(x >> 32));
    v.push_back(static_cast<double>(x & 0xFFFFFFFFULL));
  }
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

inline std::vector<std::uint64_t> tensor_u64(const Tensor& t) {
  if (t.size() % 2) throw CheckpointError("u64 tensor has odd length");
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < t.size(); i += 2)
    out.push_back((static_cast<std::uint64_t>(t[i]) << 32) | static_cast<std::uint64_t>(t[i + 1]));
  return out;
}

}  // namespace tgan::ckpt
