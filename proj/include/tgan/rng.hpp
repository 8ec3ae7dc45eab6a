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

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>

namespace tgan {

namespace detail {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based random stream. Draw i of stream (seed, id) is a pure function
/// of (seed, id, i), so the full state is three integers and streams never
/// interfere with each other.
class RngStream {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  RngStream() = default;
  RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0) noexcept
      : seed_(seed), stream_(stream), counter_(counter), key_(make_key(seed, stream)) {}
  RngStream(std::uint64_t seed, std::string_view name) noexcept
      : RngStream(seed, detail::fnv1a(name)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// Independent child stream; does not advance this one.
  RngStream derive(std::string_view name) const noexcept {
    return RngStream(seed_, detail::mix64(stream_ ^ detail::fnv1a(name)));
  }
  RngStream derive(std::uint64_t index) const noexcept {
    return RngStream(seed_, detail::mix64(stream_ + (index + 1) * kGamma));
  }

  std::uint64_t next_u64() noexcept { return detail::mix64(key_ + (++counter_) * kGamma); }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on [0, n).
  std::uint64_t uniform_int(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Index drawn from an unnormalized nonnegative weight vector.
  std::size_t categorical(std::span<const double> weights) noexcept {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (u < weights[i]) return i;
      u -= weights[i];
    }
    // Rounding can leave u marginally above the last weight.
    for (std::size_t i = weights.size(); i-- > 0;)
      if (weights[i] > 0.0) return i;
    return 0;
  }

  friend bool operator==(const RngStream& a, const RngStream& b) noexcept {
    return a.seed_ == b.seed_ && a.stream_ == b.stream_ && a.counter_ == b.counter_;
  }

 private:
  static std::uint64_t make_key(std::uint64_t seed, std::uint64_t stream) noexcept {
    return detail::mix64(detail::mix64(seed) ^ (stream * kGamma + 0x632BE59BD9B4E019ULL));
  }

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
  std::uint64_t key_ = make_key(0, 0);
};

}  // namespace tgan
