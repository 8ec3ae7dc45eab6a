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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tgan/graph.hpp"
#include "tgan/rng.hpp"
#include "tgan/tensor.hpp"

namespace tgan::data {

using ad::Label;

enum class Kind { mixture, moons, rings };
enum class SplitTag { train, val, test };

inline const char* kind_name(Kind k) {
  switch (k) {
    case Kind::mixture: return "mixture";
    case Kind::moons: return "moons";
    case Kind::rings: return "rings";
  }
  return "?";
}

/// Everything needed to regenerate the data and evaluate its true density.
/// Stored features are (raw - offset) * scale, componentwise.
struct GeneratorSpec {
  Kind kind = Kind::mixture;
  std::size_t classes = 8;
  std::size_t dim = 2;
  double radius = 0.75;
  double sigma = 0.08;
  std::vector<double> offset;  // dim entries
  double scale = 1.0;
};

struct Dataset {
  Tensor features;  // n × d
  std::vector<Label> labels;
  std::size_t classes = 0;
  SplitTag split = SplitTag::train;
  GeneratorSpec spec;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> c(classes, 0);
    for (Label y : labels) ++c[static_cast<std::size_t>(y)];
    return c;
  }

  std::vector<std::size_t> indices_of(Label y) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == y) out.push_back(i);
    return out;
  }

  Tensor rows(std::span<const std::size_t> idx) const {
    Tensor out = Tensor::matrix(idx.size(), dim());
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < dim(); ++j) out.at(r, j) = features.at(idx[r], j);
    return out;
  }

  std::vector<Label> labels_at(std::span<const std::size_t> idx) const {
    std::vector<Label> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(labels[i]);
    return out;
  }
};

namespace detail {

inline Dataset assemble(GeneratorSpec spec, std::vector<double> raw, std::vector<Label> labels,
                        SplitTag split) {
  if (spec.offset.empty()) spec.offset.assign(spec.dim, 0.0);
  const std::size_t n = labels.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < spec.dim; ++j)
      raw[i * spec.dim + j] = (raw[i * spec.dim + j] - spec.offset[j]) * spec.scale;
  Dataset d;
  d.features = Tensor({n, spec.dim}, std::move(raw));
  d.labels = std::move(labels);
  d.classes = spec.classes;
  d.split = split;
  d.spec = std::move(spec);
  return d;
}

inline double gaussian_log_kernel(std::span<const double> x, std::span<const double> mu,
                                  double sigma) {
  double sq = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) sq += (x[j] - mu[j]) * (x[j] - mu[j]);
  const double d = static_cast<double>(x.size());
  return -0.5 * sq / (sigma * sigma) - d * std::log(sigma) - 0.5 * d * std::log(2.0 * std::numbers::pi);
}

}  // namespace detail

/// Class means of the ring-of-Gaussians mixture (first two coordinates).
inline std::vector<double> mixture_mean(std::size_t c, std::size_t classes, double radius,
                                        std::size_t dim) {
  std::vector<double> mu(dim, 0.0);
  const double a = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
  mu[0] = radius * std::cos(a);
  mu[1] = radius * std::sin(a);
  return mu;
}

/// Class c ~ N(radius·(cos 2πc/K, sin 2πc/K), σ²I). Rows are class-major.
inline Dataset make_mixture(std::size_t classes, std::size_t n_per_class, double radius, double sigma,
                            std::uint64_t seed, std::size_t dim = 2,
                            SplitTag split = SplitTag::train) {
  if (classes < 2) throw ContractError("make_mixture: need K >= 2");
  if (dim < 2) throw ContractError("make_mixture: need d >= 2");
  if (n_per_class == 0) throw ContractError("make_mixture: need n_per_class >= 1");
  RngStream rng(seed, "data.mixture");
  std::vector<double> raw;
  std::vector<Label> labels;
  raw.reserve(classes * n_per_class * dim);
  for (std::size_t c = 0; c < classes; ++c) {
    const auto mu = mixture_mean(c, classes, radius, dim);
    for (std::size_t i = 0; i < n_per_class; ++i) {
      for (std::size_t j = 0; j < dim; ++j) raw.push_back(mu[j] + sigma * rng.normal());
      labels.push_back(static_cast<Label>(c));
    }
  }
  GeneratorSpec spec{Kind::mixture, classes, dim, radius, sigma, {}, 1.0};
  return detail::assemble(std::move(spec), std::move(raw), std::move(labels), split);
}

/// Two interleaved half circles, standardized into (-1, 1).
inline Dataset make_moons(std::size_t n_per_class, double sigma, std::uint64_t seed,
                          SplitTag split = SplitTag::train) {
  if (n_per_class == 0) throw ContractError("make_moons: need n_per_class >= 1");
  RngStream rng(seed, "data.moons");
  std::vector<double> raw;
  std::vector<Label> labels;
  for (Label c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const double t = std::numbers::pi * rng.uniform();
      const double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
      const double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
      raw.push_back(x + sigma * rng.normal());
      raw.push_back(y + sigma * rng.normal());
      labels.push_back(c);
    }
  GeneratorSpec spec{Kind::moons, 2, 2, 1.0, sigma, {0.5, 0.25}, 1.0 / 1.6};
  return detail::assemble(std::move(spec), std::move(raw), std::move(labels), split);
}

/// Concentric rings; class c lies on radius (c+1)/K.
inline Dataset make_rings(std::size_t classes, std::size_t n_per_class, double sigma,
                          std::uint64_t seed, SplitTag split = SplitTag::train) {
  if (classes < 2) throw ContractError("make_rings: need K >= 2");
  if (n_per_class == 0) throw ContractError("make_rings: need n_per_class >= 1");
  RngStream rng(seed, "data.rings");
  std::vector<double> raw;
  std::vector<Label> labels;
  for (std::size_t c = 0; c < classes; ++c) {
    const double r = static_cast<double>(c + 1) / static_cast<double>(classes);
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const double a = 2.0 * std::numbers::pi * rng.uniform();
      raw.push_back(r * std::cos(a) + sigma * rng.normal());
      raw.push_back(r * std::sin(a) + sigma * rng.normal());
      labels.push_back(static_cast<Label>(c));
    }
  }
  GeneratorSpec spec{Kind::rings, classes, 2, 1.0, sigma, {}, 1.0};
  return detail::assemble(std::move(spec), std::move(raw), std::move(labels), split);
}

/// log p(x | y) in standardized coordinates. Curve-supported kinds integrate
/// the noise kernel along the curve with a midpoint rule.
inline double class_log_density(const GeneratorSpec& spec, std::span<const double> x, Label y) {
  if (y < 0 || static_cast<std::size_t>(y) >= spec.classes) throw IndexError("class_log_density: bad class");
  if (x.size() != spec.dim) throw DimensionError("class_log_density: dimension mismatch");
  if (!(spec.sigma > 0.0)) throw ContractError("class_log_density: needs sigma > 0");
  std::vector<double> raw(spec.dim);
  for (std::size_t j = 0; j < spec.dim; ++j)
    raw[j] = x[j] / spec.scale + (spec.offset.empty() ? 0.0 : spec.offset[j]);
  const double log_jac = -static_cast<double>(spec.dim) * std::log(spec.scale);
  if (spec.kind == Kind::mixture) {
    const auto mu = mixture_mean(static_cast<std::size_t>(y), spec.classes, spec.radius, spec.dim);
    return detail::gaussian_log_kernel(raw, mu, spec.sigma) + log_jac;
  }
  constexpr std::size_t kNodes = 2048;
  const double span = spec.kind == Kind::moons ? std::numbers::pi : 2.0 * std::numbers::pi;
  std::vector<double> logs(kNodes);
  for (std::size_t k = 0; k < kNodes; ++k) {
    const double t = span * (static_cast<double>(k) + 0.5) / kNodes;
    double mu[2];
    if (spec.kind == Kind::moons) {
      mu[0] = y == 0 ? std::cos(t) : 1.0 - std::cos(t);
      mu[1] = y == 0 ? std::sin(t) : 0.5 - std::sin(t);
    } else {
      const double r = static_cast<double>(y + 1) / static_cast<double>(spec.classes);
      mu[0] = r * std::cos(t);
      mu[1] = r * std::sin(t);
    }
    logs[k] = detail::gaussian_log_kernel(raw, mu, spec.sigma);
  }
  const double mx = *std::max_element(logs.begin(), logs.end());
  double s = 0.0;
  for (double l : logs) s += std::exp(l - mx);
  return mx + std::log(s / kNodes) + log_jac;
}

// ---------------------------------------------------------------------------
// Semi-supervised split

struct SemiSplit {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  std::uint64_t seed = 0;
};

/// Balanced labeled subset; everything else is unlabeled unless `low_data`,
/// in which case the unlabeled set is empty.
inline SemiSplit split_semi(const Dataset& d, std::size_t labels_per_class, std::uint64_t seed,
                            bool low_data = false) {
  SemiSplit s;
  s.seed = seed;
  RngStream rng(seed, "data.split");
  for (std::size_t c = 0; c < d.classes; ++c) {
    auto idx = d.indices_of(static_cast<Label>(c));
    if (idx.size() < labels_per_class)
      throw ContractError("split_semi: class " + std::to_string(c) + " has " +
                          std::to_string(idx.size()) + " examples, need " +
                          std::to_string(labels_per_class));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    s.labeled.insert(s.labeled.end(), idx.begin(), idx.begin() + static_cast<long>(labels_per_class));
    if (!low_data)
      s.unlabeled.insert(s.unlabeled.end(), idx.begin() + static_cast<long>(labels_per_class), idx.end());
  }
  std::sort(s.labeled.begin(), s.labeled.end());
  std::sort(s.unlabeled.begin(), s.unlabeled.end());
  return s;
}

// ---------------------------------------------------------------------------
// Batching

/// Shuffled index batches. Epoch e uses a permutation derived from (seed, e).
/// Cycling batches always have size m and run across epoch boundaries;
/// non-cycling batches stop at the end of the first epoch (last one partial).
class Batcher {
 public:
  Batcher() = default;
  Batcher(std::vector<std::size_t> indices, std::size_t m, std::uint64_t seed, bool cycle)
      : indices_(std::move(indices)), m_(m), seed_(seed), cycle_(cycle) {
    if (m_ == 0) throw ContractError("batcher: batch size must be >= 1");
    if (cycle_ && indices_.empty()) throw ContractError("batcher: cycling over an empty index set");
    reshuffle();
  }

  /// Empty only when a non-cycling batcher is exhausted.
  std::vector<std::size_t> next() { return next(m_); }

  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
      if (pos_ == order_.size()) {
        if (!cycle_) break;
        ++epoch_;
        reshuffle();
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

  std::uint64_t epoch() const noexcept { return epoch_; }
  std::size_t position() const noexcept { return pos_; }
  std::size_t batch_size() const noexcept { return m_; }
  std::size_t pool_size() const noexcept { return indices_.size(); }

  /// Restores a saved (epoch, position) pair.
  void seek(std::uint64_t epoch, std::size_t pos) {
    epoch_ = epoch;
    reshuffle();
    if (pos > order_.size()) throw ContractError("batcher: seek position out of range");
    pos_ = pos;
  }

 private:
  void reshuffle() {
    order_ = indices_;
    RngStream rng = RngStream(seed_, "data.batcher").derive(epoch_);
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng.uniform_int(i)]);
    pos_ = 0;
  }

  std::vector<std::size_t> indices_;
  std::vector<std::size_t> order_;
  std::size_t m_ = 1;
  std::uint64_t seed_ = 0;
  bool cycle_ = true;
  std::uint64_t epoch_ = 0;
  std::size_t pos_ = 0;
};

/// i.i.d. uniform class ids in [0, K).
inline std::vector<Label> class_prior_sample(std::size_t classes, std::size_t n, RngStream& rng) {
  if (classes < 2) throw ContractError("class_prior_sample: need K >= 2");
  std::vector<Label> out(n);
  for (Label& y : out) y = static_cast<Label>(rng.uniform_int(classes));
  return out;
}

enum class AugmentPolicy { none, jitter };

/// Isotropic Gaussian jitter; `none` (or sigma 0) is the identity.
inline Tensor augment(const Tensor& x, AugmentPolicy policy, double sigma, RngStream& rng) {
  if (sigma < 0.0) throw ContractError("augment: sigma must be >= 0");
  if (policy == AugmentPolicy::none || sigma == 0.0) return x;
  Tensor out = x;
  for (double& v : out.data()) v += sigma * rng.normal();
  return out;
}

}  // namespace tgan::data
