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
#include <vector>

#include "tgan/adam.hpp"
#include "tgan/data.hpp"
#include "tgan/networks.hpp"

namespace tgan::eval {

using ad::Label;

inline std::vector<Label> predict(const nn::ClassifierParams& c, const Tensor& x) {
  const Tensor logits = nn::classifier_logits(c, x);
  std::vector<Label> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    out[i] = static_cast<Label>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

/// Fraction of argmax mispredictions (ties resolve to the lowest class id).
inline double error_rate(const nn::ClassifierParams& c, const data::Dataset& d) {
  if (d.size() == 0) throw ContractError("error_rate: empty dataset");
  const auto pred = predict(c, d.features);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != d.labels[i];
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

struct Fidelity {
  std::vector<double> per_class;
  double overall = 0.0;
};

/// Generates n samples per class and scores them with the judge classifier.
inline Fidelity conditional_fidelity(const nn::GeneratorParams& g, const nn::ClassifierParams& judge,
                                     std::size_t n_per_class, RngStream& rng) {
  if (n_per_class == 0) throw ContractError("conditional_fidelity: n must be positive");
  Fidelity f;
  std::size_t hits = 0;
  for (std::size_t c = 0; c < g.classes; ++c) {
    std::vector<Label> y(n_per_class, static_cast<Label>(c));
    const Tensor x = nn::generate(g, y, nn::sample_latent(n_per_class, g.latent, rng));
    const auto pred = predict(judge, x);
    const auto ok = static_cast<std::size_t>(std::count(pred.begin(), pred.end(), static_cast<Label>(c)));
    hits += ok;
    f.per_class.push_back(static_cast<double>(ok) / static_cast<double>(n_per_class));
  }
  f.overall = static_cast<double>(hits) / static_cast<double>(n_per_class * g.classes);
  return f;
}

// ---------------------------------------------------------------------------
// Maximum mean discrepancy with a Gaussian kernel exp(-|a-b|²/(2h²)).

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

inline double gauss_kernel(std::span<const double> a, std::span<const double> b, double h) {
  return std::exp(-sq_dist(a, b) / (2.0 * h * h));
}

inline void require_mmd_inputs(const Tensor& x, const Tensor& y, double h, bool equal) {
  if (!(h > 0.0)) throw ContractError("mmd2: bandwidth must be positive");
  if (x.cols() != y.cols()) throw DimensionError("mmd2: feature dims differ");
  if (x.rows() < 2 || y.rows() < 2) throw ContractError("mmd2: need at least 2 samples per set");
  if (equal && x.rows() != y.rows()) throw DimensionError("mmd2: unbiased form needs equal sizes");
}

/// Unbiased estimate: mean over i≠j of k(x_i,x_j) + k(y_i,y_j) - k(x_i,y_j) - k(x_j,y_i).
/// Identical inputs give exactly 0.
inline double mmd2_unbiased(const Tensor& x, const Tensor& y, double h) {
  require_mmd_inputs(x, y, h, true);
  const std::size_t n = x.rows();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      s += gauss_kernel(x.row(i), x.row(j), h) + gauss_kernel(y.row(i), y.row(j), h) -
           gauss_kernel(x.row(i), y.row(j), h) - gauss_kernel(x.row(j), y.row(i), h);
    }
  return s / static_cast<double>(n * (n - 1));
}

/// Biased (V-statistic) estimate; always >= 0, sizes may differ.
inline double mmd2_biased(const Tensor& x, const Tensor& y, double h) {
  require_mmd_inputs(x, y, h, false);
  auto mean_k = [h](const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < b.rows(); ++j) s += gauss_kernel(a.row(i), b.row(j), h);
    return s / static_cast<double>(a.rows() * b.rows());
  };
  return mean_k(x, x) + mean_k(y, y) - 2.0 * mean_k(x, y);
}

/// Median pairwise distance over at most `cap` leading rows.
inline double median_bandwidth(const Tensor& x, std::size_t cap = 500) {
  const std::size_t n = std::min(cap, x.rows());
  std::vector<double> d;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d.push_back(std::sqrt(sq_dist(x.row(i), x.row(j))));
  if (d.empty()) throw ContractError("median_bandwidth: need at least 2 rows");
  std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
  return std::max(d[d.size() / 2], 1e-12);
}

enum class MmdEstimator { unbiased, biased };

inline Tensor take_rows(const Tensor& x, std::span<const std::size_t> idx) {
  Tensor out = Tensor::matrix(idx.size(), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(x.row(idx[i]).begin(), x.row(idx[i]).end(), out.row(i).begin());
  return out;
}

/// Per class: min(n, class count) generated vs real samples.
inline std::vector<double> mmd2_per_class(const nn::GeneratorParams& g, const data::Dataset& real, double h,
                                          std::size_t n, RngStream& rng,
                                          MmdEstimator est = MmdEstimator::unbiased) {
  if (g.classes != real.classes) throw DimensionError("mmd2_per_class: class count mismatch");
  std::vector<double> out;
  for (std::size_t c = 0; c < real.classes; ++c) {
    auto idx = real.indices_of(static_cast<Label>(c));
    if (idx.size() < 2) throw ContractError("mmd2_per_class: class " + std::to_string(c) + " has < 2 samples");
    const std::size_t m = std::min(n, idx.size());
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    idx.resize(m);
    const Tensor xr = real.rows(idx);
    std::vector<Label> y(m, static_cast<Label>(c));
    const Tensor xg = nn::generate(g, y, nn::sample_latent(m, g.latent, rng));
    out.push_back(est == MmdEstimator::unbiased ? mmd2_unbiased(xg, xr, h) : mmd2_biased(xg, xr, h));
  }
  return out;
}

/// Per class MMD² between two disjoint random halves of the real samples.
inline std::vector<double> mmd2_real_reference(const data::Dataset& real, double h, RngStream& rng,
                                               MmdEstimator est = MmdEstimator::biased) {
  std::vector<double> out;
  for (std::size_t c = 0; c < real.classes; ++c) {
    auto idx = real.indices_of(static_cast<Label>(c));
    if (idx.size() < 4) throw ContractError("mmd2_real_reference: class too small");
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    const std::size_t half = idx.size() / 2;
    std::span<const std::size_t> a(idx.data(), half), b(idx.data() + half, half);
    const Tensor xa = real.rows(a), xb = real.rows(b);
    out.push_back(est == MmdEstimator::unbiased ? mmd2_unbiased(xa, xb, h) : mmd2_biased(xa, xb, h));
  }
  return out;
}

struct QualityOptions {
  std::size_t fidelity_per_class = 500;
  /// Generated draws averaged per class; each has half the class size.
  std::size_t mmd_draws = 5;
  /// Random half-splits averaged for the real-vs-real reference.
  std::size_t reference_splits = 20;
};

struct GenerationQuality {
  Fidelity fidelity;
  double bandwidth = 0.0;
  std::vector<double> mmd2_generated;  // per class
  std::vector<double> mmd2_reference;  // per class

  double mean_generated() const { return mean(mmd2_generated); }
  double mean_reference() const { return mean(mmd2_reference); }
  static double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  }
};

/// Fidelity under the judge plus per-class MMD² against `real`. Generated and
/// reference sets are size-matched and both use the biased estimator.
inline GenerationQuality generation_quality(const nn::GeneratorParams& g, const data::Dataset& real,
                                            const nn::ClassifierParams& judge, std::uint64_t seed,
                                            const QualityOptions& opt = {}) {
  GenerationQuality q;
  RngStream fid(seed, "quality.fidelity"), gen(seed, "quality.mmd"), ref(seed, "quality.reference");
  q.fidelity = conditional_fidelity(g, judge, opt.fidelity_per_class, fid);
  q.bandwidth = median_bandwidth(real.features);
  q.mmd2_generated.assign(real.classes, 0.0);
  q.mmd2_reference.assign(real.classes, 0.0);
  const auto counts = real.class_counts();
  const std::size_t half = *std::min_element(counts.begin(), counts.end()) / 2;
  for (std::size_t r = 0; r < opt.mmd_draws; ++r) {
    const auto v = mmd2_per_class(g, real, q.bandwidth, half, gen, MmdEstimator::biased);
    for (std::size_t c = 0; c < v.size(); ++c) q.mmd2_generated[c] += v[c] / static_cast<double>(opt.mmd_draws);
  }
  for (std::size_t r = 0; r < opt.reference_splits; ++r) {
    const auto v = mmd2_real_reference(real, q.bandwidth, ref, MmdEstimator::biased);
    for (std::size_t c = 0; c < v.size(); ++c)
      q.mmd2_reference[c] += v[c] / static_cast<double>(opt.reference_splits);
  }
  return q;
}

/// G(y, (1-t) z0 + t z1) on a uniform grid of `steps` points.
inline Tensor latent_interpolation(const nn::GeneratorParams& g, Label y, std::span<const double> z0,
                                   std::span<const double> z1, std::size_t steps) {
  if (steps < 2) throw ContractError("latent_interpolation: steps must be >= 2");
  if (z0.size() != g.latent || z1.size() != g.latent) throw DimensionError("latent_interpolation: bad z size");
  Tensor z = Tensor::matrix(steps, g.latent);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
    for (std::size_t k = 0; k < g.latent; ++k) z.at(s, k) = (1.0 - t) * z0[k] + t * z1[k];
  }
  std::vector<Label> ys(steps, y);
  return nn::generate(g, ys, z);
}

/// Upper bound on the Lipschitz constant of z -> G(y, z): product of layer
/// Frobenius norms (all activations are 1-Lipschitz).
inline double generator_lipschitz_bound(const nn::GeneratorParams& g) {
  double bound = 1.0;
  for (const auto& layer : g.net.layers) {
    double f = 0.0;
    for (double v : layer.w.data()) f += v * v;
    bound *= std::sqrt(f);
  }
  return bound;
}

// ---------------------------------------------------------------------------
// Fully supervised judge network for conditional_fidelity.

struct OracleTrainConfig {
  std::vector<std::size_t> hidden{64, 64};
  std::size_t iters = 1500;
  std::size_t batch = 128;
  double lr = 3e-3;
};

inline nn::ClassifierParams train_oracle_classifier(const data::Dataset& train, std::uint64_t seed,
                                                    const OracleTrainConfig& cfg = {}) {
  if (train.size() == 0) throw ContractError("train_oracle_classifier: empty dataset");
  RngStream init(seed, "oracle_classifier.init");
  std::vector<std::size_t> widths{train.dim()};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(train.classes);
  nn::ClassifierParams c = nn::make_classifier(widths, 0.0, 0.0, init);
  auto named = c.named("");
  std::vector<Tensor*> params;
  for (auto& [n, t] : named) params.push_back(t);
  ad::AdamState st(ad::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8}, params);
  std::vector<std::size_t> all(train.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  data::Batcher batches(all, std::min(cfg.batch, all.size()), seed, true);
  RngStream unused;
  for (std::size_t t = 0; t < cfg.iters; ++t) {
    const auto idx = batches.next();
    ad::Graph g;
    ad::Var logits = nn::classifier_forward(g, c, g.constant(train.rows(idx)), nn::Mode::eval, unused);
    ad::Var loss = ad::cross_entropy(g, logits, train.labels_at(idx));
    ad::adam_step(params, g.backward(loss), st);
  }
  return c;
}

}  // namespace tgan::eval
