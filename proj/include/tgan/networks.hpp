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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tgan/graph.hpp"
#include "tgan/rng.hpp"
#include "tgan/tensor.hpp"

namespace tgan::nn {

using ad::Activation;
using ad::Graph;
using ad::Label;
using ad::Var;

enum class Mode { train, eval };

using NamedParams = std::vector<std::pair<std::string, Tensor*>>;

struct Dense {
  Tensor w;  // in × out
  Tensor b;  // out
};

/// Stack of dense layers; `hidden` follows every layer but the last, `output`
/// follows the last one.
struct Mlp {
  std::vector<Dense> layers;
  Activation hidden = Activation::lrelu;
  Activation output = Activation::identity;

  std::size_t in_dim() const { return layers.front().w.rows(); }
  std::size_t out_dim() const { return layers.back().w.cols(); }

  void collect(const std::string& prefix, NamedParams& out) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out.emplace_back(prefix + "l" + std::to_string(i) + ".w", &layers[i].w);
      out.emplace_back(prefix + "l" + std::to_string(i) + ".b", &layers[i].b);
    }
  }
};

/// He-style normal init for weights, zero biases.
inline Mlp make_mlp(std::span<const std::size_t> widths, Activation hidden, Activation output,
                    RngStream& rng) {
  if (widths.size() < 2) throw ContractError("make_mlp: need at least input and output widths");
  Mlp m;
  m.hidden = hidden;
  m.output = output;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Dense d{Tensor::matrix(widths[i], widths[i + 1]), Tensor({widths[i + 1]}, 0.0)};
    const bool last = i + 2 == widths.size();
    const Activation act = last ? output : hidden;
    const double gain = act == Activation::relu || act == Activation::lrelu ? 2.0 : 1.0;
    const double sd = std::sqrt(gain / static_cast<double>(widths[i]));
    for (double& v : d.w.data()) v = sd * rng.normal();
    m.layers.push_back(std::move(d));
  }
  return m;
}

/// Optional per-layer stochastic hook applied after each hidden activation.
template <class Hook>
Var mlp_forward(Graph& g, const Mlp& m, Var x, bool trainable, Hook&& after_hidden) {
  Var h = x;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const Dense& d = m.layers[i];
    h = ad::affine(g, h, g.param(d.w, trainable), g.param(d.b, trainable));
    if (i + 1 < m.layers.size()) {
      h = ad::activation(g, m.hidden, h);
      h = after_hidden(h);
    } else {
      h = ad::activation(g, m.output, h);
    }
  }
  return h;
}

inline Var mlp_forward(Graph& g, const Mlp& m, Var x, bool trainable) {
  return mlp_forward(g, m, x, trainable, [](Var v) { return v; });
}

inline Tensor one_hot(std::span<const Label> labels, std::size_t classes) {
  Tensor t = Tensor::matrix(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw IndexError("invalid class id " + std::to_string(labels[i]));
    t.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return t;
}

inline void zero_all(NamedParams params) {
  for (auto& [name, t] : params) t->fill(0.0);
}

// ---------------------------------------------------------------------------
// Classifier C: p_c(y|x) = softmax(C(x)).

struct ClassifierParams {
  Mlp net;
  double input_noise = 0.0;
  double dropout = 0.0;

  std::size_t classes() const { return net.out_dim(); }
  std::size_t input_dim() const { return net.in_dim(); }

  NamedParams named(const std::string& prefix) {
    NamedParams out;
    net.collect(prefix, out);
    return out;
  }
};

inline ClassifierParams make_classifier(std::span<const std::size_t> widths, double input_noise,
                                        double dropout, RngStream& rng) {
  return {make_mlp(widths, Activation::lrelu, Activation::identity, rng), input_noise, dropout};
}

inline Var classifier_forward(Graph& g, const ClassifierParams& c, Var x, Mode mode, RngStream& rng,
                              bool trainable = true) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 2 || xv.cols() != c.input_dim())
    throw DimensionError("classifier_forward: input " + shape_str(xv.shape()) + ", expected n×" +
                         std::to_string(c.input_dim()));
  const bool train = mode == Mode::train;
  Var h = ad::gaussian_noise(g, x, c.input_noise, rng, train);
  return mlp_forward(g, c.net, h, trainable,
                     [&](Var v) { return ad::dropout(g, v, c.dropout, rng, train); });
}

/// Deterministic eval-mode logits.
inline Tensor classifier_logits(const ClassifierParams& c, const Tensor& x) {
  Graph g;
  RngStream unused;
  return g.value(classifier_forward(g, c, g.constant(x), Mode::eval, unused, false));
}

inline Tensor classifier_probs(const ClassifierParams& c, const Tensor& x) {
  return ad::softmax_rows(classifier_logits(c, x));
}

struct TeacherParams {
  ClassifierParams net;
  double decay = 0.99;
};

/// teacher <- decay * teacher + (1 - decay) * student, per parameter.
inline void ema_update(TeacherParams& teacher, ClassifierParams& student, double decay) {
  if (!(decay >= 0.0 && decay < 1.0)) throw ContractError("ema_update: decay must lie in [0,1)");
  auto t = teacher.net.named("");
  auto s = student.named("");
  if (t.size() != s.size()) throw DimensionError("ema_update: layer count mismatch");
  for (std::size_t k = 0; k < t.size(); ++k) {
    Tensor& tp = *t[k].second;
    const Tensor& sp = *s[k].second;
    if (tp.shape() != sp.shape())
      throw DimensionError("ema_update: shape mismatch at " + t[k].first);
    for (std::size_t i = 0; i < tp.size(); ++i) tp[i] = decay * tp[i] + (1.0 - decay) * sp[i];
    tp.round_to_dtype();
  }
  teacher.decay = decay;
}

// ---------------------------------------------------------------------------
// Generator G: x = G(y, z) with one-hot(y) concatenated to z and a tanh head.

struct GeneratorParams {
  Mlp net;
  std::size_t classes = 0;
  std::size_t latent = 0;

  std::size_t output_dim() const { return net.out_dim(); }

  NamedParams named(const std::string& prefix) {
    NamedParams out;
    net.collect(prefix, out);
    return out;
  }
};

/// `hidden` lists hidden widths only; the input width is classes + latent.
inline GeneratorParams make_generator(std::size_t classes, std::size_t latent,
                                      std::span<const std::size_t> hidden, std::size_t out_dim,
                                      RngStream& rng) {
  std::vector<std::size_t> w{classes + latent};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out_dim);
  return {make_mlp(w, Activation::lrelu, Activation::tanh, rng), classes, latent};
}

inline Var generator_forward(Graph& g, const GeneratorParams& gp, std::span<const Label> labels,
                             Var z, bool trainable = true) {
  const Tensor& zv = g.value(z);
  if (zv.rank() != 2 || zv.cols() != gp.latent || zv.rows() != labels.size())
    throw DimensionError("generator_forward: latent " + shape_str(zv.shape()) + " for " +
                         std::to_string(labels.size()) + " labels");
  Var in = ad::concat_cols(g, g.constant(one_hot(labels, gp.classes)), z);
  return mlp_forward(g, gp.net, in, trainable);
}

inline Tensor generate(const GeneratorParams& gp, std::span<const Label> labels, const Tensor& z) {
  Graph g;
  return g.value(generator_forward(g, gp, labels, g.constant(z), false));
}

/// i.i.d. standard normal n×L.
inline Tensor sample_latent(std::size_t n, std::size_t latent, RngStream& rng) {
  if (n == 0 || latent == 0) throw ContractError("sample_latent: n and L must be positive");
  Tensor z = Tensor::matrix(n, latent);
  for (double& v : z.data()) v = rng.normal();
  return z;
}

// ---------------------------------------------------------------------------
// Discriminator D(x, y) = sigmoid(logit).
//
// projection: logit = head(phi(x)) + <embed[y], phi(x)>
// concat:     logit = head(phi(x ⊕ one_hot(y)))

enum class DiscVariant { projection, concat };

struct DiscriminatorParams {
  DiscVariant variant = DiscVariant::projection;
  Mlp trunk;     // activated on every layer, including the last
  Dense head;    // F × 1
  Tensor embed;  // K × F, projection only
  std::size_t classes = 0;

  std::size_t feature_dim() const { return trunk.out_dim(); }
  std::size_t input_dim() const {
    return variant == DiscVariant::concat ? trunk.in_dim() - classes : trunk.in_dim();
  }

  NamedParams named(const std::string& prefix) {
    NamedParams out;
    trunk.collect(prefix + "trunk.", out);
    out.emplace_back(prefix + "head.w", &head.w);
    out.emplace_back(prefix + "head.b", &head.b);
    if (variant == DiscVariant::projection) out.emplace_back(prefix + "embed", &embed);
    return out;
  }
};

/// `trunk_widths` lists the trunk's hidden widths; the last one is F.
inline DiscriminatorParams make_discriminator(std::size_t in_dim, std::size_t classes,
                                              std::span<const std::size_t> trunk_widths,
                                              DiscVariant variant, RngStream& rng) {
  if (trunk_widths.empty()) throw ContractError("make_discriminator: empty trunk");
  std::vector<std::size_t> w{variant == DiscVariant::concat ? in_dim + classes : in_dim};
  w.insert(w.end(), trunk_widths.begin(), trunk_widths.end());
  DiscriminatorParams d;
  d.variant = variant;
  d.classes = classes;
  d.trunk = make_mlp(w, Activation::lrelu, Activation::lrelu, rng);
  const std::size_t f = trunk_widths.back();
  d.head = Dense{Tensor::matrix(f, 1), Tensor({1}, 0.0)};
  const double sd = std::sqrt(1.0 / static_cast<double>(f));
  for (double& v : d.head.w.data()) v = sd * rng.normal();
  if (variant == DiscVariant::projection) {
    d.embed = Tensor::matrix(classes, f);
    for (double& v : d.embed.data()) v = sd * rng.normal();
  }
  return d;
}

/// Rows pushed through the trunk, for verifying the one-pass property.
struct DiscStats {
  std::uint64_t trunk_rows = 0;
};

namespace detail {

inline Var trunk(Graph& g, const DiscriminatorParams& d, Var x, bool trainable, DiscStats* stats) {
  if (stats) stats->trunk_rows += g.value(x).rows();
  return mlp_forward(g, d.trunk, x, trainable);
}

inline Var head(Graph& g, const DiscriminatorParams& d, Var phi, bool trainable) {
  return ad::affine(g, phi, g.param(d.head.w, trainable), g.param(d.head.b, trainable));
}

inline void check_input(const Graph& g, const DiscriminatorParams& d, Var x) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 2 || xv.cols() != d.input_dim())
    throw DimensionError("discriminator: input " + shape_str(xv.shape()) + ", expected n×" +
                         std::to_string(d.input_dim()));
}

}  // namespace detail

/// One logit per (x_i, y_i) pair, shape n×1.
inline Var discriminator_forward(Graph& g, const DiscriminatorParams& d, Var x,
                                 std::span<const Label> labels, bool trainable = true,
                                 DiscStats* stats = nullptr) {
  detail::check_input(g, d, x);
  if (labels.size() != g.value(x).rows())
    throw DimensionError("discriminator_forward: label count mismatch");
  if (d.variant == DiscVariant::projection) {
    Var phi = detail::trunk(g, d, x, trainable, stats);
    Var h = detail::head(g, d, phi, trainable);
    Var e = ad::gather_rows(g, g.param(d.embed, trainable), labels);
    return ad::add(g, h, ad::row_dot(g, phi, e));
  }
  Var in = ad::concat_cols(g, x, g.constant(one_hot(labels, d.classes)));
  return detail::head(g, d, detail::trunk(g, d, in, trainable, stats), trainable);
}

/// Logits for every label, shape n×K; column y equals discriminator_forward(x, y).
inline Var discriminator_all_labels(Graph& g, const DiscriminatorParams& d, Var x,
                                    bool trainable = true, DiscStats* stats = nullptr) {
  detail::check_input(g, d, x);
  const std::size_t n = g.value(x).rows();
  if (d.variant == DiscVariant::projection) {
    Var phi = detail::trunk(g, d, x, trainable, stats);
    Var h = detail::head(g, d, phi, trainable);
    Var proj = ad::matmul_nt(g, phi, g.param(d.embed, trainable));
    return ad::add_col(g, proj, h);
  }
  Var out;
  for (std::size_t y = 0; y < d.classes; ++y) {
    std::vector<Label> ys(n, static_cast<Label>(y));
    Var col = discriminator_forward(g, d, x, ys, trainable, stats);
    out = out.valid() ? ad::concat_cols(g, out, col) : col;
  }
  return out;
}

}  // namespace tgan::nn
