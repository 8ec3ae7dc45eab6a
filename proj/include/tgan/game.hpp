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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tgan/adam.hpp"
#include "tgan/data.hpp"
#include "tgan/graph.hpp"
#include "tgan/networks.hpp"
#include "tgan/rng.hpp"

namespace tgan::game {

using ad::Graph;
using ad::Label;
using ad::Var;

enum class Regularizer { none, entropy, consistency, mean_teacher };
enum class GeneratorLoss { minimax, nonsaturating };

/// Coefficient schedule. Zero before `start`; the sigmoid ramp follows
/// max·exp(-5(1-x)²) with x the fraction of `rampup` elapsed since `start`.
struct Schedule {
  enum class Kind { constant, sigmoid_rampup };
  Kind kind = Kind::constant;
  double max = 0.0;
  std::uint64_t rampup = 0;
  std::uint64_t start = 0;
};

inline double schedule_value(const Schedule& s, std::uint64_t iter) {
  if (iter < s.start) return 0.0;
  if (s.kind == Schedule::Kind::constant || s.rampup == 0) return s.max;
  const double x = std::min(1.0, static_cast<double>(iter - s.start) / static_cast<double>(s.rampup));
  return s.max * std::exp(-5.0 * (1.0 - x) * (1.0 - x));
}

struct GameHyperparams {
  double alpha = 0.5;
  Schedule alpha_p{Schedule::Kind::sigmoid_rampup, 0.3, 500, 1000};
  Schedule alpha_u{Schedule::Kind::sigmoid_rampup, 1.0, 500, 0};
  std::size_t m_d = 64;
  std::size_t m_c = 64;
  std::size_t m_g = 64;
  Regularizer regularizer = Regularizer::mean_teacher;
  double ema_decay = 0.99;
  GeneratorLoss generator_loss = GeneratorLoss::minimax;
  double pseudo_fraction = 0.5;
  /// Draw y_c and pseudo labels from the teacher when mean_teacher is active.
  bool teacher_labels = true;
  std::uint64_t iters = 3000;
  std::uint64_t pretrain_iters = 300;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("alpha must lie in (0,1)");
    if (alpha_p.max < 0.0 || alpha_u.max < 0.0) throw ContractError("schedules must be nonnegative");
    if (m_d == 0 || m_c == 0 || m_g == 0) throw ContractError("batch sizes must be >= 1");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ContractError("ema_decay must lie in [0,1)");
    if (!(pseudo_fraction >= 0.0 && pseudo_fraction <= 1.0))
      throw ContractError("pseudo_fraction must lie in [0,1]");
    if (pretrain_iters > iters) throw ContractError("pretrain_iters must not exceed iters");
  }
};

struct ModelShape {
  std::size_t input_dim = 2;
  std::size_t classes = 8;
  std::vector<std::size_t> classifier_hidden{128, 128};
  std::vector<std::size_t> generator_hidden{128, 128};
  std::vector<std::size_t> disc_trunk{128, 64};
  std::size_t latent = 16;
  nn::DiscVariant variant = nn::DiscVariant::projection;
  double input_noise = 0.15;
  double dropout = 0.0;
};

struct TripleGanModel {
  nn::ClassifierParams classifier;
  nn::GeneratorParams generator;
  nn::DiscriminatorParams discriminator;
  nn::TeacherParams teacher;

  /// Every tensor with its checkpoint name.
  nn::NamedParams named() {
    nn::NamedParams out = classifier.named("c.");
    for (auto& p : generator.named("g.")) out.push_back(p);
    for (auto& p : discriminator.named("d.")) out.push_back(p);
    for (auto& p : teacher.net.named("t.")) out.push_back(p);
    return out;
  }

  static std::vector<Tensor*> ptrs(nn::NamedParams named) {
    std::vector<Tensor*> out;
    for (auto& [n, t] : named) out.push_back(t);
    return out;
  }
  std::vector<Tensor*> classifier_params() { return ptrs(classifier.named("")); }
  std::vector<Tensor*> generator_params() { return ptrs(generator.named("")); }
  std::vector<Tensor*> discriminator_params() { return ptrs(discriminator.named("")); }

  void set_dtype(Dtype d) {
    for (auto& [n, t] : named()) t->set_dtype(d);
  }
};

inline TripleGanModel make_model(const ModelShape& s, RngStream init) {
  TripleGanModel m;
  RngStream rc = init.derive("classifier"), rg = init.derive("generator"), rd = init.derive("discriminator");
  std::vector<std::size_t> cw{s.input_dim};
  cw.insert(cw.end(), s.classifier_hidden.begin(), s.classifier_hidden.end());
  cw.push_back(s.classes);
  m.classifier = nn::make_classifier(cw, s.input_noise, s.dropout, rc);
  m.generator = nn::make_generator(s.classes, s.latent, s.generator_hidden, s.input_dim, rg);
  m.discriminator = nn::make_discriminator(s.input_dim, s.classes, s.disc_trunk, s.variant, rd);
  m.teacher.net = m.classifier;
  return m;
}

struct PairBatch {
  Tensor x;
  std::vector<Label> y;
  std::size_t size() const { return y.size(); }
  bool empty() const { return y.empty(); }
};

/// Row-wise draw from each row's categorical distribution.
inline std::vector<Label> sample_labels(const Tensor& probs, RngStream& rng) {
  std::vector<Label> out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i)
    out[i] = static_cast<Label>(rng.categorical(probs.row(i)));
  return out;
}

inline PairBatch head(const PairBatch& b, std::size_t k) {
  if (k > b.size()) throw ContractError("head: batch too small");
  if (k == 0) return {};
  PairBatch out;
  const std::size_t d = b.x.cols();
  out.x = Tensor({k, d}, std::vector<double>(b.x.data().begin(), b.x.data().begin() + static_cast<long>(k * d)));
  out.y.assign(b.y.begin(), b.y.begin() + static_cast<long>(k));
  return out;
}

inline PairBatch concat(const PairBatch& a, const PairBatch& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  PairBatch out;
  const std::size_t d = a.x.cols();
  std::vector<double> v(a.x.data().begin(), a.x.data().end());
  v.insert(v.end(), b.x.data().begin(), b.x.data().end());
  out.x = Tensor({a.size() + b.size(), d}, std::move(v));
  out.y = a.y;
  out.y.insert(out.y.end(), b.y.begin(), b.y.end());
  return out;
}

// ---------------------------------------------------------------------------
// Losses. Each binds only its own player as trainable; every other input is
// either a frozen parameter or a constant tensor.

/// Negated D objective: -(mean log D(pos) + α mean log(1-D(c)) + (1-α) mean log(1-D(g))).
inline Var discriminator_loss(Graph& g, const TripleGanModel& m, const PairBatch& positives,
                              const PairBatch& c_pairs, const PairBatch& g_pairs, double alpha) {
  if (positives.empty() || c_pairs.empty() || g_pairs.empty())
    throw ContractError("discriminator_loss: empty batch");
  const auto& d = m.discriminator;
  Var lp = nn::discriminator_forward(g, d, g.constant(positives.x), positives.y);
  Var lc = nn::discriminator_forward(g, d, g.constant(c_pairs.x), c_pairs.y);
  Var lg = nn::discriminator_forward(g, d, g.constant(g_pairs.x), g_pairs.y);
  Var real = ad::bce_logit(g, lp, 1.0);
  Var fake_c = ad::scale(g, ad::bce_logit(g, lc, 0.0), alpha);
  Var fake_g = ad::scale(g, ad::bce_logit(g, lg, 0.0), 1.0 - alpha);
  return ad::add(g, ad::add(g, real, fake_c), fake_g);
}

namespace detail {

inline Var prob_mse(Graph& g, Var logits_a, Var logits_b) {
  return ad::mse(g, ad::softmax_rows(g, logits_a), ad::softmax_rows(g, logits_b));
}

/// R_U given an already computed stochastic student pass on x.
inline Var regularizer_from(Graph& g, Regularizer kind, const TripleGanModel& m, Var student_logits,
                            const Tensor& x, RngStream& rng) {
  switch (kind) {
    case Regularizer::none:
      return g.constant(Tensor::scalar(0.0));
    case Regularizer::entropy: {
      Var ent = ad::sum(g, ad::mul(g, ad::softmax_rows(g, student_logits),
                                   ad::log_softmax_rows(g, student_logits)));
      return ad::scale(g, ent, -1.0 / static_cast<double>(x.rows()));
    }
    case Regularizer::consistency: {
      Var second = nn::classifier_forward(g, m.classifier, g.constant(x), nn::Mode::train, rng);
      return prob_mse(g, student_logits, second);
    }
    case Regularizer::mean_teacher: {
      Var t = nn::classifier_forward(g, m.teacher.net, g.constant(x), nn::Mode::train, rng, false);
      return prob_mse(g, student_logits, t);
    }
  }
  throw ContractError("unknown regularizer");
}

inline std::uint64_t batcher_seed(std::uint64_t seed, std::uint64_t k) {
  return tgan::detail::mix64(seed + k * 0x9E3779B97F4A7C15ULL);
}

}  // namespace detail

/// R_U on an unlabeled batch: predictive entropy, two-pass consistency MSE, or
/// student-vs-teacher MSE (teacher frozen).
inline Var unlabeled_regularizer(Graph& g, Regularizer kind, const TripleGanModel& m, const Tensor& x,
                                 RngStream& rng) {
  if (kind == Regularizer::none) throw ContractError("unlabeled_regularizer: kind none");
  if (kind == Regularizer::mean_teacher && m.teacher.net.net.layers.empty())
    throw ContractError("unlabeled_regularizer: mean_teacher needs a teacher");
  Var s = nn::classifier_forward(g, m.classifier, g.constant(x), nn::Mode::train, rng);
  return detail::regularizer_from(g, kind, m, s, x, rng);
}

struct ClassifierLoss {
  Var total;
  Var adversarial;
  Var r_c;
  Var r_p;  // invalid when the coefficient is zero
  Var r_u;  // invalid when no regularizer is active
  double alpha_p = 0.0;
  double alpha_u = 0.0;
};

inline Tensor frozen_all_label_logits(const nn::DiscriminatorParams& d, const Tensor& x) {
  Graph g;
  return g.value(nn::discriminator_all_labels(g, d, g.constant(x), false));
}

/// C objective: α·mean_x Σ_y p_c(y|x) log(1-D(x,y)) + R_C + α_P R_P + α_U R_U.
/// The label is integrated out exactly; D is a constant here.
inline ClassifierLoss classifier_loss(Graph& g, const TripleGanModel& m, const Tensor& x_unlabeled,
                                      const PairBatch& labeled, const PairBatch& generated,
                                      const GameHyperparams& h, std::uint64_t iter, RngStream& rng,
                                      bool use_unlabeled_regularizer = true) {
  if (m.classifier.classes() != m.discriminator.classes)
    throw DimensionError("classifier_loss: C predicts " + std::to_string(m.classifier.classes()) +
                         " classes, D scores " + std::to_string(m.discriminator.classes));
  ClassifierLoss out;
  Tensor log1m_d = frozen_all_label_logits(m.discriminator, x_unlabeled);
  for (double& v : log1m_d.data()) v = -ad::detail::softplus(v);

  Var student = nn::classifier_forward(g, m.classifier, g.constant(x_unlabeled), nn::Mode::train, rng);
  Var expect = ad::sum(g, ad::mul(g, ad::softmax_rows(g, student), g.constant(std::move(log1m_d))));
  out.adversarial = ad::scale(g, expect, h.alpha / static_cast<double>(x_unlabeled.rows()));

  Var lc = nn::classifier_forward(g, m.classifier, g.constant(labeled.x), nn::Mode::train, rng);
  out.r_c = ad::cross_entropy(g, lc, labeled.y);
  out.total = ad::add(g, out.adversarial, out.r_c);

  out.alpha_p = schedule_value(h.alpha_p, iter);
  if (out.alpha_p > 0.0 && !generated.empty()) {
    Var lg = nn::classifier_forward(g, m.classifier, g.constant(generated.x), nn::Mode::train, rng);
    out.r_p = ad::cross_entropy(g, lg, generated.y);
    out.total = ad::add(g, out.total, ad::scale(g, out.r_p, out.alpha_p));
  }
  if (use_unlabeled_regularizer && h.regularizer != Regularizer::none) {
    out.alpha_u = schedule_value(h.alpha_u, iter);
    out.r_u = detail::regularizer_from(g, h.regularizer, m, student, x_unlabeled, rng);
    out.total = ad::add(g, out.total, ad::scale(g, out.r_u, out.alpha_u));
  }
  return out;
}

/// Pretraining objective for C alone: R_C + α_U R_U.
inline ClassifierLoss classifier_pretrain_loss(Graph& g, const TripleGanModel& m,
                                               const Tensor& x_unlabeled, const PairBatch& labeled,
                                               const GameHyperparams& h, std::uint64_t iter,
                                               RngStream& rng, bool use_unlabeled_regularizer = true) {
  ClassifierLoss out;
  Var lc = nn::classifier_forward(g, m.classifier, g.constant(labeled.x), nn::Mode::train, rng);
  out.r_c = ad::cross_entropy(g, lc, labeled.y);
  out.total = out.r_c;
  if (use_unlabeled_regularizer && h.regularizer != Regularizer::none) {
    out.alpha_u = schedule_value(h.alpha_u, iter);
    out.r_u = unlabeled_regularizer(g, h.regularizer, m, x_unlabeled, rng);
    out.total = ad::add(g, out.total, ad::scale(g, out.r_u, out.alpha_u));
  }
  return out;
}

/// minimax: (1-α)·mean log(1 - D(G(y,z), y)); nonsaturating: -(1-α)·mean log D(G(y,z), y).
inline Var generator_loss(Graph& g, const TripleGanModel& m, std::span<const Label> labels,
                          const Tensor& z, double alpha, GeneratorLoss variant) {
  Var x = nn::generator_forward(g, m.generator, labels, g.constant(z));
  Var l = nn::discriminator_forward(g, m.discriminator, x, labels, false);
  if (variant == GeneratorLoss::minimax) return ad::scale(g, ad::bce_logit(g, l, 0.0), -(1.0 - alpha));
  return ad::scale(g, ad::bce_logit(g, l, 1.0), 1.0 - alpha);
}

/// Pseudo-labelled positives for D: the first round(ρ·n) rows of x with labels
/// drawn from the labeler's eval-mode p(y|x). No gradient path exists.
inline PairBatch pseudo_pair_augment(const nn::ClassifierParams& labeler, const Tensor& x, double rho,
                                     RngStream& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ContractError("pseudo_pair_augment: rho must lie in [0,1]");
  const auto count = static_cast<std::size_t>(std::llround(rho * static_cast<double>(x.rows())));
  if (count == 0) return {};
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  Tensor sub = Tensor::matrix(count, x.cols());
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) sub.at(i, j) = x.at(i, j);
  PairBatch out;
  out.y = sample_labels(nn::classifier_probs(labeler, sub), rng);
  out.x = std::move(sub);
  return out;
}

// ---------------------------------------------------------------------------
// Training state and the per-iteration update.

struct Streams {
  RngStream latent;
  RngStream prior;
  RngStream label_sampling;
  RngStream pseudo;
  RngStream stochastic;
  RngStream augment;

  explicit Streams(std::uint64_t seed = 0)
      : latent(seed, "train.latent"),
        prior(seed, "train.prior"),
        label_sampling(seed, "train.label_sampling"),
        pseudo(seed, "train.pseudo"),
        stochastic(seed, "train.stochastic"),
        augment(seed, "train.augment") {}

  std::vector<std::pair<std::string, RngStream*>> named() {
    return {{"latent", &latent},       {"prior", &prior},           {"label_sampling", &label_sampling},
            {"pseudo", &pseudo},       {"stochastic", &stochastic}, {"augment", &augment}};
  }
};

struct AdamConfigs {
  ad::AdamConfig c, d, g;
};

struct TrainState {
  GameHyperparams hyper;
  TripleGanModel model;
  ad::AdamState adam_c, adam_d, adam_g;
  std::uint64_t iter = 0;
  Streams rng;
  data::Batcher labeled;
  data::Batcher unlabeled;
  /// False in the extreme-low-data regime: R_U and pseudo pairs are off and
  /// x_c is drawn from the labeled inputs.
  bool has_unlabeled = true;
  data::AugmentPolicy augment = data::AugmentPolicy::none;
  double augment_sigma = 0.0;
  /// Learning rates fall linearly from their base values to 0 at hyper.iters.
  bool linear_lr_decay = false;
  AdamConfigs base_opt;
};

inline TrainState make_train_state(const GameHyperparams& h, TripleGanModel model, const AdamConfigs& opt,
                                   const data::SemiSplit& split, std::uint64_t seed,
                                   Dtype dtype = Dtype::f64) {
  h.validate();
  if (split.labeled.empty()) throw ContractError("make_train_state: no labeled examples");
  TrainState s;
  s.hyper = h;
  s.model = std::move(model);
  s.model.set_dtype(dtype);
  s.adam_c = ad::AdamState(opt.c, s.model.classifier_params());
  s.adam_d = ad::AdamState(opt.d, s.model.discriminator_params());
  s.adam_g = ad::AdamState(opt.g, s.model.generator_params());
  s.base_opt = opt;
  s.rng = Streams(seed);
  s.has_unlabeled = !split.unlabeled.empty();
  s.labeled = data::Batcher(split.labeled, h.m_d, detail::batcher_seed(seed, 1), true);
  s.unlabeled = data::Batcher(s.has_unlabeled ? split.unlabeled : split.labeled, h.m_c,
                              detail::batcher_seed(seed, 2), true);
  return s;
}

struct StepMetrics {
  std::uint64_t iter = 0;  // iterations completed after this step
  double loss_d = 0.0;
  double loss_g = 0.0;
  double loss_c_adv = 0.0;
  double r_c = 0.0;
  double r_p = 0.0;
  double r_u = 0.0;
  double alpha_p_eff = 0.0;
  double alpha_u_eff = 0.0;
  double time_ms = 0.0;
  bool pretrain = false;
};

namespace detail {

inline double value_or_zero(const Graph& g, Var v) { return v.valid() ? g.value(v).item() : 0.0; }

inline PairBatch gather(const data::Dataset& d, std::span<const std::size_t> idx) {
  return {d.rows(idx), d.labels_at(idx)};
}

}  // namespace detail

/// One Algorithm-style iteration: D ascent, C descent, G descent, EMA teacher.
/// During pretraining only C moves (R_C + α_U R_U).
inline StepMetrics train_step(TrainState& s, const data::Dataset& train) {
  const auto t0 = std::chrono::steady_clock::now();
  const GameHyperparams& h = s.hyper;
  TripleGanModel& m = s.model;
  StepMetrics out;
  const bool use_ru = s.has_unlabeled;
  if (s.linear_lr_decay) {
    const double f = 1.0 - static_cast<double>(s.iter) / static_cast<double>(h.iters);
    s.adam_c.config.lr = s.base_opt.c.lr * f;
    s.adam_d.config.lr = s.base_opt.d.lr * f;
    s.adam_g.config.lr = s.base_opt.g.lr * f;
  }

  auto labeled_idx = s.labeled.next();
  auto unlabeled_idx = s.unlabeled.next();
  PairBatch labeled = detail::gather(train, labeled_idx);
  labeled.x = data::augment(labeled.x, s.augment, s.augment_sigma, s.rng.augment);
  Tensor x_c = data::augment(train.rows(unlabeled_idx), s.augment, s.augment_sigma, s.rng.augment);

  const nn::ClassifierParams& labeler =
      h.teacher_labels && h.regularizer == Regularizer::mean_teacher ? m.teacher.net : m.classifier;

  if (s.iter < h.pretrain_iters) {
    out.pretrain = true;
    Graph g;
    ClassifierLoss lc = classifier_pretrain_loss(g, m, x_c, labeled, h, s.iter, s.rng.stochastic, use_ru);
    auto grads = g.backward(lc.total);
    ad::adam_step(m.classifier_params(), grads, s.adam_c);
    out.r_c = g.value(lc.r_c).item();
    out.r_u = detail::value_or_zero(g, lc.r_u);
    out.alpha_u_eff = lc.alpha_u;
  } else {
    // Fake pairs from G and C; G's output is a constant for D and C.
    std::vector<Label> y_g = data::class_prior_sample(m.generator.classes, h.m_g, s.rng.prior);
    Tensor z = nn::sample_latent(h.m_g, m.generator.latent, s.rng.latent);
    PairBatch gen{nn::generate(m.generator, y_g, z), y_g};
    PairBatch c_pairs{x_c, sample_labels(nn::classifier_probs(labeler, x_c), s.rng.label_sampling)};

    PairBatch positives = labeled;
    if (s.has_unlabeled && h.pseudo_fraction > 0.0) {
      const auto pseudo_idx = s.unlabeled.next(h.m_d);
      PairBatch pseudo = pseudo_pair_augment(labeler, train.rows(pseudo_idx), h.pseudo_fraction, s.rng.pseudo);
      positives = concat(head(labeled, labeled.size() - pseudo.size()), pseudo);
    }

    {
      Graph g;
      Var ld = discriminator_loss(g, m, positives, c_pairs, gen, h.alpha);
      auto grads = g.backward(ld);
      ad::adam_step(m.discriminator_params(), grads, s.adam_d);
      out.loss_d = g.value(ld).item();
    }
    {
      Graph g;
      ClassifierLoss lc = classifier_loss(g, m, x_c, labeled, gen, h, s.iter, s.rng.stochastic, use_ru);
      auto grads = g.backward(lc.total);
      ad::adam_step(m.classifier_params(), grads, s.adam_c);
      out.loss_c_adv = g.value(lc.adversarial).item();
      out.r_c = g.value(lc.r_c).item();
      out.r_p = detail::value_or_zero(g, lc.r_p);
      out.r_u = detail::value_or_zero(g, lc.r_u);
      out.alpha_p_eff = lc.alpha_p;
      out.alpha_u_eff = lc.alpha_u;
    }
    {
      Graph g;
      Var lg = generator_loss(g, m, y_g, z, h.alpha, h.generator_loss);
      auto grads = g.backward(lg);
      ad::adam_step(m.generator_params(), grads, s.adam_g);
      out.loss_g = g.value(lg).item();
    }
  }
  nn::ema_update(m.teacher, m.classifier, h.ema_decay);
  ++s.iter;
  out.iter = s.iter;
  out.time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace tgan::game
