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
#include <string>
#include <vector>

#include "tgan/data.hpp"
#include "tgan/game.hpp"
#include "tgan/grad_check.hpp"

// Finite-difference checks of every composite loss on real networks.
namespace tgan::gradsuite {

struct Options {
  game::ModelShape shape;
  std::size_t batch = 16;
  /// Coordinates probed per parameter tensor; 0 probes all.
  std::size_t coords = 24;
  double h = 1e-5;
  std::uint64_t seed = 7;
};

struct Case {
  std::string name;
  double max_rel_error = 0.0;
  double seconds = 0.0;
};

namespace detail {

inline game::PairBatch random_pairs(std::size_t n, std::size_t dim, std::size_t classes, RngStream& rng) {
  game::PairBatch b{Tensor::matrix(n, dim), {}};
  for (double& v : b.x.data()) v = 2.0 * rng.uniform() - 1.0;
  for (std::size_t i = 0; i < n; ++i) b.y.push_back(static_cast<ad::Label>(rng.uniform_int(classes)));
  return b;
}

/// Teacher distinct from the student so the mean-teacher term is not flat.
inline game::TripleGanModel suite_model(const game::ModelShape& shape, std::uint64_t seed) {
  game::TripleGanModel m = game::make_model(shape, RngStream(seed, "grad_suite.model"));
  RngStream jitter(seed, "grad_suite.teacher");
  for (auto& [n, t] : m.teacher.net.named(""))
    for (double& v : t->data()) v += 0.05 * jitter.normal();
  return m;
}

}  // namespace detail

inline std::vector<Case> run(const Options& opt = {}) {
  using Clock = std::chrono::steady_clock;
  std::vector<Case> out;
  RngStream rng(opt.seed, "grad_suite.data");
  const auto& s = opt.shape;
  const game::PairBatch pos = detail::random_pairs(opt.batch, s.input_dim, s.classes, rng);
  const game::PairBatch cp = detail::random_pairs(opt.batch, s.input_dim, s.classes, rng);
  const game::PairBatch gp = detail::random_pairs(opt.batch, s.input_dim, s.classes, rng);
  const game::PairBatch lab = detail::random_pairs(opt.batch, s.input_dim, s.classes, rng);
  const Tensor z = nn::sample_latent(opt.batch, s.latent, rng);
  const ad::GradCheckOptions gc{opt.h, opt.coords, opt.seed};

  auto record = [&](const std::string& name, const ad::LossBuilder& b, std::vector<Tensor*> params) {
    const auto t0 = Clock::now();
    const double err = ad::grad_check(b, params, gc);
    out.push_back({name, err, std::chrono::duration<double>(Clock::now() - t0).count()});
  };

  for (auto variant : {nn::DiscVariant::projection, nn::DiscVariant::concat}) {
    game::ModelShape shape = s;
    shape.variant = variant;
    game::TripleGanModel m = detail::suite_model(shape, opt.seed);
    record(std::string("discriminator_loss[") + (variant == nn::DiscVariant::projection ? "projection" : "concat") +
               "]",
           [&](ad::Graph& g) { return game::discriminator_loss(g, m, pos, cp, gp, 0.5); },
           m.discriminator_params());
  }

  {
    game::TripleGanModel m = detail::suite_model(s, opt.seed);
    game::GameHyperparams h;
    h.alpha_p = {game::Schedule::Kind::constant, 0.3, 0, 0};
    h.alpha_u = {game::Schedule::Kind::constant, 1.0, 0, 0};
    const RngStream noise(opt.seed, "grad_suite.noise");
    const std::pair<game::Regularizer, const char*> kinds[] = {{game::Regularizer::entropy, "entropy"},
                                                               {game::Regularizer::consistency, "consistency"},
                                                               {game::Regularizer::mean_teacher, "mean_teacher"}};
    for (auto [kind, label] : kinds) {
      h.regularizer = kind;
      record(std::string("classifier_loss[") + label + "]",
             [&](ad::Graph& g) {
               RngStream r = noise;
               return game::classifier_loss(g, m, cp.x, lab, gp, h, 0, r).total;
             },
             m.classifier_params());
    }
    record("classifier_cross_entropy",
           [&](ad::Graph& g) {
             RngStream r = noise;
             return ad::cross_entropy(
                 g, nn::classifier_forward(g, m.classifier, g.constant(lab.x), nn::Mode::train, r), lab.y);
           },
           m.classifier_params());
  }

  for (auto variant : {game::GeneratorLoss::minimax, game::GeneratorLoss::nonsaturating}) {
    game::TripleGanModel m = detail::suite_model(s, opt.seed);
    record(std::string("generator_loss[") + (variant == game::GeneratorLoss::minimax ? "minimax" : "nonsaturating") +
               "]",
           [&](ad::Graph& g) { return game::generator_loss(g, m, gp.y, z, 0.5, variant); },
           m.generator_params());
  }
  return out;
}

inline double worst(const std::vector<Case>& cases) {
  double w = 0.0;
  for (const auto& c : cases) w = std::max(w, c.max_rel_error);
  return w;
}

}  // namespace tgan::gradsuite
