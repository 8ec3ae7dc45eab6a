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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"
#include "tgan/game.hpp"
#include "tgan/grad_suite.hpp"

namespace tgan {
namespace {

using ad::Graph;
using ad::Label;
using ad::Var;
using game::PairBatch;

constexpr double kLn2 = std::numbers::ln2;

game::ModelShape small_shape(std::size_t classes = 4) {
  game::ModelShape s;
  s.classes = classes;
  s.classifier_hidden = {16, 16};
  s.generator_hidden = {16, 16};
  s.disc_trunk = {16, 8};
  s.latent = 4;
  return s;
}

PairBatch random_pairs(std::size_t n, std::size_t k, RngStream& rng) {
  PairBatch b{testing::random_tensor({n, 2}, rng, 0.5), {}};
  for (std::size_t i = 0; i < n; ++i) b.y.push_back(static_cast<Label>(rng.uniform_int(k)));
  return b;
}

bool all_zero(const Tensor& t) {
  for (double v : t.data())
    if (v != 0.0) return false;
  return true;
}

/// Every tensor of `others` is absent from grads or has a zero gradient, and
/// some tensor of `own` has a nonzero gradient.
void expect_isolated(const ad::GradMap& grads, const std::vector<Tensor*>& own,
                     const std::vector<std::vector<Tensor*>>& others) {
  bool any = false;
  for (Tensor* p : own)
    if (auto it = grads.find(p); it != grads.end() && !all_zero(it->second)) any = true;
  EXPECT_TRUE(any);
  for (const auto& group : others)
    for (Tensor* p : group)
      if (auto it = grads.find(p); it != grads.end()) {
        EXPECT_TRUE(all_zero(it->second));
      }
}

class GameFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    m = game::make_model(small_shape(), RngStream(1, "model"));
    RngStream rng(2, "batches");
    pos = random_pairs(12, 4, rng);
    cp = random_pairs(12, 4, rng);
    gp = random_pairs(12, 4, rng);
    lab = random_pairs(12, 4, rng);
    h.alpha_p = {game::Schedule::Kind::constant, 0.3, 0, 0};
    h.alpha_u = {game::Schedule::Kind::constant, 1.0, 0, 0};
  }
  std::vector<Tensor*> teacher_params() { return game::TripleGanModel::ptrs(m.teacher.net.named("")); }

  game::TripleGanModel m;
  PairBatch pos, cp, gp, lab;
  game::GameHyperparams h;
};

// --- Schedules ------------------------------------------------------------------

TEST(Schedule, Examples) {
  game::Schedule s{game::Schedule::Kind::sigmoid_rampup, 2.0, 100, 50};
  EXPECT_EQ(game::schedule_value(s, 49), 0.0);
  EXPECT_NEAR(game::schedule_value(s, 50), 2.0 * std::exp(-5.0), 1e-15);
  EXPECT_NEAR(game::schedule_value(s, 50), 2.0 * 0.006738, 1e-6);
  EXPECT_EQ(game::schedule_value(s, 150), 2.0);
  EXPECT_EQ(game::schedule_value(s, 10000), 2.0);
  game::Schedule c{game::Schedule::Kind::constant, 0.7, 100, 0};
  for (std::uint64_t i : {0, 5, 500}) EXPECT_EQ(game::schedule_value(c, i), 0.7);
}

TEST(Schedule, MonotoneOnRampAndConstantOutside) {
  game::Schedule s{game::Schedule::Kind::sigmoid_rampup, 1.0, 200, 30};
  double prev = -1.0;
  for (std::uint64_t i = 0; i < 400; ++i) {
    const double v = game::schedule_value(s, i);
    EXPECT_GE(v, prev);
    if (i < 30) {
      EXPECT_EQ(v, 0.0);
    }
    if (i >= 230) {
      EXPECT_EQ(v, 1.0);
    }
    prev = v;
  }
}

// --- Losses ---------------------------------------------------------------------

TEST_F(GameFixture, DiscriminatorLossAtZeroInitIsTwoLn2) {
  nn::zero_all(m.discriminator.named(""));
  for (double alpha : {0.1, 0.5, 0.9}) {
    Graph g;
    EXPECT_NEAR(g.value(game::discriminator_loss(g, m, pos, cp, gp, alpha)).item(), 2.0 * kLn2, 1e-15);
  }
}

TEST(Losses, PerfectDiscriminatorLossNearZero) {
  game::ModelShape s = small_shape(2);
  s.variant = nn::DiscVariant::concat;
  s.disc_trunk = {1};
  game::TripleGanModel m = game::make_model(s, RngStream(1, "m"));
  nn::zero_all(m.discriminator.named(""));
  // Input columns: x0, x1, onehot0, onehot1. Label 0 scores +500, label 1 goes negative.
  m.discriminator.trunk.layers[0].w.at(2, 0) = 500.0;
  m.discriminator.trunk.layers[0].w.at(3, 0) = -500.0;
  m.discriminator.head.w[0] = 1.0;
  PairBatch real{Tensor::matrix(3, 2), {0, 0, 0}}, fake{Tensor::matrix(3, 2), {1, 1, 1}};
  Graph g;
  EXPECT_LT(g.value(game::discriminator_loss(g, m, real, fake, fake, 0.5)).item(), 1e-10);
}

TEST_F(GameFixture, GradientIsolation) {
  const auto c = m.classifier_params(), gen = m.generator_params(), d = m.discriminator_params(),
             t = teacher_params();
  {
    Graph g;
    expect_isolated(g.backward(game::discriminator_loss(g, m, pos, cp, gp, 0.5)), d, {c, gen, t});
  }
  for (auto kind : {game::Regularizer::none, game::Regularizer::entropy, game::Regularizer::consistency,
                    game::Regularizer::mean_teacher}) {
    h.regularizer = kind;
    Graph g;
    RngStream r(3, "noise");
    expect_isolated(g.backward(game::classifier_loss(g, m, cp.x, lab, gp, h, 0, r).total), c, {gen, d, t});
  }
  for (auto v : {game::GeneratorLoss::minimax, game::GeneratorLoss::nonsaturating}) {
    Graph g;
    RngStream r(4, "z");
    const Tensor z = nn::sample_latent(gp.size(), m.generator.latent, r);
    expect_isolated(g.backward(game::generator_loss(g, m, gp.y, z, 0.5, v)), gen, {c, d, t});
  }
}

TEST_F(GameFixture, ClassifierLossReducesToAdversarialPlusRc) {
  h.alpha_p = {game::Schedule::Kind::sigmoid_rampup, 0.3, 500, 1000};
  h.regularizer = game::Regularizer::none;
  Graph g;
  RngStream r(3, "noise");
  const game::ClassifierLoss l = game::classifier_loss(g, m, cp.x, lab, gp, h, 10, r);
  EXPECT_FALSE(l.r_p.valid());
  EXPECT_FALSE(l.r_u.valid());
  EXPECT_EQ(l.alpha_p, 0.0);
  EXPECT_EQ(g.value(l.total).item(), g.value(l.adversarial).item() + g.value(l.r_c).item());
}

TEST_F(GameFixture, LabelIndependentDiscriminatorGivesZeroAdversarialGradient) {
  m.discriminator.embed.fill(0.0);
  Graph g;
  RngStream r(3, "noise");
  h.regularizer = game::Regularizer::none;
  const game::ClassifierLoss l = game::classifier_loss(g, m, cp.x, lab, gp, h, 0, r);
  EXPECT_NE(g.value(l.adversarial).item(), 0.0);
  const auto grads = g.backward(l.adversarial);
  for (Tensor* p : m.classifier_params())
    for (double v : grads.at(p).data()) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST_F(GameFixture, MarginalizedAdversarialTermMatchesMonteCarlo) {
  // One x row: the exact term is α Σ_y p_c(y|x) log(1 - D(x,y)).
  const Tensor x = cp.x.reshaped({12, 2});
  Tensor one = Tensor::matrix(1, 2);
  one.at(0, 0) = x.at(0, 0);
  one.at(0, 1) = x.at(0, 1);
  m.classifier.input_noise = 0.0;
  h.regularizer = game::Regularizer::none;
  Graph g;
  RngStream r(3, "noise");
  const double exact = g.value(game::classifier_loss(g, m, one, lab, gp, h, 0, r).adversarial).item() / h.alpha;

  const Tensor p = nn::classifier_probs(m.classifier, one);
  const Tensor dl = game::frozen_all_label_logits(m.discriminator, one);
  RngStream draw(5, "mc");
  const int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::size_t y = draw.categorical(p.row(0));
    const double v = -ad::detail::softplus(dl.at(0, y));
    s += v;
    s2 += v * v;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - exact), 3.0 * se + 1e-12);
}

TEST(Losses, UnlabeledRegularizerExamples) {
  game::TripleGanModel m = game::make_model(small_shape(10), RngStream(1, "m"));
  m.classifier.input_noise = 0.0;
  RngStream rng(2, "x");
  const Tensor x = testing::random_tensor({6, 2}, rng);
  {
    game::TripleGanModel z = m;
    nn::zero_all(z.classifier.named(""));
    Graph g;
    EXPECT_NEAR(g.value(game::unlabeled_regularizer(g, game::Regularizer::entropy, z, x, rng)).item(),
                std::log(10.0), 1e-12);
  }
  Graph g;
  EXPECT_EQ(g.value(game::unlabeled_regularizer(g, game::Regularizer::consistency, m, x, rng)).item(), 0.0);
  m.teacher.net = m.classifier;
  EXPECT_EQ(g.value(game::unlabeled_regularizer(g, game::Regularizer::mean_teacher, m, x, rng)).item(), 0.0);
  m.classifier.input_noise = 0.2;
  EXPECT_GT(g.value(game::unlabeled_regularizer(g, game::Regularizer::consistency, m, x, rng)).item(), 0.0);
  EXPECT_THROW(game::unlabeled_regularizer(g, game::Regularizer::none, m, x, rng), ContractError);
}

TEST_F(GameFixture, GeneratorLossAtHalfDiscriminator) {
  nn::zero_all(m.discriminator.named(""));
  RngStream r(4, "z");
  const Tensor z = nn::sample_latent(gp.size(), m.generator.latent, r);
  for (double alpha : {0.3, 0.5}) {
    Graph g;
    EXPECT_NEAR(g.value(game::generator_loss(g, m, gp.y, z, alpha, game::GeneratorLoss::minimax)).item(),
                -(1.0 - alpha) * kLn2, 1e-15);
    EXPECT_NEAR(g.value(game::generator_loss(g, m, gp.y, z, alpha, game::GeneratorLoss::nonsaturating)).item(),
                (1.0 - alpha) * kLn2, 1e-15);
  }
}

TEST_F(GameFixture, ClassCountMismatchIsDimensionError) {
  game::TripleGanModel other = game::make_model(small_shape(5), RngStream(1, "model"));
  other.classifier = m.classifier;
  Graph g;
  RngStream r(3, "noise");
  EXPECT_THROW(game::classifier_loss(g, other, cp.x, lab, gp, h, 0, r), DimensionError);
}

TEST(GradSuite, SmallNetworksPass) {
  gradsuite::Options opt;
  opt.shape = small_shape();
  opt.coords = 0;
  for (const auto& c : gradsuite::run(opt)) EXPECT_LT(c.max_rel_error, 1e-4) << c.name;
}

// --- Pseudo pairs ----------------------------------------------------------------

TEST_F(GameFixture, PseudoPairExamples) {
  RngStream r(6, "pseudo");
  EXPECT_TRUE(game::pseudo_pair_augment(m.classifier, cp.x, 0.0, r).empty());
  EXPECT_EQ(game::pseudo_pair_augment(m.classifier, cp.x, 0.5, r).size(), 6u);
  EXPECT_THROW(game::pseudo_pair_augment(m.classifier, cp.x, 1.5, r), ContractError);

  // Confident classifier: last-layer bias dominates in favour of class 2.
  nn::ClassifierParams sure = m.classifier;
  sure.net.layers.back().b[2] = 1e3;
  const PairBatch b = game::pseudo_pair_augment(sure, cp.x, 1.0, r);
  for (Label y : b.y) EXPECT_EQ(y, 2);
  EXPECT_EQ(b.x, cp.x);
}

TEST_F(GameFixture, PseudoLabelFrequenciesMatchPosterior) {
  const std::size_t n = 100000;
  Tensor x = Tensor::matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    x.at(i, 0) = cp.x.at(0, 0);
    x.at(i, 1) = cp.x.at(0, 1);
  }
  RngStream r(7, "pseudo");
  const PairBatch b = game::pseudo_pair_augment(m.classifier, x, 1.0, r);
  const Tensor p = nn::classifier_probs(m.classifier, head(cp, 1).x);
  for (std::size_t k = 0; k < 4; ++k) {
    const double f = static_cast<double>(std::count(b.y.begin(), b.y.end(), static_cast<Label>(k))) / n;
    EXPECT_NEAR(f, p[k], 0.01);
  }
}

// --- Training step ------------------------------------------------------------------

struct StepSetup {
  data::Dataset train = data::make_mixture(4, 40, 0.75, 0.08, 1);
  game::GameHyperparams h;
  game::AdamConfigs opt;

  StepSetup() {
    h.m_c = h.m_d = h.m_g = 16;
    h.iters = 200;
    h.pretrain_iters = 5;
    h.alpha_p = {game::Schedule::Kind::sigmoid_rampup, 0.3, 20, 10};
    h.alpha_u = {game::Schedule::Kind::sigmoid_rampup, 1.0, 20, 0};
  }
  game::TrainState state(bool low_data = false, std::uint64_t seed = 3) const {
    return game::make_train_state(h, game::make_model(small_shape(), RngStream(seed, "init")), opt,
                                  data::split_semi(train, 4, seed, low_data), seed);
  }
};

TEST(TrainStep, ZeroLearningRatesLeavePlayersUnchanged) {
  StepSetup su;
  su.opt.c.lr = su.opt.d.lr = su.opt.g.lr = 0.0;
  game::TrainState s = su.state();
  const game::TripleGanModel before = s.model;
  for (int i = 0; i < 8; ++i) game::train_step(s, su.train);
  EXPECT_EQ(s.iter, 8u);
  game::TripleGanModel after = s.model;
  game::TripleGanModel ref = before;
  auto a = after.named(), r = ref.named();
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].first.rfind("t.", 0) == 0) EXPECT_LT(max_abs_diff(*a[k].second, *r[k].second), 1e-15);
    else EXPECT_EQ(*a[k].second, *r[k].second) << a[k].first;
  }
}

TEST(TrainStep, BitwiseDeterministic) {
  StepSetup su;
  game::TrainState a = su.state(), b = su.state();
  for (int i = 0; i < 100; ++i) {
    const auto ma = game::train_step(a, su.train), mb = game::train_step(b, su.train);
    ASSERT_EQ(ma.loss_d, mb.loss_d);
    ASSERT_EQ(ma.loss_g, mb.loss_g);
    ASSERT_EQ(ma.loss_c_adv, mb.loss_c_adv);
    ASSERT_EQ(ma.r_c, mb.r_c);
    ASSERT_EQ(ma.r_p, mb.r_p);
    ASSERT_EQ(ma.r_u, mb.r_u);
  }
  auto pa = a.model.named(), pb = b.model.named();
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(*pa[k].second, *pb[k].second);
}

TEST(TrainStep, PhasesAndSchedules) {
  StepSetup su;
  game::TrainState s = su.state();
  const Tensor d0 = s.model.discriminator.head.w;
  for (int i = 0; i < 5; ++i) {
    const auto m = game::train_step(s, su.train);
    EXPECT_TRUE(m.pretrain);
    EXPECT_EQ(m.loss_d, 0.0);
  }
  EXPECT_EQ(s.model.discriminator.head.w, d0);
  for (int i = 5; i < 40; ++i) {
    const auto m = game::train_step(s, su.train);
    EXPECT_FALSE(m.pretrain);
    EXPECT_GT(m.loss_d, 0.0);
    if (i < 10) EXPECT_EQ(m.alpha_p_eff, 0.0);
    else EXPECT_GT(m.alpha_p_eff, 0.0);
  }
  EXPECT_NE(s.model.discriminator.head.w, d0);
}

TEST(TrainStep, PretrainOnlyIsBaselineMode) {
  StepSetup su;
  su.h.iters = su.h.pretrain_iters = 30;
  game::TrainState s = su.state();
  const game::TripleGanModel before = s.model;
  for (int i = 0; i < 30; ++i) game::train_step(s, su.train);
  EXPECT_EQ(s.model.generator.net.layers[0].w, before.generator.net.layers[0].w);
  EXPECT_EQ(s.model.discriminator.head.w, before.discriminator.head.w);
  EXPECT_NE(s.model.classifier.net.layers[0].w, before.classifier.net.layers[0].w);
}

TEST(TrainStep, LowDataDropsUnlabeledTerms) {
  StepSetup su;
  game::TrainState s = su.state(true);
  EXPECT_FALSE(s.has_unlabeled);
  for (int i = 0; i < 30; ++i) {
    const auto m = game::train_step(s, su.train);
    EXPECT_EQ(m.r_u, 0.0);
    EXPECT_EQ(m.alpha_u_eff, 0.0);
    EXPECT_TRUE(std::isfinite(m.loss_d));
  }
}

TEST(TrainStep, LinearDecayReachesZero) {
  StepSetup su;
  su.h.iters = 20;
  game::TrainState s = su.state();
  s.linear_lr_decay = true;
  for (int i = 0; i < 20; ++i) game::train_step(s, su.train);
  EXPECT_NEAR(s.adam_c.config.lr, su.opt.c.lr / 20.0, 1e-15);
}

}  // namespace
}  // namespace tgan
