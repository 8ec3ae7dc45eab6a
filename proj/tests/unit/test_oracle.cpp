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

#include "tgan/oracle.hpp"

namespace tgan::oracle {
namespace {

constexpr double kLn2 = std::numbers::ln2;

TEST(Divergences, KlExamples) {
  RngStream rng(1, "kl");
  const Tensor q = random_joint(4, 3, rng);
  EXPECT_EQ(kl(q, q), 0.0);
  const Tensor a = Tensor::matrix({{0.5, 0.5}}), b = Tensor::matrix({{0.25, 0.75}});
  EXPECT_NEAR(kl(a, b), 0.5 * kLn2 + 0.5 * std::log(2.0 / 3.0), 1e-15);
  EXPECT_NEAR(kl(a, b), 0.143841, 1e-6);
  EXPECT_TRUE(std::isinf(kl(a, Tensor::matrix({{1.0, 0.0}}))));
  EXPECT_EQ(kl(Tensor::matrix({{1.0, 0.0}}), a), std::log(2.0));
  EXPECT_THROW(kl(a, Tensor::matrix({{1.0}})), DimensionError);
}

TEST(Divergences, JsdBoundedSymmetric) {
  RngStream rng(2, "jsd");
  for (int k = 0; k < 50; ++k) {
    const Tensor a = random_joint(4, 3, rng), b = random_joint(4, 3, rng);
    const double j = jsd(a, b);
    EXPECT_GE(j, 0.0);
    EXPECT_LE(j, kLn2 + 1e-15);
    EXPECT_NEAR(j, jsd(b, a), 1e-15);
  }
  EXPECT_NEAR(jsd(Tensor::matrix({{1.0, 0.0}}), Tensor::matrix({{0.0, 1.0}})), kLn2, 1e-15);
}

TEST(Marginals, Examples) {
  const Marginals u = marginals(Tensor::matrix({{0.25, 0.25}, {0.25, 0.25}}));
  EXPECT_EQ(u.px, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(u.py, (std::vector<double>{0.5, 0.5}));
  const std::vector<double> fx{0.2, 0.3, 0.5}, fy{0.6, 0.4};
  Tensor r = Tensor::matrix(3, 2);
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = 0; y < 2; ++y) r.at(x, y) = fx[x] * fy[y];
  const Marginals m = marginals(r);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(m.px[i], fx[i], 1e-15);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(m.py[i], fy[i], 1e-15);
}

TEST(OptimalDiscriminator, Examples) {
  RngStream rng(3, "dstar");
  const Tensor p = random_joint(4, 3, rng);
  const Tensor half = optimal_discriminator(p, p, p, 0.3);
  for (double v : half.data()) EXPECT_NEAR(v, 0.5, 1e-15);
  // One cell with p = 0.2, p_α = 0.1.
  const Tensor p2 = Tensor::matrix({{0.2, 0.8}});
  const Tensor pc = Tensor::matrix({{0.1, 0.9}});
  const Tensor d = optimal_discriminator(p2, pc, pc, 0.5);
  EXPECT_NEAR(d[0], 2.0 / 3.0, 1e-15);
}

TEST(OptimalDiscriminator, NumericalMaximizationAgrees) {
  RngStream rng(4, "lemma1");
  for (int k = 0; k < 3; ++k) {
    const TabularGame g = random_game(4, 3, 0.5, rng);
    const Tensor pc = p_c(g), pg = p_g(g);
    const Tensor dstar = optimal_discriminator(g.p, pc, pg, g.alpha);
    EXPECT_LT(max_abs(maximize_discriminator(g.p, mixture(pc, pg, g.alpha)), dstar), 1e-3);
  }
}

TEST(ExactU, Examples) {
  RngStream rng(5, "u");
  const TabularGame g = random_game(4, 3, 0.5, rng);
  const Tensor pa = p_alpha(g);
  const Tensor half(g.p.shape(), 0.5);
  EXPECT_NEAR(exact_U(g.p, pa, half).value, -2.0 * kLn2, 1e-14);
  const Tensor dstar = optimal_discriminator(g.p, g.p, g.p, 0.5);
  EXPECT_NEAR(exact_U(g.p, g.p, dstar).value, -kLn4, 1e-14);
  Tensor zero(g.p.shape(), 0.0);
  const UValue bad = exact_U(g.p, pa, zero);
  EXPECT_FALSE(bad.finite);
  EXPECT_TRUE(std::isinf(bad.value));
  Tensor logits = Tensor(g.p.shape(), 0.3);
  Tensor probs = logits;
  for (double& v : probs.data()) v = ad::detail::sigmoid(v);
  EXPECT_NEAR(exact_U_logits(g.p, pa, logits), exact_U(g.p, pa, probs).value, 1e-14);
}

TEST(ExactV, Examples) {
  RngStream rng(6, "v");
  const Tensor p = random_joint(4, 3, rng);
  const VResult eq = exact_V(p, p, p, 0.5);
  EXPECT_NEAR(eq.plug_in, -kLn4, 1e-12);
  EXPECT_LT(eq.difference, 1e-12);
  // Disjoint supports: p on the first row, p_c = p_g on the second.
  const Tensor pd = Tensor::matrix({{0.5, 0.5}, {0.0, 0.0}});
  const Tensor qd = Tensor::matrix({{0.0, 0.0}, {0.5, 0.5}});
  const VResult dis = exact_V(pd, qd, qd, 0.5);
  EXPECT_NEAR(dis.jsd_form, 0.0, 1e-15);
  EXPECT_NEAR(dis.plug_in, 0.0, 1e-15);
  for (int k = 0; k < 20; ++k) {
    const TabularGame g = random_game(4, 3, 0.2 + 0.6 * rng.uniform(), rng);
    const VResult v = exact_V(g.p, p_c(g), p_g(g), g.alpha);
    EXPECT_LT(v.difference, 1e-10);
    EXPECT_GE(v.plug_in, -kLn4 - 1e-12);
  }
}

TEST(RpKl, RandomAndUniformCases) {
  RngStream rng(7, "rpkl");
  for (int k = 0; k < 5; ++k) {
    const TabularGame g = random_game(4, 3, 0.5, rng);
    const RpKlReport r = rp_kl_equivalence_check(g, rng);
    EXPECT_LT(r.grad_gap, 1e-10);
    EXPECT_LT(r.value_drift, 1e-10);
  }
  TabularGame u = random_game(4, 3, 0.5, rng);
  u.c_logits.fill(0.0);
  const RpKlReport r = rp_kl_equivalence_check(u, rng, 0);
  EXPECT_NEAR(r.r_p, std::log(3.0), 1e-14);
  EXPECT_LT(r.grad_gap, 1e-10);
}

TEST(Constructed, MatchedGameSharesMarginals) {
  RngStream rng(8, "constructed");
  for (int k = 0; k < 10; ++k) {
    const ConstructedGame g = construct_matched_game(4, 3, 0.2 + 0.6 * rng.uniform(), rng);
    EXPECT_LT(max_abs(mixture(g.p_c, g.p_g, g.alpha), g.p), 1e-10);
    EXPECT_LT(marginal_gap(g.p, g.p_c), 1e-10);
    EXPECT_LT(marginal_gap(g.p, g.p_g), 1e-10);
    EXPECT_GT(max_abs(g.p_c, g.p), 1e-4);
  }
}

TEST(Equilibrium, TargetIsAFixedPoint) {
  RngStream rng(9, "fixed");
  const Tensor p = random_joint(4, 3, rng);
  EquilibriumOptions opt;
  opt.init_at_target = true;
  opt.iters = 300;
  for (double lambda : {0.0, 0.1}) {
    opt.lambda_extra = lambda;
    const EquilibriumResult r = solve_equilibrium(p, 0.5, 0.5, rng, opt);
    for (const auto& d : r.trajectory) {
      EXPECT_LT(d.dist_c, 1e-9);
      EXPECT_LT(d.dist_g, 1e-9);
    }
  }
}

TEST(Equilibrium, ConvergesFromRandomStarts) {
  RngStream targets(10, "targets");
  const Tensor p = random_joint(4, 3, targets);
  for (std::uint64_t s = 0; s < 5; ++s) {
    RngStream rng(s, "start");
    const EquilibriumResult r = solve_equilibrium(p, 0.5, 0.5, rng);
    EXPECT_FALSE(r.diverged);
    EXPECT_LT(r.final_distances().dist_c, 0.02);
    EXPECT_LT(r.final_distances().dist_g, 0.02);
  }
}

TEST(Equilibrium, ZeroLambdaReproducesBaseTrajectory) {
  RngStream rng(11, "inv");
  const Tensor p = random_joint(4, 3, rng);
  EquilibriumOptions opt;
  opt.iters = 200;
  const InvarianceReport r = regularizer_invariance_check(p, 0.5, 0.5, 0.0, 3, opt);
  ASSERT_EQ(r.base.trajectory.size(), r.regularized.trajectory.size());
  EXPECT_EQ(r.base.c_logits, r.regularized.c_logits);
  EXPECT_EQ(r.base.g_logits, r.regularized.g_logits);
  EXPECT_THROW(regularizer_invariance_check(p, 0.5, 0.5, -1.0, 3, opt), ContractError);
}

TEST(Equilibrium, RejectsBadInputs) {
  RngStream rng(12, "bad");
  EXPECT_THROW(solve_equilibrium(Tensor::matrix({{0.5, 0.6}}), 0.5, 0.5, rng), ContractError);
  EXPECT_THROW(solve_equilibrium(random_joint(2, 2, rng), 1.0, 0.5, rng), ContractError);
}

TEST(Checks, SuiteEntryPointsPass) {
  for (const CheckResult& r : {check_lemma1(2, 5, 1), check_lemma2(20, 2), check_marginals(5, 3), check_rp_kl(5, 4)}) {
    EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
    EXPECT_FALSE(r.detail.empty());
  }
}

}  // namespace
}  // namespace tgan::oracle
