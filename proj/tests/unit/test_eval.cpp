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

#include "tgan/eval.hpp"
#include "tgan/training.hpp"
#include "test_util.hpp"

namespace tgan::eval {
namespace {

constexpr std::size_t kK = 4;

data::Dataset small_mixture(double sigma = 0.05, std::uint64_t seed = 1) {
  return data::make_mixture(kK, 200, 0.75, sigma, seed);
}

/// Single-layer generator whose output for class c is exactly the class mean.
nn::GeneratorParams mean_generator() {
  RngStream rng(3, "gen");
  const std::vector<std::size_t> hidden;
  nn::GeneratorParams g = nn::make_generator(kK, 2, hidden, 2, rng);
  nn::zero_all(g.named(""));
  for (std::size_t c = 0; c < kK; ++c) {
    const auto mu = data::mixture_mean(c, kK, 0.75, 2);
    for (std::size_t k = 0; k < 2; ++k) g.net.layers[0].w.at(c, k) = std::atanh(mu[k]);
  }
  return g;
}

nn::GeneratorParams zero_generator() {
  RngStream rng(4, "gen");
  const std::vector<std::size_t> hidden{8};
  nn::GeneratorParams g = nn::make_generator(kK, 2, hidden, 2, rng);
  nn::zero_all(g.named(""));
  return g;
}

const nn::ClassifierParams& judge() {
  static const nn::ClassifierParams j = [] {
    OracleTrainConfig cfg;
    cfg.iters = 400;
    return train_oracle_classifier(small_mixture(), 5, cfg);
  }();
  return j;
}

TEST(ErrorRate, PerfectAndConstantPredictors) {
  const data::Dataset d = small_mixture();
  EXPECT_LT(error_rate(judge(), d), 1e-12);
  RngStream rng(1, "c");
  const std::vector<std::size_t> w{2, kK};
  nn::ClassifierParams constant = nn::make_classifier(w, 0.0, 0.0, rng);
  nn::zero_all(constant.named(""));
  constant.net.layers[0].b[2] = 1.0;
  EXPECT_DOUBLE_EQ(error_rate(constant, d), static_cast<double>(kK - 1) / kK);
}

TEST(ErrorRate, EmptyDatasetIsAnError) {
  data::Dataset empty;
  empty.classes = kK;
  EXPECT_THROW(error_rate(judge(), empty), ContractError);
}

TEST(Fidelity, MeanGeneratorScoresOne) {
  RngStream rng(2, "fid");
  const Fidelity f = conditional_fidelity(mean_generator(), judge(), 100, rng);
  EXPECT_DOUBLE_EQ(f.overall, 1.0);
  ASSERT_EQ(f.per_class.size(), kK);
}

TEST(Fidelity, ConstantGeneratorScoresOneOverK) {
  RngStream rng(2, "fid");
  const Fidelity f = conditional_fidelity(zero_generator(), judge(), 100, rng);
  EXPECT_DOUBLE_EQ(f.overall, 1.0 / kK);
  EXPECT_THROW(conditional_fidelity(zero_generator(), judge(), 0, rng), ContractError);
}

TEST(Mmd, IdenticalSetsGiveZero) {
  RngStream rng(3, "mmd");
  const Tensor x = testing::random_tensor({50, 2}, rng, 1.0);
  EXPECT_LT(std::abs(mmd2_biased(x, x, 0.5)), 1e-12);
}

TEST(Mmd, SeparatedGaussiansGiveLargeValue) {
  RngStream rng(4, "mmd");
  Tensor x = Tensor::matrix(100, 2), y = Tensor::matrix(100, 2);
  for (double& v : x.data()) v = 0.1 * rng.normal();
  for (double& v : y.data()) v = 1.0 + 0.1 * rng.normal();
  EXPECT_GT(mmd2_unbiased(x, y, 0.1), 0.5);
  EXPECT_GT(mmd2_biased(x, y, 0.1), 0.5);
}

TEST(Mmd, BiasedEstimatorNonNegative) {
  RngStream rng(5, "mmd");
  for (int k = 0; k < 20; ++k) {
    const Tensor x = testing::random_tensor({20, 2}, rng, 1.0);
    const Tensor y = testing::random_tensor({30, 2}, rng, 1.0);
    EXPECT_GE(mmd2_biased(x, y, 0.7), -1e-15);
  }
}

TEST(Mmd, InputValidation) {
  const Tensor x = Tensor::matrix(10, 2), y = Tensor::matrix(12, 2), z = Tensor::matrix(10, 3);
  EXPECT_THROW(mmd2_unbiased(x, y, 1.0), DimensionError);
  EXPECT_THROW(mmd2_biased(x, z, 1.0), DimensionError);
  EXPECT_THROW(mmd2_biased(x, x, 0.0), ContractError);
  EXPECT_THROW(mmd2_biased(Tensor::matrix(1, 2), x, 1.0), ContractError);
}

TEST(Mmd, MedianBandwidth) {
  // Three collinear points: pairwise distances 1, 1, 2.
  const Tensor x = Tensor::matrix({{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}});
  EXPECT_DOUBLE_EQ(median_bandwidth(x), 1.0);
  EXPECT_THROW(median_bandwidth(Tensor::matrix(1, 2)), ContractError);
}

TEST(Mmd, PerClassAndReference) {
  const data::Dataset d = small_mixture();
  const double h = median_bandwidth(d.features);
  RngStream rng(6, "mmd");
  const auto gen = mmd2_per_class(mean_generator(), d, h, 100, rng, MmdEstimator::biased);
  const auto ref = mmd2_real_reference(d, h, rng);
  ASSERT_EQ(gen.size(), kK);
  ASSERT_EQ(ref.size(), kK);
  for (std::size_t c = 0; c < kK; ++c) {
    EXPECT_GE(ref[c], 0.0);
    EXPECT_GE(gen[c], 0.0);
  }
}

TEST(Quality, MeanGeneratorVersusZeroGenerator) {
  const data::Dataset d = small_mixture();
  QualityOptions opt;
  opt.fidelity_per_class = 100;
  opt.mmd_draws = 2;
  opt.reference_splits = 4;
  const GenerationQuality good = generation_quality(mean_generator(), d, judge(), 7, opt);
  const GenerationQuality bad = generation_quality(zero_generator(), d, judge(), 7, opt);
  EXPECT_DOUBLE_EQ(good.fidelity.overall, 1.0);
  EXPECT_LT(good.mean_generated(), bad.mean_generated());
  EXPECT_NEAR(good.mean_reference(), bad.mean_reference(), 1e-15);
  EXPECT_GT(good.bandwidth, 0.0);
}

TEST(Interpolation, EndpointsAndConstantPath) {
  RngStream rng(8, "interp");
  const std::vector<std::size_t> hidden{8};
  const nn::GeneratorParams g = nn::make_generator(kK, 3, hidden, 2, rng);
  const std::vector<double> z0{0.1, -0.4, 0.7}, z1{-1.0, 0.3, 0.2};
  const Tensor path = latent_interpolation(g, 1, z0, z1, 2);
  const std::vector<Label> y{1};
  EXPECT_EQ(path.row(0)[0], nn::generate(g, y, Tensor::matrix({{0.1, -0.4, 0.7}})).row(0)[0]);
  EXPECT_EQ(path.row(1)[1], nn::generate(g, y, Tensor::matrix({{-1.0, 0.3, 0.2}})).row(0)[1]);
  const Tensor flat = latent_interpolation(g, 2, z0, z0, 5);
  for (std::size_t s = 1; s < 5; ++s)
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(flat.at(s, k), flat.at(0, k));
  EXPECT_THROW(latent_interpolation(g, 0, z0, z1, 1), ContractError);
  EXPECT_THROW(latent_interpolation(g, 0, std::vector<double>{1.0}, z1, 3), DimensionError);
}

TEST(Interpolation, StepsRespectLipschitzBound) {
  RngStream rng(9, "lip");
  const std::vector<std::size_t> hidden{16, 16};
  const nn::GeneratorParams g = nn::make_generator(kK, 3, hidden, 2, rng);
  const double lip = generator_lipschitz_bound(g);
  const std::vector<double> z0{1.0, -1.0, 0.5}, z1{-0.5, 2.0, -1.5};
  constexpr std::size_t steps = 11;
  const Tensor path = latent_interpolation(g, 0, z0, z1, steps);
  double dz = 0.0;
  for (std::size_t k = 0; k < 3; ++k) dz += (z1[k] - z0[k]) * (z1[k] - z0[k]);
  dz = std::sqrt(dz) / static_cast<double>(steps - 1);
  for (std::size_t s = 1; s < steps; ++s) {
    const double step = std::sqrt(sq_dist(path.row(s), path.row(s - 1)));
    EXPECT_LE(step, lip * dz + 1e-12);
  }
}

TEST(Judge, DefaultMixtureIsNearlySeparable) {
  const train::Datasets d = train::make_datasets(cfg::DataConfig{});
  OracleTrainConfig cfg;
  cfg.iters = 600;
  const nn::ClassifierParams j = train_oracle_classifier(d.train, 11, cfg);
  EXPECT_LT(error_rate(j, d.test), 0.02);
}

TEST(Judge, NoiselessMixtureIsPerfect) {
  const data::Dataset d = data::make_mixture(kK, 20, 0.75, 0.0, 2);
  OracleTrainConfig cfg;
  cfg.iters = 300;
  EXPECT_EQ(error_rate(train_oracle_classifier(d, 12, cfg), d), 0.0);
}

}  // namespace
}  // namespace tgan::eval
