// Copyright 2026 The hsid Authors
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

#include "hsid/noisy.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "hsid/error.hpp"
#include "hsid/numerics.hpp"
#include "hsid/rng.hpp"
#include "hsid/simulator.hpp"
#include "oracles.hpp"

namespace hsid {
namespace {

using Eigen::MatrixXd;

double spectral(const MatrixXd& M) { return Eigen::JacobiSVD<MatrixXd>(M).singularValues()(0); }

GenerationConfig make_config(Eigen::Index d, Eigen::Index r, Eigen::Index l, std::uint64_t seed,
                             DistractorSpec distractor = ZeroDistractor{}) {
  GenerationConfig cfg;
  cfg.d = d;
  cfg.r = r;
  cfg.l = l;
  cfg.seed = seed;
  cfg.distractor = std::move(distractor);
  return cfg;
}

// Scalar latent h = b u observed in R^3 with one distractor coordinate
// a h^2 + c h^3. The cubic term makes z linearly correlated with u.
HiddenSubspaceSystem scalar_system(double b, double a, double c) {
  TabulatedDistractor table;
  table.terms = {{2}, {3}};
  table.coefficients = MatrixXd::Zero(2, 2);
  table.coefficients(0, 0) = a;
  table.coefficients(0, 1) = c;
  return HiddenSubspaceSystem::create(MatrixXd::Constant(1, 1, 0.5), MatrixXd::Constant(1, 1, b),
                                      MatrixXd::Identity(3, 1), table);
}

MatrixXd distractor_directions(const HiddenSubspaceSystem& sys) {
  return sys.V_perp() * std::get<TabulatedDistractor>(sys.distractor()).coefficients;
}

TEST(SampleNoisyOneStep, NoiselessZeroDistractorIsExact) {
  const auto sys = random_system(make_config(5, 2, 2, 1));
  const NoisySample s = sample_noisy_one_step(sys, 30, 0.0, 2);
  EXPECT_LT((s.X - derive_lifted(sys).B * s.U).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(s.Z.norm(), 0.0);
}

TEST(SampleNoisyOneStep, CovarianceMatchesModel) {
  const auto sys = random_system(make_config(4, 2, 2, 3));
  const NoisySample s = sample_noisy_one_step(sys, 5000, 1.0, 4);
  const MatrixXd B = derive_lifted(sys).B;
  const MatrixXd cov = s.X * s.X.transpose() / 5000.0;
  EXPECT_LT(spectral(cov - B * B.transpose() - MatrixXd::Identity(4, 4)), 0.3);
}

TEST(SampleNoisyOneStep, DeterministicAndValidated) {
  const auto sys = random_system(make_config(4, 2, 1, 3, PolynomialDistractor{3, 1}));
  const NoisySample a = sample_noisy_one_step(sys, 20, 0.5, 9);
  const NoisySample b = sample_noisy_one_step(sys, 20, 0.5, 9);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.U, b.U);
  EXPECT_NE(a.X, sample_noisy_one_step(sys, 20, 0.5, 10).X);
  EXPECT_THROW(sample_noisy_one_step(sys, 20, -1.0, 9), Error);
  EXPECT_THROW(sample_noisy_one_step(sys, 0, 0.5, 9), Error);
}

TEST(SampleNoisyOneStep, DatasetHasZeroInitialState) {
  const auto sys = random_system(make_config(4, 2, 1, 3, GaussianDistractor{1.0}));
  const TrajectoryDataset ds = sample_noisy_one_step(sys, 8, 0.2, 5).to_dataset();
  EXPECT_NO_THROW(ds.validate());
  EXPECT_TRUE(ds.noisy_one_step);
  EXPECT_EQ(ds.horizon, 1);
  EXPECT_EQ(ds.X[0].norm(), 0.0);
}

TEST(FitNoisy, ExactDataRecoversPseudoinverse) {
  const auto sys = random_system(make_config(6, 3, 2, 5));
  const NoisySample s = sample_noisy_one_step(sys, 200, 0.0, 6);
  const MatrixXd P = fit_noisy(s.X, s.U);
  EXPECT_LT((P - sys.B_pinv()).norm(), 1e-8);
  EXPECT_THROW(fit_noisy(s.X, s.U.leftCols(10)), Error);
}

TEST(FitNoisy, MatchesPopulationRegression) {
  const auto sys = scalar_system(1.0, 4.0, 1.0);
  const double sigma = 0.5;
  const MatrixXd expected =
      oracle::population_noisy_regression(1.0, sys.V().col(0), distractor_directions(sys), sigma);
  const NoisySample s = sample_noisy_one_step(sys, 200000, sigma, 7);
  EXPECT_LT((fit_noisy(s.X, s.U) - expected).cwiseAbs().maxCoeff(), 0.02);
}

TEST(NoisyRho, MatchesPopulationValue) {
  const auto sys = scalar_system(1.0, 4.0, 1.0);
  const double expected = oracle::population_noisy_rho(1.0, distractor_directions(sys));
  EXPECT_NEAR(expected, std::sqrt(9.0 / 63.0), 1e-12);
  EXPECT_NEAR(noisy_rho(sample_noisy_one_step(sys, 200000, 0.5, 8)), expected, 0.02);
}

TEST(VerifyNoisyBound, NoiselessControlHasNoLeak) {
  const auto sys = random_system(make_config(6, 2, 2, 9, PolynomialDistractor{3, 2}));
  const NoisyBoundReport rep = verify_noisy_bound(sys, 0.0, 2000, 10, 10);
  EXPECT_EQ(rep.satisfied, 10);
  for (const auto& t : rep.trials) EXPECT_LT(t.p2_norm, 1e-8);
}

TEST(VerifyNoisyBound, IndependentDistractorBarelyLeaks) {
  const auto sys = random_system(make_config(6, 2, 2, 11, GaussianDistractor{1.0}));
  const NoisyBoundReport rep = verify_noisy_bound(sys, 0.5, 10000, 5, 12);
  for (const auto& t : rep.trials) EXPECT_LT(t.p2_norm, 0.05 * t.p1_norm);
}

TEST(VerifyNoisyBound, HoldsForCorrelatedDistractor) {
  const auto sys = scalar_system(1.0, 4.0, 1.0);
  for (const double sigma : {0.1, 0.5}) {
    const NoisyBoundReport rep = verify_noisy_bound(sys, sigma, 10000, 20, 13);
    EXPECT_GE(rep.satisfied, 19) << "sigma " << sigma;
    for (const auto& t : rep.trials) {
      EXPECT_GT(t.rho, 0.1);
      EXPECT_LT(t.rho, 0.6);
    }
  }
}

// Property: P = P1 + P2 is an orthogonal split along col(V).
TEST(Properties, SplitIsOrthogonal) {
  const auto sys = random_system(make_config(7, 3, 2, 14, PolynomialDistractor{3, 3}));
  const NoisySample s = sample_noisy_one_step(sys, 500, 0.3, 15);
  const NoisySplit split = split_noisy(sys, fit_noisy(s.X, s.U), 0.3, noisy_rho(s));
  EXPECT_LT((split.P1 + split.P2 - split.P).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(split.P.squaredNorm(), split.P1.squaredNorm() + split.P2.squaredNorm(), 1e-10);
  EXPECT_LT((split.P1 * sys.V_perp()).norm(), 1e-10);
  EXPECT_LT((split.P2 * sys.V()).norm(), 1e-10);
}

// Property: the leak into the distractor grows with the noise level.
TEST(Properties, LeakGrowsWithSigma) {
  const auto sys = random_system(make_config(6, 2, 2, 16, PolynomialDistractor{3, 4}));
  double low = 0.0, high = 0.0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    low += run_noisy_trial(sys, 0.05, 2000, t, 0.25).p2_norm;
    high += run_noisy_trial(sys, 0.5, 2000, t, 0.25).p2_norm;
  }
  EXPECT_GT(high, low);
}

// Property: P B -> I as the noise vanishes.
TEST(Properties, InverseAsNoiseVanishes) {
  const auto sys = scalar_system(1.0, 4.0, 1.0);
  const NoisySample s = sample_noisy_one_step(sys, 10000, 0.01, 17);
  ASSERT_LE(noisy_rho(s), 0.5);
  const MatrixXd P = fit_noisy(s.X, s.U);
  EXPECT_LT((P * derive_lifted(sys).B - MatrixXd::Identity(1, 1)).norm(), 0.05);
}

}  // namespace
}  // namespace hsid
