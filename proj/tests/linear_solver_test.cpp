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

#include "hsid/linear_solver.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "hsid/diagnostics.hpp"
#include "hsid/error.hpp"
#include "hsid/numerics.hpp"
#include "hsid/rng.hpp"
#include "hsid/simulator.hpp"

namespace hsid {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

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

// Direct evaluation of the inverse-model prediction for one sample at step i,
// written from the model equation rather than from the block layout.
VectorXd direct_prediction(const InverseModelSolution& sol, const TrajectoryDataset& ds,
                           Eigen::Index i, Eigen::Index sample) {
  VectorXd pred = sol.P * ds.X[i].col(sample) - sol.L[i - 1] * ds.X[0].col(sample);
  for (Eigen::Index k = 1; k <= i - 1; ++k) pred -= sol.T[k - 1] * ds.U[i - 1 - k].col(sample);
  return pred;
}

InverseModelSolution random_parameters(Eigen::Index d, Eigen::Index l, Eigen::Index steps,
                                       Engine& engine) {
  InverseModelSolution sol;
  sol.P = gaussian_matrix(l, d, engine);
  for (Eigen::Index i = 0; i < steps; ++i) sol.L.push_back(gaussian_matrix(l, d, engine));
  for (Eigen::Index k = 1; k < steps; ++k) sol.T.push_back(gaussian_matrix(l, l, engine));
  return sol;
}

TEST(AssembleDesign, SingleStepHasOnlyPAndL1) {
  const auto sys = random_system(make_config(4, 1, 1, 1));
  const TrajectoryDataset ds = sample_batch(sys, 5, 1, 2);
  const DesignSystem design = assemble_design(ds, 1);
  EXPECT_EQ(design.layout.L.size(), 1u);
  EXPECT_TRUE(design.layout.T.empty());
  EXPECT_EQ(design.regressors.cols(), 8);
  EXPECT_EQ(design.regressors.middleCols(design.layout.P.offset, 4), ds.X[1].transpose());
  EXPECT_EQ(design.regressors.middleCols(design.layout.L[0].offset, 4), -ds.X[0].transpose());
  EXPECT_EQ(design.targets, ds.U[0].transpose());
}

TEST(AssembleDesign, TwoStepsSingleSampleStructure) {
  const auto sys = random_system(make_config(3, 2, 1, 1));
  const TrajectoryDataset ds = sample_batch(sys, 1, 2, 3);
  const DesignSystem design = assemble_design(ds, 2);
  ASSERT_EQ(design.regressors.rows(), 2);
  ASSERT_EQ(design.layout.T.size(), 1u);
  const BlockRange t1 = design.layout.T[0];
  EXPECT_EQ(design.regressors(0, t1.offset), 0.0);
  EXPECT_EQ(design.regressors(1, t1.offset), -ds.U[0](0, 0));
  // L_1 lives only in row block 1, L_2 only in row block 2.
  EXPECT_EQ(design.regressors.block(1, design.layout.L[0].offset, 1, 3).norm(), 0.0);
  EXPECT_EQ(design.regressors.block(0, design.layout.L[1].offset, 1, 3).norm(), 0.0);
  EXPECT_EQ(design.targets(1, 0), ds.U[1](0, 0));
}

TEST(AssembleDesign, BlocksReproduceDirectPrediction) {
  const auto sys = random_system(make_config(6, 3, 2, 4, GaussianDistractor{1.0}));
  const TrajectoryDataset ds = sample_batch(sys, 7, 3, 5);
  Engine engine = make_engine(9, Stream::kTrial, {});
  const InverseModelSolution sol = random_parameters(6, 2, 3, engine);
  const DesignSystem design = assemble_design(ds, 3);
  const MatrixXd predictions = design.regressors * pack_parameters(sol, design.layout);
  for (Eigen::Index i = 1; i <= 3; ++i) {
    for (Eigen::Index s = 0; s < 7; ++s) {
      const VectorXd expected = direct_prediction(sol, ds, i, s);
      const VectorXd got = predictions.row((i - 1) * 7 + s).transpose();
      EXPECT_LT((got - expected).norm(), 1e-12);
    }
  }
}

TEST(AssembleDesign, GroundTruthHasZeroResidual) {
  const auto sys = random_system(make_config(8, 3, 2, 6, PolynomialDistractor{3, 2, false}));
  const TrajectoryDataset ds = sample_batch(sys, 40, 3, 7);
  const DesignSystem design = assemble_design(ds, 3);
  const MatrixXd theta = pack_parameters(analytic_solution(sys, 3), design.layout);
  EXPECT_LT((design.regressors * theta - design.targets).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(AssembleDesign, HorizonTooShort) {
  const auto sys = random_system(make_config(4, 2, 1, 1));
  const TrajectoryDataset ds = sample_batch(sys, 5, 1, 2);
  try {
    assemble_design(ds, 2);
    FAIL() << "expected HorizonTooShort";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kHorizonTooShort);
  }
  EXPECT_THROW(fit_inverse_model(ds, 2), Error);
}

TEST(FitInverseModel, RecoversGroundTruthWithGaussianDistractor) {
  const Eigen::Index d = 20, r = 5, l = 2;
  const auto sys = random_system(make_config(d, r, l, 21, GaussianDistractor{1.0}));
  const TrajectoryDataset ds = sample_batch(sys, 5 * (d + r * l), r, 22);
  const InverseModelSolution sol = fit_inverse_model(ds, r);
  const VerificationReport rep = verify_solution(sys, sol, 1e-6);
  EXPECT_LT(rep.p_error, 1e-6);
  EXPECT_LT(rep.max_l_error, 1e-6);
  EXPECT_LT(rep.max_t_error, 1e-6);
  EXPECT_LT(rep.pb_identity_error, 1e-6);
  EXPECT_LT(rep.max_angle, 1e-6);
  EXPECT_FALSE(rep.dimension_mismatch);
  EXPECT_TRUE(rep.pass);
  EXPECT_LT(sol.residual_rms, 1e-8);

  // Held-out trajectories from the same system are predicted exactly.
  const TrajectoryDataset test = sample_batch(sys, 50, r, 23);
  EXPECT_LT(inverse_prediction_rms(sol, test.X, test.U), 1e-8);
}

TEST(FitInverseModel, ZeroDynamicsGiveZeroL) {
  const Eigen::Index r = 2;
  Engine engine = make_engine(5, Stream::kTrial, {});
  const MatrixXd V = orth_basis(gaussian_matrix(6, r, engine));
  const auto sys = HiddenSubspaceSystem::create(MatrixXd::Zero(r, r), gaussian_matrix(r, r, engine),
                                                V, GaussianDistractor{1.0});
  const InverseModelSolution sol = fit_inverse_model(sample_batch(sys, 60, r, 6), r);
  for (const auto& L : sol.L) EXPECT_LT(L.norm(), 1e-8);
  EXPECT_LT((sol.P - sys.B_pinv()).norm(), 1e-8);
  const SubspaceEstimate est = recover_subspace(sol);
  EXPECT_EQ(est.dim(), r);
  EXPECT_LT(subspace_distance(est, orth_basis(derive_lifted(sys).B)).max_angle, 1e-8);
}

TEST(FitInverseModel, FullyLinearMatchesOneStepClosedForm) {
  const auto sys = random_system(make_config(3, 3, 2, 8));
  const TrajectoryDataset ds = sample_batch(sys, 40, 3, 9);
  const InverseModelSolution sol = fit_inverse_model(ds, 3);
  // Independent route: forward regression x_1 = A x_0 + B u_0 for [B A],
  // then B^+ through a complete orthogonal decomposition.
  MatrixXd regress(5, 40);
  regress << ds.U[0], ds.X[0];
  const MatrixXd BA =
      ds.X[1] * regress.completeOrthogonalDecomposition().pseudoInverse();
  const MatrixXd B = BA.leftCols(2);
  const MatrixXd B_pinv = B.completeOrthogonalDecomposition().pseudoInverse();
  EXPECT_LT((sol.P - B_pinv).norm() / B_pinv.norm(), 1e-8);
}

TEST(RecoverSubspace, ZeroSolutionGivesEmptyBasis) {
  InverseModelSolution sol;
  sol.P = MatrixXd::Zero(2, 5);
  sol.L = {MatrixXd::Zero(2, 5), MatrixXd::Zero(2, 5)};
  sol.T = {MatrixXd::Zero(2, 2)};
  const SubspaceEstimate est = recover_subspace(sol);
  EXPECT_EQ(est.dim(), 0);
  EXPECT_EQ(est.basis.rows(), 5);
}

TEST(VerifySolution, AnalyticSolutionHasZeroError) {
  const auto sys = random_system(make_config(7, 3, 1, 10));
  const VerificationReport rep = verify_solution(sys, analytic_solution(sys, 3), 1e-6);
  EXPECT_EQ(rep.p_error, 0.0);
  EXPECT_EQ(rep.max_l_error, 0.0);
  EXPECT_EQ(rep.max_t_error, 0.0);
  EXPECT_LT(rep.max_angle, 1e-10);
  EXPECT_TRUE(rep.pass);
}

TEST(VerifySolution, PerturbedPFails) {
  const auto sys = random_system(make_config(7, 3, 2, 11));
  InverseModelSolution sol = analytic_solution(sys, 3);
  Engine engine = make_engine(12, Stream::kTrial, {});
  const MatrixXd noise = gaussian_matrix(2, 7, engine);
  sol.P += 0.1 * noise;
  const VerificationReport rep = verify_solution(sys, sol, 1e-6);
  EXPECT_NEAR(rep.p_error, 0.1 * noise.norm() / sys.B_pinv().norm(), 1e-12);
  EXPECT_FALSE(rep.pass);
}

TEST(VerifySolution, RejectsShapeMismatch) {
  const auto sys = random_system(make_config(7, 3, 2, 11));
  InverseModelSolution sol = analytic_solution(sys, 3);
  sol.P = MatrixXd::Zero(2, 6);
  EXPECT_THROW(verify_solution(sys, sol, 1e-6), Error);
}

// Property: the true parameters are feasible, so the fit reaches zero loss
// once n covers the unknown count.
TEST(Properties, ZeroLossFeasibility) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Eigen::Index d = 6, r = 3, l = 2;
    const auto sys = random_system(make_config(d, r, l, 100 + seed, PolynomialDistractor{2, seed}));
    const TrajectoryDataset ds = sample_batch(sys, d * (r + 1) + l * (r - 1), r, seed);
    EXPECT_LE(fit_inverse_model(ds, r).residual_rms, 1e-8) << "seed " << seed;
  }
}

// Property: with x confined to col(V) (no distractor, d > r) the design has a
// null space. Moving P along it keeps the residual but grows ||P||_F.
TEST(Properties, LexicographicOptimality) {
  const Eigen::Index d = 6, r = 2, l = 1;
  const auto sys = random_system(make_config(d, r, l, 31));
  const TrajectoryDataset ds = sample_batch(sys, 30, r, 32);
  const DesignSystem design = assemble_design(ds, r);
  const InverseModelSolution sol = solve_design(design);
  const MatrixXd theta = pack_parameters(sol, design.layout);
  const MatrixXd kernel = design.regressors.fullPivLu().kernel();
  ASSERT_GT(kernel.cols(), 0);
  const double base_residual = (design.regressors * theta - design.targets).norm();
  int checked = 0;
  for (Eigen::Index c = 0; c < kernel.cols(); ++c) {
    const VectorXd dir = kernel.col(c);
    const VectorXd p_part = dir.segment(design.layout.P.offset, design.layout.P.width);
    if (p_part.norm() < 1e-6 * dir.norm()) continue;
    const MatrixXd moved = theta + 0.01 * dir;
    const double moved_residual = (design.regressors * moved - design.targets).norm();
    EXPECT_NEAR(moved_residual, base_residual, 1e-9);
    const double moved_p =
        moved.middleRows(design.layout.P.offset, design.layout.P.width).norm();
    EXPECT_GT(moved_p, sol.P.norm());
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

// Property: col(V_1) inside col(V_2) inside ... for fixed data.
TEST(Properties, MonotoneSubspaceGrowth) {
  const Eigen::Index r = 4;
  const auto sys = random_system(make_config(12, r, 1, 41, GaussianDistractor{1.0}));
  const InverseModelSolution sol = fit_inverse_model(sample_batch(sys, 120, r, 42), r);
  Eigen::Index previous = 0;
  for (Eigen::Index m = 0; m <= r; ++m) {
    const Eigen::Index dim = recover_subspace(sol, kDefaultRankTol, m).dim();
    EXPECT_GE(dim, previous);
    previous = dim;
  }
  EXPECT_EQ(previous, r);
}

}  // namespace
}  // namespace hsid
