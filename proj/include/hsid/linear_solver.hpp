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

// Empirical inverse-dynamics regression. For step i = 1..steps the model
// predicts the last control from the end state, the start state and the
// earlier controls:
//
//   u_{i-1} = P x_i - L_i x_0 - sum_{k=1}^{i-1} T_k u_{i-1-k}
//
// with P and every T_k shared across steps. All steps and samples are stacked
// into one least-squares system whose unknown is theta^T; each column of
// theta^T is one output coordinate.

#pragma once

#include <vector>

#include <Eigen/Dense>

#include "hsid/numerics.hpp"
#include "hsid/types.hpp"

namespace hsid {

struct BlockRange {
  Eigen::Index offset = 0;
  Eigen::Index width = 0;
};

struct BlockLayout {
  BlockRange P;
  std::vector<BlockRange> L;  // L_1..L_steps
  std::vector<BlockRange> T;  // T_1..T_{steps-1}
  Eigen::Index total_cols = 0;
};

struct DesignSystem {
  Eigen::MatrixXd regressors;  // (steps * n) x (state_dim * (steps + 1) + l * (steps - 1))
  Eigen::MatrixXd targets;     // (steps * n) x l
  BlockLayout layout;
  Eigen::Index steps = 0;
  Eigen::Index n = 0;
  Eigen::Index state_dim = 0;
  Eigen::Index l = 0;
};

/// Builds the stacked system from per-step state matrices (state_dim x n,
/// at least steps + 1 of them) and control matrices (l x n). Row block i
/// (rows (i-1) n .. i n - 1) holds x_i in the P columns, -x_0 in the L_i
/// columns and -u_{i-1-k} in the T_k columns; its target is u_{i-1}.
DesignSystem assemble_design(const std::vector<Eigen::MatrixXd>& states,
                             const std::vector<Eigen::MatrixXd>& controls, Eigen::Index steps);

/// Throws Error(kHorizonTooShort) when dataset.horizon < steps.
DesignSystem assemble_design(const TrajectoryDataset& dataset, Eigen::Index steps);

/// Lexicographic minimal-norm solve of a design: the P block is the stage-1
/// variable, all L and T blocks together the stage-2 variable.
InverseModelSolution solve_design(const DesignSystem& design, double tol = kDefaultRankTol);

InverseModelSolution fit_inverse_model(const TrajectoryDataset& dataset, Eigen::Index steps,
                                       double tol = kDefaultRankTol);

/// RMS prediction-error norm of a fitted model on (possibly held-out) data.
double inverse_prediction_rms(const InverseModelSolution& solution,
                              const std::vector<Eigen::MatrixXd>& states,
                              const std::vector<Eigen::MatrixXd>& controls);

/// Parameters stacked back into theta^T order for `layout`.
Eigen::MatrixXd pack_parameters(const InverseModelSolution& solution, const BlockLayout& layout);

/// Orthonormal basis of col([P^T L_1^T ... L_m^T]) where m = num_L (all L
/// blocks when negative), truncated at rank_tol relative to the top singular
/// value.
SubspaceEstimate recover_subspace(const InverseModelSolution& solution,
                                  double rank_tol = kDefaultRankTol, Eigen::Index num_L = -1);

/// Ground-truth inverse-model parameters P = B^+, L_i = B^+ A^i, T_k = B^+ A^k B.
InverseModelSolution analytic_solution(const HiddenSubspaceSystem& system, Eigen::Index steps);

struct VerificationReport {
  double p_error = 0.0;                // ||P - B^+||_F / ||B^+||_F
  std::vector<double> l_errors;        // relative, eps-floored denominators
  std::vector<double> t_errors;
  double max_l_error = 0.0;
  double max_t_error = 0.0;
  double pb_identity_error = 0.0;      // ||P B - I||_F
  double max_angle = 0.0;              // largest principal angle to col(V)
  Eigen::Index subspace_dim = 0;
  bool dimension_mismatch = false;
  double tolerance = 0.0;
  bool pass = false;
};

/// Compares a fitted solution with the generating system. `pass` requires all
/// relative errors and the subspace angle below tol and matching dimensions.
/// Throws Error(kDimensionMismatch) on shape disagreement.
VerificationReport verify_solution(const HiddenSubspaceSystem& system,
                                   const InverseModelSolution& solution, double tol,
                                   double rank_tol = kDefaultRankTol);

}  // namespace hsid
