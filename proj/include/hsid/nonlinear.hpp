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

// Inverse-dynamics fitting in a feature space phi(x), followed by extraction
// of the linearizing projection Q and of the latent linear dynamics
// Q phi(x') = A Q phi(x) + B u.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hsid/features.hpp"
#include "hsid/numerics.hpp"
#include "hsid/types.hpp"

namespace hsid {

struct OptimizerConfig {
  int max_iterations = 200;
  double relative_tolerance = 1e-10;
  double init_noise = 1e-2;
  std::uint64_t seed = 0;
  /// Final loss above this marks the fit as non-converged.
  double loss_threshold = 1e-8;
  double solver_tol = kDefaultRankTol;
};

struct FitDiagnostics {
  int iterations = 0;
  bool converged = false;
  /// Loss plateaued above loss_threshold or the iteration cap was hit.
  bool non_convergence = false;
  /// ||P||_F < 1e-10: the fit collapsed to the trivial representation.
  bool trivial = false;
  std::vector<double> loss_history;
};

struct NonlinearSolution {
  FeatureMap feature_map;
  Eigen::MatrixXd P;               // l x k
  std::vector<Eigen::MatrixXd> L;  // tau entries, l x k
  std::vector<Eigen::MatrixXd> T;  // tau - 1 entries, l x l
  Eigen::Index tau = 0;
  double loss = 0.0;
  double residual_rms = 0.0;
  FitDiagnostics diagnostics;

  // Filled by linearize().
  std::optional<Eigen::MatrixXd> Q;      // k x k orthogonal projector
  std::optional<Eigen::MatrixXd> basis;  // k x q orthonormal basis of range(Q)
  double containment_residual = 0.0;
  std::optional<Eigen::MatrixXd> A;      // k x k
  std::optional<Eigen::MatrixXd> B;      // k x l
  double dynamics_residual_rms = 0.0;

  InverseModelSolution inverse_model() const;
};

/// Minimizes (1/2n) sum_i ||P phi(x_i) - L_i phi(x_0) - sum_k T_k u_{i-1-k} - u_{i-1}||^2
/// over i = 1..tau. Fixed dictionaries are solved exactly with the
/// lexicographic minimal-norm rule. A learned combination alternates an exact
/// (P, L, T) solve with a least-squares W solve until the relative loss
/// decrease drops below the tolerance. Non-convergence is reported in the
/// diagnostics, never thrown.
NonlinearSolution fit_nonlinear(const TrajectoryDataset& dataset, const FeatureMap& feature_map,
                                Eigen::Index tau, const OptimizerConfig& optimizer = {});

struct ProjectionResult {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd basis;
  double containment_residual = 0.0;  // ||(I - Q) L_tau^T||_F / max(||L_tau||_F, eps)
};

/// Projector onto col([P^T L_1^T ... L_{tau-1}^T]) and the containment check
/// of L_tau in that span.
ProjectionResult extract_projection(const NonlinearSolution& solution,
                                    double rank_tol = kDefaultRankTol);

struct LatentDynamics {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  double residual_rms = 0.0;
  bool degenerate = false;  // Q = 0
};

/// Least-squares fit of Q phi(x_{t+1}) = A Q phi(x_t) + B u_t over every
/// consecutive pair, solved in the coordinates of `basis` so that A = Q A Q.
LatentDynamics fit_latent_dynamics(const FeatureMap& feature_map, const Eigen::MatrixXd& basis,
                                   const TrajectoryDataset& dataset);

/// Same, using the basis stored by linearize(). Throws Error(kInvalidArgument)
/// when no projection has been extracted.
LatentDynamics fit_latent_dynamics(const NonlinearSolution& solution,
                                   const TrajectoryDataset& dataset);

/// RMS norm of Q phi(x_{t+1}) - A Q phi(x_t) - B u_t over every pair of a
/// (possibly held-out) dataset.
double dynamics_residual_rms(const NonlinearSolution& solution, const TrajectoryDataset& dataset);

/// extract_projection followed by fit_latent_dynamics on `dataset`.
NonlinearSolution linearize(NonlinearSolution solution, const TrajectoryDataset& dataset,
                            double rank_tol = kDefaultRankTol);

/// RMS inverse-prediction error of the fitted model on a dataset.
double inverse_prediction_rms(const NonlinearSolution& solution, const TrajectoryDataset& dataset);

struct RankScan {
  std::vector<Eigen::Index> dims;    // dims[tau - 1] = dim V_tau
  std::vector<double> containment;   // containment residual per tau
  /// First tau whose successor does not increase the dimension.
  std::optional<Eigen::Index> saturation_tau;
};

RankScan rank_saturation_scan(const TrajectoryDataset& dataset, const FeatureMap& feature_map,
                              Eigen::Index tau_max, const OptimizerConfig& optimizer = {},
                              double rank_tol = kDefaultRankTol);

}  // namespace hsid
