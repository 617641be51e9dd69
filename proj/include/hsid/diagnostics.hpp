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

#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hsid/numerics.hpp"
#include "hsid/types.hpp"

namespace hsid {

struct CcaEstimate {
  double rho = 0.0;
  Eigen::Index rank_y = 0;
  Eigen::Index rank_z = 0;
  double ridge_y = 0.0;
  double ridge_z = 0.0;
};

/// Largest canonical correlation between the rows of Y (k1 x n) and Z (k2 x n).
///
/// Second moments are the uncentered (1/n) Y Y^T etc. Each block is whitened
/// by the pseudo-inverse square root of (Sigma + ridge I), with eigenvalues
/// below 1e-8 of the largest dropped, and rho is the top singular value of
/// the whitened cross moment. Without an explicit ridge each block uses
/// 1e-10 * trace(Sigma). Throws Error(kDegenerateSample) when a block has zero
/// numerical rank.
CcaEstimate empirical_cca(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Z,
                          std::optional<double> ridge = std::nullopt);

struct Assumption1Report {
  std::vector<double> rho;           // rho((z_i, z_0), (h_i, h_0)), i = 1..steps
  std::vector<double> extended_rho;  // h side extended with u_0..u_{i-2}
  double max_rho = 0.0;
  double max_extended_rho = 0.0;
};

/// Empirical check of the no-linear-dependence condition on a dataset that
/// carries ground-truth H and Z. A distractor block with zero numerical rank
/// contributes rho = 0. Throws Error(kMissingGroundTruth) without H and Z.
Assumption1Report assumption1_estimate(const TrajectoryDataset& dataset, Eigen::Index steps);

/// V-controllability of (A, B): col(A), col(A^T), col(B) inside col(V), and
/// [B AB ... A^{r-1} B] of rank r = dim V. Containment is relative:
/// ||(I - V V^T) M||_F <= tol * ||M||_F.
ControllabilityCheck check_v_controllability(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                             const Eigen::MatrixXd& V,
                                             double tol = kDefaultRankTol);

struct SubspaceDistance {
  double max_angle = 0.0;  // over min(dim) principal angles
  Eigen::Index estimate_dim = 0;
  Eigen::Index true_dim = 0;
  bool dimension_mismatch = false;
};

SubspaceDistance subspace_distance(const SubspaceEstimate& estimate, const Eigen::MatrixXd& V);

}  // namespace hsid
