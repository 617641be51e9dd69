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

#include <algorithm>
#include <cmath>

#include "hsid/diagnostics.hpp"
#include "hsid/error.hpp"

namespace hsid {
namespace {

constexpr double kDenominatorFloor = 1e-12;

BlockLayout make_layout(Eigen::Index state_dim, Eigen::Index l, Eigen::Index steps) {
  BlockLayout layout;
  layout.P = {0, state_dim};
  for (Eigen::Index i = 1; i <= steps; ++i) layout.L.push_back({state_dim * i, state_dim});
  const Eigen::Index t_base = state_dim * (steps + 1);
  for (Eigen::Index k = 1; k < steps; ++k) layout.T.push_back({t_base + l * (k - 1), l});
  layout.total_cols = t_base + l * (steps - 1);
  return layout;
}

double relative_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  return (estimate - truth).norm() / std::max(truth.norm(), kDenominatorFloor);
}

}  // namespace

DesignSystem assemble_design(const std::vector<Eigen::MatrixXd>& states,
                             const std::vector<Eigen::MatrixXd>& controls, Eigen::Index steps) {
  if (steps < 1) throw Error(ErrorCode::kInvalidArgument, "assemble_design: steps must be >= 1");
  if (static_cast<Eigen::Index>(states.size()) < steps + 1 ||
      static_cast<Eigen::Index>(controls.size()) < steps) {
    throw Error(ErrorCode::kHorizonTooShort, "assemble_design: trajectories shorter than steps");
  }
  const Eigen::Index D = states.front().rows();
  const Eigen::Index n = states.front().cols();
  const Eigen::Index l = controls.front().rows();

  DesignSystem sys;
  sys.steps = steps;
  sys.n = n;
  sys.state_dim = D;
  sys.l = l;
  sys.layout = make_layout(D, l, steps);
  sys.regressors = Eigen::MatrixXd::Zero(steps * n, sys.layout.total_cols);
  sys.targets.resize(steps * n, l);

  const Eigen::MatrixXd x0_t = states[0].transpose();
  for (Eigen::Index i = 1; i <= steps; ++i) {
    const Eigen::Index row = (i - 1) * n;
    auto block = sys.regressors.middleRows(row, n);
    block.middleCols(sys.layout.P.offset, D) = states[i].transpose();
    block.middleCols(sys.layout.L[i - 1].offset, D) = -x0_t;
    for (Eigen::Index k = 1; k <= i - 1; ++k) {
      block.middleCols(sys.layout.T[k - 1].offset, l) = -controls[i - 1 - k].transpose();
    }
    sys.targets.middleRows(row, n) = controls[i - 1].transpose();
  }
  return sys;
}

DesignSystem assemble_design(const TrajectoryDataset& dataset, Eigen::Index steps) {
  if (dataset.horizon < steps) {
    throw Error(ErrorCode::kHorizonTooShort, "dataset horizon is shorter than the step count");
  }
  return assemble_design(dataset.X, dataset.U, steps);
}

InverseModelSolution solve_design(const DesignSystem& design, double tol) {
  const BlockLayout& layout = design.layout;
  const Eigen::Index D = design.state_dim;
  const auto A_x = design.regressors.leftCols(D);
  const auto A_y = design.regressors.rightCols(layout.total_cols - D);
  const auto solved = two_stage_min_norm(A_x, A_y, design.targets, tol);

  InverseModelSolution sol;
  sol.P = solved.X.transpose();
  for (const BlockRange& b : layout.L) {
    sol.L.push_back(solved.Y.middleRows(b.offset - D, b.width).transpose());
  }
  for (const BlockRange& b : layout.T) {
    sol.T.push_back(solved.Y.middleRows(b.offset - D, b.width).transpose());
  }

  const double sq = solved.residual_norm * solved.residual_norm;
  sol.residual_rms = std::sqrt(sq / static_cast<double>(design.steps * design.n));
  sol.loss = sq / (2.0 * static_cast<double>(design.n));
  sol.p_norm = sol.P.norm();
  for (const auto& L : sol.L) sol.l_norm_squared += L.squaredNorm();
  return sol;
}

InverseModelSolution fit_inverse_model(const TrajectoryDataset& dataset, Eigen::Index steps,
                                       double tol) {
  return solve_design(assemble_design(dataset, steps), tol);
}

double inverse_prediction_rms(const InverseModelSolution& solution,
                              const std::vector<Eigen::MatrixXd>& states,
                              const std::vector<Eigen::MatrixXd>& controls) {
  const DesignSystem design = assemble_design(states, controls, solution.steps());
  if (design.state_dim != solution.P.cols() || design.l != solution.P.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "inverse_prediction_rms: data does not fit model");
  }
  const Eigen::MatrixXd residual =
      design.regressors * pack_parameters(solution, design.layout) - design.targets;
  return std::sqrt(residual.squaredNorm() / static_cast<double>(design.steps * design.n));
}

Eigen::MatrixXd pack_parameters(const InverseModelSolution& solution, const BlockLayout& layout) {
  if (static_cast<Eigen::Index>(solution.L.size()) != static_cast<Eigen::Index>(layout.L.size()) ||
      solution.T.size() != layout.T.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "pack_parameters: block counts differ");
  }
  Eigen::MatrixXd theta_t(layout.total_cols, solution.P.rows());
  theta_t.middleRows(layout.P.offset, layout.P.width) = solution.P.transpose();
  for (size_t i = 0; i < layout.L.size(); ++i) {
    theta_t.middleRows(layout.L[i].offset, layout.L[i].width) = solution.L[i].transpose();
  }
  for (size_t k = 0; k < layout.T.size(); ++k) {
    theta_t.middleRows(layout.T[k].offset, layout.T[k].width) = solution.T[k].transpose();
  }
  return theta_t;
}

SubspaceEstimate recover_subspace(const InverseModelSolution& solution, double rank_tol,
                                  Eigen::Index num_L) {
  const Eigen::Index available = solution.steps();
  const Eigen::Index m = num_L < 0 ? available : std::min(num_L, available);
  const Eigen::Index D = solution.P.cols();
  const Eigen::Index l = solution.P.rows();
  Eigen::MatrixXd stacked(D, (m + 1) * l);
  stacked.leftCols(l) = solution.P.transpose();
  for (Eigen::Index i = 0; i < m; ++i) stacked.middleCols((i + 1) * l, l) = solution.L[i].transpose();

  const auto svd = truncated_svd(stacked, rank_tol);
  SubspaceEstimate est;
  est.basis = svd.U;
  est.singular_values = svd.sigma;
  est.rank_tolerance = rank_tol;
  return est;
}

InverseModelSolution analytic_solution(const HiddenSubspaceSystem& system, Eigen::Index steps) {
  const LiftedMatrices lifted = derive_lifted(system);
  const Eigen::MatrixXd B_pinv = system.B_pinv();
  InverseModelSolution sol;
  sol.P = B_pinv;
  Eigen::MatrixXd power = lifted.A;  // A^i
  for (Eigen::Index i = 1; i <= steps; ++i) {
    sol.L.push_back(B_pinv * power);
    if (i < steps) sol.T.push_back(B_pinv * power * lifted.B);
    power = power * lifted.A;
  }
  sol.p_norm = sol.P.norm();
  for (const auto& L : sol.L) sol.l_norm_squared += L.squaredNorm();
  return sol;
}

VerificationReport verify_solution(const HiddenSubspaceSystem& system,
                                   const InverseModelSolution& solution, double tol,
                                   double rank_tol) {
  if (solution.P.rows() != system.l() || solution.P.cols() != system.d() ||
      static_cast<Eigen::Index>(solution.T.size()) + 1 != solution.steps()) {
    throw Error(ErrorCode::kDimensionMismatch, "verify_solution: solution does not fit system");
  }
  for (const auto& L : solution.L) {
    if (L.rows() != system.l() || L.cols() != system.d()) {
      throw Error(ErrorCode::kDimensionMismatch, "verify_solution: L block shape");
    }
  }
  const InverseModelSolution truth = analytic_solution(system, solution.steps());

  VerificationReport rep;
  rep.tolerance = tol;
  rep.p_error = relative_error(solution.P, truth.P);
  for (size_t i = 0; i < truth.L.size(); ++i) {
    rep.l_errors.push_back(relative_error(solution.L[i], truth.L[i]));
    rep.max_l_error = std::max(rep.max_l_error, rep.l_errors.back());
  }
  for (size_t k = 0; k < truth.T.size(); ++k) {
    rep.t_errors.push_back(relative_error(solution.T[k], truth.T[k]));
    rep.max_t_error = std::max(rep.max_t_error, rep.t_errors.back());
  }
  const Eigen::MatrixXd B = derive_lifted(system).B;
  rep.pb_identity_error =
      (solution.P * B - Eigen::MatrixXd::Identity(system.l(), system.l())).norm();

  const SubspaceDistance dist = subspace_distance(recover_subspace(solution, rank_tol), system.V());
  rep.max_angle = dist.max_angle;
  rep.subspace_dim = dist.estimate_dim;
  rep.dimension_mismatch = dist.dimension_mismatch;

  rep.pass = rep.p_error < tol && rep.max_l_error < tol && rep.max_t_error < tol &&
             rep.max_angle < tol && !rep.dimension_mismatch;
  return rep;
}

}  // namespace hsid
