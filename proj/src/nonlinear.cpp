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

#include "hsid/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include "hsid/error.hpp"
#include "hsid/linear_solver.hpp"
#include "hsid/rng.hpp"

namespace hsid {
namespace {

constexpr double kTrivialPNorm = 1e-10;
constexpr double kContainmentFloor = 1e-300;

std::vector<Eigen::MatrixXd> apply_rows(const Eigen::MatrixXd& W,
                                        const std::vector<Eigen::MatrixXd>& psi) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(psi.size());
  for (const auto& p : psi) out.push_back(W * p);
  return out;
}

void copy_parameters(const InverseModelSolution& lin, NonlinearSolution& sol) {
  sol.P = lin.P;
  sol.L = lin.L;
  sol.T = lin.T;
  sol.loss = lin.loss;
  sol.residual_rms = lin.residual_rms;
}

// Least-squares update of W (k x m) with (P, L, T) fixed. Output row c of
// sample j at step i depends on W through
//   sum_{a,b} (P(c,a) psi_b(x_i) - L_i(c,a) psi_b(x_0)) W(a,b),
// so vec(W) (column-major) is the unknown of one stacked system.
Eigen::MatrixXd update_weights(const NonlinearSolution& sol, const std::vector<Eigen::MatrixXd>& psi,
                               const std::vector<Eigen::MatrixXd>& U, double tol) {
  const Eigen::Index tau = sol.tau;
  const Eigen::Index l = sol.P.rows();
  const Eigen::Index k = sol.P.cols();
  const Eigen::Index m = psi.front().rows();
  const Eigen::Index n = psi.front().cols();

  Eigen::MatrixXd M(tau * n * l, k * m);
  Eigen::VectorXd target(tau * n * l);
  for (Eigen::Index i = 1; i <= tau; ++i) {
    const Eigen::MatrixXd& L = sol.L[i - 1];
    Eigen::MatrixXd rhs = U[i - 1];
    for (Eigen::Index kk = 1; kk <= i - 1; ++kk) rhs += sol.T[kk - 1] * U[i - 1 - kk];
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index c = 0; c < l; ++c) {
        const Eigen::Index row = ((i - 1) * n + j) * l + c;
        target(row) = rhs(c, j);
        for (Eigen::Index b = 0; b < m; ++b) {
          M.row(row).segment(b * k, k) = psi[i](b, j) * sol.P.row(c) - psi[0](b, j) * L.row(c);
        }
      }
    }
  }
  const auto solved = min_norm_lstsq(M, target, tol);
  return Eigen::Map<const Eigen::MatrixXd>(solved.solution.data(), k, m);
}

std::vector<Eigen::MatrixXd> feature_states(const FeatureMap& fm, const TrajectoryDataset& dataset,
                                            Eigen::Index count) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<size_t>(count));
  for (Eigen::Index t = 0; t < count; ++t) out.push_back(fm.evaluate(dataset.X[t]));
  return out;
}

}  // namespace

InverseModelSolution NonlinearSolution::inverse_model() const {
  InverseModelSolution out;
  out.P = P;
  out.L = L;
  out.T = T;
  out.loss = loss;
  out.residual_rms = residual_rms;
  out.p_norm = P.norm();
  for (const auto& Li : L) out.l_norm_squared += Li.squaredNorm();
  return out;
}

NonlinearSolution fit_nonlinear(const TrajectoryDataset& dataset, const FeatureMap& feature_map,
                                Eigen::Index tau, const OptimizerConfig& optimizer) {
  if (tau < 1) throw Error(ErrorCode::kInvalidArgument, "fit_nonlinear: tau must be >= 1");
  if (dataset.horizon < tau) {
    throw Error(ErrorCode::kHorizonTooShort, "fit_nonlinear: dataset horizon is shorter than tau");
  }
  if (feature_map.input_dim() != dataset.d) {
    throw Error(ErrorCode::kDimensionMismatch, "fit_nonlinear: feature map input_dim != d");
  }
  if (optimizer.max_iterations < 1 || !(optimizer.relative_tolerance >= 0.0) ||
      !(optimizer.init_noise >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fit_nonlinear: invalid optimizer config");
  }
  const std::vector<Eigen::MatrixXd> controls(dataset.U.begin(), dataset.U.begin() + tau);

  NonlinearSolution sol;
  sol.tau = tau;
  FitDiagnostics& diag = sol.diagnostics;

  if (!feature_map.is_learned()) {
    sol.feature_map = feature_map;
    const auto states = feature_states(feature_map, dataset, tau + 1);
    copy_parameters(solve_design(assemble_design(states, controls, tau), optimizer.solver_tol), sol);
    diag.iterations = 1;
    diag.converged = true;
    diag.loss_history = {sol.loss};
  } else {
    std::vector<Eigen::MatrixXd> psi;
    for (Eigen::Index t = 0; t <= tau; ++t) psi.push_back(feature_map.dictionary(dataset.X[t]));

    const Eigen::Index k = feature_map.output_dim();
    const Eigen::Index m = feature_map.dictionary_dim();
    Engine engine = make_engine(optimizer.seed, Stream::kOptimizerInit,
                                {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(m)});
    Eigen::MatrixXd W = Eigen::MatrixXd::Identity(k, m) +
                        gaussian_matrix(k, m, engine, optimizer.init_noise);

    auto solve_for = [&](const Eigen::MatrixXd& weights) {
      return solve_design(assemble_design(apply_rows(weights, psi), controls, tau),
                          optimizer.solver_tol);
    };

    copy_parameters(solve_for(W), sol);
    diag.loss_history.push_back(sol.loss);
    while (diag.iterations < optimizer.max_iterations) {
      if (sol.loss <= std::numeric_limits<double>::min()) {
        diag.converged = true;
        break;
      }
      ++diag.iterations;
      const Eigen::MatrixXd W_next = update_weights(sol, psi, controls, optimizer.solver_tol);
      const InverseModelSolution next = solve_for(W_next);
      diag.loss_history.push_back(next.loss);
      // Each half step is an exact block minimization; a rise is round-off.
      if (next.loss > sol.loss) {
        diag.converged = true;
        break;
      }
      const double decrease = (sol.loss - next.loss) / sol.loss;
      W = W_next;
      copy_parameters(next, sol);
      if (decrease < optimizer.relative_tolerance) {
        diag.converged = true;
        break;
      }
    }
    sol.feature_map = feature_map.with_weights(W);
  }

  diag.trivial = sol.P.norm() < kTrivialPNorm;
  diag.non_convergence =
      feature_map.is_learned() && (!diag.converged || sol.loss > optimizer.loss_threshold);
  return sol;
}

ProjectionResult extract_projection(const NonlinearSolution& solution, double rank_tol) {
  const Eigen::Index k = solution.P.cols();
  const Eigen::Index l = solution.P.rows();
  const Eigen::Index tau = solution.tau;
  Eigen::MatrixXd stacked(k, tau * l);
  stacked.leftCols(l) = solution.P.transpose();
  for (Eigen::Index i = 1; i < tau; ++i) stacked.middleCols(i * l, l) = solution.L[i - 1].transpose();

  ProjectionResult out;
  out.basis = orth_basis(stacked, rank_tol);
  out.Q = out.basis * out.basis.transpose();
  const Eigen::MatrixXd& L_tau = solution.L[tau - 1];
  const Eigen::MatrixXd leak = L_tau.transpose() - out.Q * L_tau.transpose();
  out.containment_residual = leak.norm() / std::max(L_tau.norm(), kContainmentFloor);
  return out;
}

LatentDynamics fit_latent_dynamics(const FeatureMap& feature_map, const Eigen::MatrixXd& basis,
                                   const TrajectoryDataset& dataset) {
  if (dataset.horizon < 1) {
    throw Error(ErrorCode::kHorizonTooShort, "fit_latent_dynamics: needs at least one transition");
  }
  const Eigen::Index k = feature_map.output_dim();
  const Eigen::Index q = basis.cols();
  const Eigen::Index l = dataset.l;
  const Eigen::Index n = dataset.n;
  const Eigen::Index pairs = dataset.horizon * n;

  LatentDynamics out;
  if (q == 0) {
    out.A = Eigen::MatrixXd::Zero(k, k);
    out.B = Eigen::MatrixXd::Zero(k, l);
    out.degenerate = true;
    return out;
  }

  Eigen::MatrixXd regressors(pairs, q + l);
  Eigen::MatrixXd targets(pairs, q);
  Eigen::MatrixXd coords = basis.transpose() * feature_map.evaluate(dataset.X[0]);
  for (Eigen::Index t = 0; t < dataset.horizon; ++t) {
    Eigen::MatrixXd next = basis.transpose() * feature_map.evaluate(dataset.X[t + 1]);
    regressors.block(t * n, 0, n, q) = coords.transpose();
    regressors.block(t * n, q, n, l) = dataset.U[t].transpose();
    targets.middleRows(t * n, n) = next.transpose();
    coords = std::move(next);
  }
  const auto solved = min_norm_lstsq(regressors, targets, kDefaultRankTol);
  const Eigen::MatrixXd A_hat = solved.solution.topRows(q).transpose();
  const Eigen::MatrixXd B_hat = solved.solution.bottomRows(l).transpose();
  out.A = basis * A_hat * basis.transpose();
  out.B = basis * B_hat;
  out.residual_rms = std::sqrt(solved.residual_norm * solved.residual_norm /
                               static_cast<double>(pairs));
  return out;
}

LatentDynamics fit_latent_dynamics(const NonlinearSolution& solution,
                                   const TrajectoryDataset& dataset) {
  if (!solution.basis) {
    throw Error(ErrorCode::kInvalidArgument, "fit_latent_dynamics: projection not extracted");
  }
  return fit_latent_dynamics(solution.feature_map, *solution.basis, dataset);
}

double dynamics_residual_rms(const NonlinearSolution& solution, const TrajectoryDataset& dataset) {
  if (!solution.Q || !solution.A || !solution.B) {
    throw Error(ErrorCode::kInvalidArgument, "dynamics_residual_rms: solution is not linearized");
  }
  if (dataset.horizon < 1) {
    throw Error(ErrorCode::kHorizonTooShort, "dynamics_residual_rms: needs at least one transition");
  }
  const Eigen::MatrixXd& Q = *solution.Q;
  double sq = 0.0;
  Eigen::MatrixXd current = Q * solution.feature_map.evaluate(dataset.X[0]);
  for (Eigen::Index t = 0; t < dataset.horizon; ++t) {
    Eigen::MatrixXd next = Q * solution.feature_map.evaluate(dataset.X[t + 1]);
    sq += (next - *solution.A * current - *solution.B * dataset.U[t]).squaredNorm();
    current = std::move(next);
  }
  return std::sqrt(sq / static_cast<double>(dataset.horizon * dataset.n));
}

NonlinearSolution linearize(NonlinearSolution solution, const TrajectoryDataset& dataset,
                            double rank_tol) {
  ProjectionResult proj = extract_projection(solution, rank_tol);
  const LatentDynamics dyn = fit_latent_dynamics(solution.feature_map, proj.basis, dataset);
  solution.Q = std::move(proj.Q);
  solution.basis = std::move(proj.basis);
  solution.containment_residual = proj.containment_residual;
  solution.A = dyn.A;
  solution.B = dyn.B;
  solution.dynamics_residual_rms = dyn.residual_rms;
  return solution;
}

double inverse_prediction_rms(const NonlinearSolution& solution, const TrajectoryDataset& dataset) {
  if (dataset.horizon < solution.tau) {
    throw Error(ErrorCode::kHorizonTooShort, "inverse_prediction_rms: horizon shorter than tau");
  }
  return inverse_prediction_rms(solution.inverse_model(),
                                feature_states(solution.feature_map, dataset, solution.tau + 1),
                                dataset.U);
}

RankScan rank_saturation_scan(const TrajectoryDataset& dataset, const FeatureMap& feature_map,
                              Eigen::Index tau_max, const OptimizerConfig& optimizer,
                              double rank_tol) {
  if (tau_max < 1) throw Error(ErrorCode::kInvalidArgument, "rank_saturation_scan: tau_max < 1");
  if (dataset.horizon < tau_max) {
    throw Error(ErrorCode::kHorizonTooShort, "rank_saturation_scan: horizon shorter than tau_max");
  }
  std::vector<std::future<ProjectionResult>> jobs;
  for (Eigen::Index tau = 1; tau <= tau_max; ++tau) {
    jobs.push_back(std::async(std::launch::async, [&, tau] {
      return extract_projection(fit_nonlinear(dataset, feature_map, tau, optimizer), rank_tol);
    }));
  }
  RankScan scan;
  for (auto& job : jobs) {
    const ProjectionResult proj = job.get();
    scan.dims.push_back(proj.basis.cols());
    scan.containment.push_back(proj.containment_residual);
  }
  for (size_t i = 0; i + 1 < scan.dims.size(); ++i) {
    if (scan.dims[i + 1] == scan.dims[i]) {
      scan.saturation_tau = static_cast<Eigen::Index>(i + 1);
      break;
    }
  }
  return scan;
}

}  // namespace hsid
