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
#include <limits>

#include "hsid/diagnostics.hpp"
#include "hsid/error.hpp"
#include "hsid/numerics.hpp"
#include "hsid/rng.hpp"
#include "hsid/simulator.hpp"

namespace hsid {
namespace {

double spectral_norm(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
}

}  // namespace

TrajectoryDataset NoisySample::to_dataset() const {
  TrajectoryDataset ds;
  ds.d = X.rows();
  ds.l = U.rows();
  ds.r_meta = H.rows();
  ds.horizon = 1;
  ds.n = X.cols();
  ds.seed = seed;
  ds.noisy_one_step = true;
  ds.X = {Eigen::MatrixXd::Zero(ds.d, ds.n), X};
  ds.U = {U};
  ds.H = {Eigen::MatrixXd::Zero(ds.r_meta, ds.n), H};
  ds.Z = {Eigen::MatrixXd::Zero(ds.d, ds.n), Z};
  return ds;
}

NoisySample sample_noisy_one_step(const HiddenSubspaceSystem& system, Eigen::Index n, double sigma,
                                  std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be nonnegative");
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be positive");
  NoisySample s;
  s.seed = seed;
  Engine engine = make_engine(seed, Stream::kNoisyOneStep);
  s.U = gaussian_matrix(system.l(), n, engine);
  s.H = system.B_bar() * s.U;
  s.Z = realize_distractor(system, s.H, engine);
  s.X = system.V() * s.H + s.Z;
  if (sigma > 0.0) s.X += gaussian_matrix(system.d(), n, engine, sigma);
  return s;
}

Eigen::MatrixXd fit_noisy(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U) {
  if (X.cols() != U.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "fit_noisy: sample counts differ");
  }
  return min_norm_lstsq(X.transpose(), U.transpose()).solution.transpose();
}

NoisySplit split_noisy(const HiddenSubspaceSystem& system, const Eigen::MatrixXd& P, double sigma,
                       double rho) {
  NoisySplit out;
  out.P = P;
  out.P1 = P * system.V() * system.V().transpose();
  out.P2 = P - out.P1;
  out.sigma = sigma;
  out.rho = rho;
  if (rho >= 1.0) {
    out.bound = std::numeric_limits<double>::infinity();
  } else {
    out.bound = sigma * rho / (2.0 * std::sqrt(1.0 - rho * rho)) *
                spectral_norm(system.B_pinv()) * spectral_norm(out.P1);
  }
  return out;
}

double noisy_rho(const NoisySample& sample) {
  try {
    return empirical_cca(sample.U, sample.Z).rho;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateSample) throw;
    return 0.0;
  }
}

NoisyTrial run_noisy_trial(const HiddenSubspaceSystem& system, double sigma, Eigen::Index n,
                           std::uint64_t trial_seed, double slack) {
  const NoisySample sample = sample_noisy_one_step(system, n, sigma, trial_seed);
  const double rho = noisy_rho(sample);
  const NoisySplit split = split_noisy(system, fit_noisy(sample.X, sample.U), sigma, rho);
  NoisyTrial t;
  t.rho = rho;
  t.bound = split.bound;
  t.p1_norm = spectral_norm(split.P1);
  t.p2_norm = spectral_norm(split.P2);
  // sigma = 0 forces P2 = 0 exactly in theory; the bound is then 0 as well, so
  // allow round-off at the 1e-8 level.
  t.satisfied = t.p2_norm <= split.bound * (1.0 + slack) || (sigma == 0.0 && t.p2_norm <= 1e-8);
  return t;
}

NoisyBoundReport verify_noisy_bound(const HiddenSubspaceSystem& system, double sigma,
                                    Eigen::Index n, Eigen::Index trials, std::uint64_t seed,
                                    double slack) {
  if (trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  NoisyBoundReport rep;
  rep.sigma = sigma;
  rep.n = n;
  rep.slack = slack;
  for (Eigen::Index t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed =
        derive_seed(seed, Stream::kTrial, {static_cast<std::uint64_t>(t)});
    rep.trials.push_back(run_noisy_trial(system, sigma, n, trial_seed, slack));
    if (rep.trials.back().satisfied) ++rep.satisfied;
  }
  rep.fraction_satisfied = static_cast<double>(rep.satisfied) / static_cast<double>(trials);
  return rep;
}

}  // namespace hsid
