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

// One-step inverse regression under observation noise. Starting from x_0 = 0
// a single control u produces x = B u + z + sigma xi with xi ~ N(0, I). The
// minimal-norm regression P of u on x splits into P1 = P V V^T (rows in V)
// and P2 = P - P1 (rows in V_perp), and P2 obeys
//
//   ||P2||_2 <= sigma rho / (2 sqrt(1 - rho^2)) ||B^+||_2 ||P1||_2,
//
// where rho is the canonical correlation between u and z.

#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hsid/types.hpp"

namespace hsid {

struct NoisySample {
  Eigen::MatrixXd X;  // d x n
  Eigen::MatrixXd U;  // l x n
  Eigen::MatrixXd Z;  // d x n
  Eigen::MatrixXd H;  // r x n, latent after the step (Bbar u)
  std::uint64_t seed = 0;

  /// Horizon-1 dataset with x_0 = 0 and the noisy-one-step flag set.
  TrajectoryDataset to_dataset() const;
};

/// u ~ N(0, I_l) and xi ~ N(0, I_d) i.i.d. per sample; z is the distractor
/// realized at h = Bbar u. Draws come from a single stream keyed by seed.
NoisySample sample_noisy_one_step(const HiddenSubspaceSystem& system, Eigen::Index n, double sigma,
                                  std::uint64_t seed);

/// Minimal-norm minimizer of ||P X - U||_F (l x d).
Eigen::MatrixXd fit_noisy(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U);

struct NoisySplit {
  Eigen::MatrixXd P;
  Eigen::MatrixXd P1;
  Eigen::MatrixXd P2;
  double sigma = 0.0;
  double rho = 0.0;
  double bound = 0.0;
};

/// Splits P along V and evaluates the bound with the given rho.
NoisySplit split_noisy(const HiddenSubspaceSystem& system, const Eigen::MatrixXd& P, double sigma,
                       double rho);

/// Empirical rho(u, z) on a sample; an identically-zero z gives 0.
double noisy_rho(const NoisySample& sample);

struct NoisyTrial {
  double p1_norm = 0.0;  // spectral
  double p2_norm = 0.0;  // spectral
  double rho = 0.0;
  double bound = 0.0;
  bool satisfied = false;
};

struct NoisyBoundReport {
  double sigma = 0.0;
  Eigen::Index n = 0;
  double slack = 0.0;
  std::vector<NoisyTrial> trials;
  Eigen::Index satisfied = 0;
  double fraction_satisfied = 0.0;
};

/// Runs `trials` independent fits (trial t uses the seed derived from
/// (seed, t)) and checks ||P2||_2 <= bound * (1 + slack) on each.
NoisyBoundReport verify_noisy_bound(const HiddenSubspaceSystem& system, double sigma,
                                    Eigen::Index n, Eigen::Index trials, std::uint64_t seed,
                                    double slack = 0.25);

/// One trial of verify_noisy_bound, exposed for parallel schedulers.
NoisyTrial run_noisy_trial(const HiddenSubspaceSystem& system, double sigma, Eigen::Index n,
                           std::uint64_t trial_seed, double slack);

}  // namespace hsid
