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

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "hsid/rng.hpp"
#include "hsid/types.hpp"

namespace hsid {

struct GenerationConfig {
  Eigen::Index d = 1;
  Eigen::Index r = 1;
  Eigen::Index l = 1;
  std::uint64_t seed = 0;
  double a_spectral_norm_target = 0.9;
  DistractorSpec distractor = ZeroDistractor{};
  double noise_sigma = 0.0;

  /// Throws Error(kInvalidArgument) naming the offending field.
  void validate() const;
};

/// Ā and B̄ get i.i.d. standard Gaussian entries, Ā is rescaled to the target
/// spectral norm and V is the orthonormal factor of a d x r Gaussian matrix.
/// Draws that fail the rank(B̄) = l or V-controllability checks are redrawn
/// from the next attempt stream, up to 100 attempts; the attempt count is
/// returned through `attempts` when given.
HiddenSubspaceSystem random_system(const GenerationConfig& config, int* attempts = nullptr);

struct Trajectory {
  Eigen::MatrixXd H;  // r x (horizon + 1)
  Eigen::MatrixXd X;  // d x (horizon + 1)
  Eigen::MatrixXd Z;  // d x (horizon + 1)
};

/// Propagates h_{t+1} = Ā h_t + B̄ u_t from h0 under `controls` (l x horizon,
/// one column per step) and observes x_t = V h_t + z_t (+ noise_sigma * xi_t).
/// Distractor and noise draws come from `engine`.
Trajectory rollout(const HiddenSubspaceSystem& system, const Eigen::VectorXd& h0,
                   const Eigen::MatrixXd& controls, Engine& engine, double noise_sigma = 0.0);

/// n i.i.d. trajectories with h0 and all controls standard Gaussian.
/// Trajectory i draws from its own stream keyed by (seed, i), so the result
/// does not depend on generation order.
TrajectoryDataset sample_batch(const HiddenSubspaceSystem& system, Eigen::Index n,
                               Eigen::Index horizon, std::uint64_t seed,
                               double noise_sigma = 0.0, bool keep_ground_truth = true);

/// z = V_perp g(h) for every column of H (r x n). Only the Gaussian kind
/// consumes randomness from `engine`.
Eigen::MatrixXd realize_distractor(const HiddenSubspaceSystem& system, const Eigen::MatrixXd& H,
                                   Engine& engine);

/// Replaces every observation by warp(x) applied column-wise; ground-truth
/// latents are kept, distractors are dropped since X = V H + Z no longer holds.
TrajectoryDataset warp_observations(const TrajectoryDataset& dataset,
                                    const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& warp);

/// Elementwise signed cube root.
Eigen::MatrixXd signed_cube_root(const Eigen::MatrixXd& M);

}  // namespace hsid
