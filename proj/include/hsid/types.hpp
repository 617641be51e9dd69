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

// Domain types of the hidden subspace model.
//
// A latent state h in R^r evolves as h' = Abar h + Bbar u. The observation is
// x = V h + z, where V (d x r) has orthonormal columns and the distractor
// z = V_perp g(h) lives in the orthogonal complement of col(V). Lifted to the
// observation space the linear part reads y' = A y + B u with A = V Abar V^T
// and B = V Bbar.

#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hsid/polynomial.hpp"

namespace hsid {

struct ZeroDistractor {};

/// z coordinates i.i.d. N(0, scale^2), independent of h.
struct GaussianDistractor {
  double scale = 1.0;
};

/// Each coordinate of g is a random combination of the monomials of h with
/// total degree in [2, degree]. With orthogonalize_linear set, the best linear
/// predictor of g(h) from h (fitted on a standard Gaussian calibration sample)
/// is subtracted.
struct PolynomialDistractor {
  int degree = 2;
  std::uint64_t coefficient_seed = 0;
  bool orthogonalize_linear = false;
};

/// Explicit tabulated polynomial g(h) = coefficients * monomials(h), where
/// coefficients is (d - r) x terms.size().
struct TabulatedDistractor {
  std::vector<Exponents> terms;
  Eigen::MatrixXd coefficients;
};

using DistractorSpec =
    std::variant<ZeroDistractor, GaussianDistractor, PolynomialDistractor, TabulatedDistractor>;

/// Result of the V-controllability check recorded on every system.
struct ControllabilityCheck {
  bool contained = false;
  Eigen::Index krylov_rank = 0;
  bool pass = false;
};

class HiddenSubspaceSystem {
 public:
  /// Validates shapes, orthonormality of V (1e-12 per entry) and
  /// rank(Bbar) = l; throws Error(kInvalidArgument) otherwise. Realizes the
  /// distractor tables and records the V-controllability of (A^T, (B^+)^T).
  static HiddenSubspaceSystem create(Eigen::MatrixXd A_bar, Eigen::MatrixXd B_bar,
                                     Eigen::MatrixXd V, DistractorSpec distractor);

  Eigen::Index d() const { return V_.rows(); }
  Eigen::Index r() const { return V_.cols(); }
  Eigen::Index l() const { return B_bar_.cols(); }

  const Eigen::MatrixXd& A_bar() const { return A_bar_; }
  const Eigen::MatrixXd& B_bar() const { return B_bar_; }
  const Eigen::MatrixXd& V() const { return V_; }
  /// Orthonormal complement of col(V), d x (d - r).
  const Eigen::MatrixXd& V_perp() const { return V_perp_; }
  const DistractorSpec& distractor() const { return distractor_; }

  /// Deterministic part of the distractor as a polynomial table in h, with
  /// an optional subtracted linear term. Empty for Zero/Gaussian kinds.
  const std::vector<Exponents>& distractor_terms() const { return terms_; }
  const Eigen::MatrixXd& distractor_coefficients() const { return coefficients_; }
  const Eigen::MatrixXd& distractor_linear_correction() const { return linear_correction_; }

  const ControllabilityCheck& controllability() const { return controllability_; }

  /// B^+ = Bbar^+ V^T, l x d.
  Eigen::MatrixXd B_pinv() const;

 private:
  HiddenSubspaceSystem() = default;

  Eigen::MatrixXd A_bar_;
  Eigen::MatrixXd B_bar_;
  Eigen::MatrixXd V_;
  Eigen::MatrixXd V_perp_;
  DistractorSpec distractor_;
  std::vector<Exponents> terms_;
  Eigen::MatrixXd coefficients_;
  Eigen::MatrixXd linear_correction_;
  ControllabilityCheck controllability_;
};

struct LiftedMatrices {
  Eigen::MatrixXd A;  // d x d
  Eigen::MatrixXd B;  // d x l
};

/// A = V Abar V^T and B = V Bbar.
LiftedMatrices derive_lifted(const HiddenSubspaceSystem& system);

/// Orthonormal complement of col(V) for V with orthonormal columns.
Eigen::MatrixXd orthonormal_complement(const Eigen::MatrixXd& V);

/// n i.i.d. trajectories. Step t of every array is stored as one matrix whose
/// columns are the samples, e.g. X[t] is d x n.
struct TrajectoryDataset {
  Eigen::Index d = 0;
  Eigen::Index l = 0;
  Eigen::Index r_meta = 0;
  Eigen::Index horizon = 0;
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  bool noisy_one_step = false;

  std::vector<Eigen::MatrixXd> X;  // horizon + 1 entries, d x n
  std::vector<Eigen::MatrixXd> U;  // horizon entries, l x n
  std::vector<Eigen::MatrixXd> H;  // empty, or horizon + 1 entries, r_meta x n
  std::vector<Eigen::MatrixXd> Z;  // empty, or horizon + 1 entries, d x n

  bool has_latents() const { return !H.empty(); }
  bool has_distractors() const { return !Z.empty(); }

  /// Throws Error(kDimensionMismatch) when array shapes disagree with the
  /// header fields.
  void validate() const;
};

bool operator==(const TrajectoryDataset& a, const TrajectoryDataset& b);

struct InverseModelSolution {
  Eigen::MatrixXd P;               // l x d
  std::vector<Eigen::MatrixXd> L;  // steps entries, l x d
  std::vector<Eigen::MatrixXd> T;  // steps - 1 entries, l x l
  /// sqrt of the mean squared prediction-error norm over all steps and samples.
  double residual_rms = 0.0;
  /// (1/2n) sum of squared residuals, the empirical inverse-model objective.
  double loss = 0.0;
  double p_norm = 0.0;          // ||P||_F
  double l_norm_squared = 0.0;  // sum_i ||L_i||_F^2

  Eigen::Index steps() const { return static_cast<Eigen::Index>(L.size()); }
};

struct SubspaceEstimate {
  Eigen::MatrixXd basis;           // d x k, orthonormal columns
  Eigen::VectorXd singular_values; // retained, nonincreasing
  double rank_tolerance = 0.0;

  Eigen::Index dim() const { return basis.cols(); }
};

}  // namespace hsid
