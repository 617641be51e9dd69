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

#include "hsid/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "hsid/error.hpp"

namespace hsid {
namespace {

constexpr double kDefaultRidgeFactor = 1e-10;
constexpr double kWhiteningCutoff = 1e-8;

struct Whitener {
  Eigen::MatrixXd W;  // rank x k; W Sigma W^T = I on the retained eigenspace
  double ridge = 0.0;
};

Whitener whiten(const Eigen::MatrixXd& sigma, std::optional<double> ridge) {
  Whitener out;
  out.ridge = ridge.value_or(kDefaultRidgeFactor * sigma.trace());
  const Eigen::Index k = sigma.rows();
  const Eigen::MatrixXd regularized = sigma + out.ridge * Eigen::MatrixXd::Identity(k, k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(regularized);
  const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
  const double top = k > 0 ? lambda(k - 1) : 0.0;
  if (!(top > 0.0)) {
    out.W.resize(0, k);
    return out;
  }
  Eigen::Index keep = 0;
  while (keep < k && lambda(k - 1 - keep) > kWhiteningCutoff * top) ++keep;
  out.W.resize(keep, k);
  for (Eigen::Index i = 0; i < keep; ++i) {
    const Eigen::Index col = k - 1 - i;
    out.W.row(i) = eig.eigenvectors().col(col).transpose() / std::sqrt(lambda(col));
  }
  return out;
}

Eigen::MatrixXd stack(std::initializer_list<const Eigen::MatrixXd*> blocks) {
  Eigen::Index rows = 0;
  Eigen::Index cols = -1;
  for (const auto* b : blocks) {
    rows += b->rows();
    cols = b->cols();
  }
  Eigen::MatrixXd out(rows, std::max<Eigen::Index>(cols, 0));
  Eigen::Index at = 0;
  for (const auto* b : blocks) {
    out.middleRows(at, b->rows()) = *b;
    at += b->rows();
  }
  return out;
}

double relative_leak(const Eigen::MatrixXd& V, const Eigen::MatrixXd& M) {
  const double norm = M.norm();
  if (norm == 0.0) return 0.0;
  return (M - V * (V.transpose() * M)).norm() / norm;
}

}  // namespace

CcaEstimate empirical_cca(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Z,
                          std::optional<double> ridge) {
  if (Y.cols() != Z.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "empirical_cca: sample counts differ");
  }
  const Eigen::Index n = Y.cols();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "empirical_cca needs n >= 2");
  const double inv_n = 1.0 / static_cast<double>(n);

  const Eigen::MatrixXd syy = inv_n * Y * Y.transpose();
  const Eigen::MatrixXd szz = inv_n * Z * Z.transpose();
  const Eigen::MatrixXd syz = inv_n * Y * Z.transpose();

  const Whitener wy = whiten(syy, ridge);
  const Whitener wz = whiten(szz, ridge);
  if (wy.W.rows() == 0 || wz.W.rows() == 0) {
    throw Error(ErrorCode::kDegenerateSample, "empirical_cca: a sample block has zero rank");
  }
  const Eigen::MatrixXd cross = wy.W * syz * wz.W.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);

  CcaEstimate out;
  out.rho = svd.singularValues()(0);
  out.rank_y = wy.W.rows();
  out.rank_z = wz.W.rows();
  out.ridge_y = wy.ridge;
  out.ridge_z = wz.ridge;
  return out;
}

Assumption1Report assumption1_estimate(const TrajectoryDataset& dataset, Eigen::Index steps) {
  if (!dataset.has_latents() || !dataset.has_distractors()) {
    throw Error(ErrorCode::kMissingGroundTruth, "assumption1_estimate needs H and Z");
  }
  if (steps < 1 || steps > dataset.horizon) {
    throw Error(ErrorCode::kHorizonTooShort, "assumption1_estimate: steps exceed horizon");
  }
  Assumption1Report report;
  auto cca_or_zero = [](const Eigen::MatrixXd& h, const Eigen::MatrixXd& z) {
    try {
      return empirical_cca(h, z).rho;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateSample) throw;
      return 0.0;  // identically-zero distractor
    }
  };
  for (Eigen::Index i = 1; i <= steps; ++i) {
    const Eigen::MatrixXd z = stack({&dataset.Z[i], &dataset.Z[0]});
    const Eigen::MatrixXd h = stack({&dataset.H[i], &dataset.H[0]});
    const double rho = cca_or_zero(h, z);

    Eigen::MatrixXd h_ext = h;
    if (i >= 2) {
      const Eigen::Index l = dataset.l;
      h_ext.conservativeResize(h.rows() + (i - 1) * l, Eigen::NoChange);
      for (Eigen::Index k = 0; k <= i - 2; ++k) {
        h_ext.middleRows(h.rows() + k * l, l) = dataset.U[k];
      }
    }
    const double rho_ext = cca_or_zero(h_ext, z);

    report.rho.push_back(rho);
    report.extended_rho.push_back(rho_ext);
    report.max_rho = std::max(report.max_rho, rho);
    report.max_extended_rho = std::max(report.max_extended_rho, rho_ext);
  }
  return report;
}

ControllabilityCheck check_v_controllability(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                             const Eigen::MatrixXd& V, double tol) {
  const Eigen::Index d = A.rows();
  if (A.cols() != d || B.rows() != d || V.rows() != d) {
    throw Error(ErrorCode::kDimensionMismatch, "check_v_controllability: shapes inconsistent");
  }
  const Eigen::MatrixXd basis = orthonormality_defect(V) > 1e-12 ? orth_basis(V, tol) : V;
  const Eigen::Index r = basis.cols();
  const Eigen::Index l = B.cols();

  ControllabilityCheck out;
  out.contained = relative_leak(basis, A) <= tol && relative_leak(basis, A.transpose()) <= tol &&
                  relative_leak(basis, B) <= tol;

  Eigen::MatrixXd krylov(d, r * l);
  Eigen::MatrixXd block = B;
  for (Eigen::Index k = 0; k < r; ++k) {
    krylov.middleCols(k * l, l) = block;
    block = A * block;
  }
  out.krylov_rank = numerical_rank(krylov, tol);
  out.pass = out.contained && out.krylov_rank == r;
  return out;
}

SubspaceDistance subspace_distance(const SubspaceEstimate& estimate, const Eigen::MatrixXd& V) {
  SubspaceDistance out;
  out.estimate_dim = estimate.dim();
  out.true_dim = V.cols();
  out.dimension_mismatch = out.estimate_dim != out.true_dim;
  const auto angles = principal_angles(estimate.basis, V);
  if (angles.empty()) {
    out.max_angle = out.dimension_mismatch ? std::acos(0.0) : 0.0;
  } else {
    out.max_angle = angles.front();
  }
  return out;
}

}  // namespace hsid
