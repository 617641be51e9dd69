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

// Dense kernels shared by every solver: SVD-based pseudoinverse, minimal-norm
// least squares, the lexicographic two-stage solve, orthonormal bases and
// principal angles. Everything goes through a thin SVD with a relative rank
// cutoff (sigma_i > tol * sigma_max); normal equations are never formed.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "hsid/error.hpp"

namespace hsid {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kDefaultRankTol = 1e-8;

/// Thin SVD truncated to the numerically nonzero part of the spectrum.
template <typename Scalar>
struct TruncatedSvd {
  MatrixX<Scalar> U;       // p x k
  VectorX<Scalar> sigma;   // k, nonincreasing
  MatrixX<Scalar> V;       // q x k
  Eigen::Index rank() const { return sigma.size(); }
};

/// Thin SVD keeping sigma > tol * max(sigma_max, scale). A positive `scale`
/// measures the cutoff against an outer problem, so a matrix that is pure
/// round-off relative to that problem truncates to rank 0.
template <typename Derived>
TruncatedSvd<typename Derived::Scalar> truncated_svd(const Eigen::MatrixBase<Derived>& M,
                                                     typename Derived::Scalar tol = kDefaultRankTol,
                                                     typename Derived::Scalar scale = 0) {
  using Scalar = typename Derived::Scalar;
  TruncatedSvd<Scalar> out;
  if (M.rows() == 0 || M.cols() == 0) {
    out.U.resize(M.rows(), 0);
    out.V.resize(M.cols(), 0);
    out.sigma.resize(0);
    return out;
  }
  Eigen::BDCSVD<MatrixX<Scalar>> svd(M.eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorX<Scalar>& s = svd.singularValues();
  Eigen::Index k = 0;
  if (s.size() > 0 && s(0) > Scalar(0)) {
    const Scalar cutoff = tol * std::max(s(0), scale);
    while (k < s.size() && s(k) > cutoff) ++k;
  }
  out.U = svd.matrixU().leftCols(k);
  out.sigma = s.head(k);
  out.V = svd.matrixV().leftCols(k);
  return out;
}

/// Moore-Penrose pseudoinverse. Singular values at or below tol * sigma_max are
/// treated as zero; the zero matrix maps to the zero matrix.
template <typename Derived>
MatrixX<typename Derived::Scalar> pinv(const Eigen::MatrixBase<Derived>& M,
                                       typename Derived::Scalar tol = kDefaultRankTol) {
  using Scalar = typename Derived::Scalar;
  if (!(tol > Scalar(0) && tol < Scalar(1))) {
    throw Error(ErrorCode::kInvalidArgument, "pinv tolerance must lie in (0, 1)");
  }
  const auto svd = truncated_svd(M, tol);
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(M.cols(), M.rows());
  if (svd.rank() > 0) {
    out.noalias() = svd.V * svd.sigma.cwiseInverse().asDiagonal() * svd.U.transpose();
  }
  return out;
}

template <typename Scalar>
struct LstsqResult {
  MatrixX<Scalar> solution;
  Scalar residual_norm = Scalar(0);  // ||A X - C||_F
  Eigen::Index effective_rank = 0;
};

/// The unique minimal-Frobenius-norm minimizer of ||A X - C||_F.
template <typename DerivedA, typename DerivedC>
LstsqResult<typename DerivedA::Scalar> min_norm_lstsq(
    const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedC>& C,
    typename DerivedA::Scalar tol = kDefaultRankTol, typename DerivedA::Scalar scale = 0) {
  using Scalar = typename DerivedA::Scalar;
  if (A.rows() != C.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "min_norm_lstsq: A and C row counts differ");
  }
  const auto svd = truncated_svd(A, tol, scale);
  LstsqResult<Scalar> out;
  out.effective_rank = svd.rank();
  out.solution = MatrixX<Scalar>::Zero(A.cols(), C.cols());
  if (svd.rank() > 0) {
    out.solution.noalias() =
        svd.V * (svd.sigma.cwiseInverse().asDiagonal() * (svd.U.transpose() * C));
  }
  out.residual_norm = (A * out.solution - C).norm();
  return out;
}

/// Orthonormal basis of col(M): the left singular vectors with
/// sigma > tol * sigma_max. The zero matrix yields a p x 0 basis.
template <typename Derived>
MatrixX<typename Derived::Scalar> orth_basis(const Eigen::MatrixBase<Derived>& M,
                                             typename Derived::Scalar tol = kDefaultRankTol) {
  return truncated_svd(M, tol).U;
}

template <typename Scalar>
struct TwoStageResult {
  MatrixX<Scalar> X;
  MatrixX<Scalar> Y;
  Scalar residual_norm = Scalar(0);  // ||A_x X + A_y Y - C||_F
  Eigen::Index stage1_rank = 0;
  Eigen::Index stage2_rank = 0;
};

/// Lexicographic minimal-norm solution of min ||A_x X + A_y Y - C||.
///
/// Stage 1 takes X as the minimal-norm minimizer of the problem with the
/// column span of A_y projected out; stage 2 takes Y as the minimal-norm
/// minimizer of ||A_y Y - P_B (C - A_x X)||. On a consistent system every
/// other zero-residual pair (X', Y') has ||X|| <= ||X'||, with ties broken by
/// ||Y|| <= ||Y'||. Both stages cut singular values against the scale of the
/// stacked operator [A_x A_y], so a stage-1 operator that is round-off left
/// over from projecting out col(A_y) counts as zero.
template <typename DerivedX, typename DerivedY, typename DerivedC>
TwoStageResult<typename DerivedX::Scalar> two_stage_min_norm(
    const Eigen::MatrixBase<DerivedX>& A_x, const Eigen::MatrixBase<DerivedY>& A_y,
    const Eigen::MatrixBase<DerivedC>& C, typename DerivedX::Scalar tol = kDefaultRankTol) {
  using Scalar = typename DerivedX::Scalar;
  if (A_x.rows() != C.rows() || A_y.rows() != C.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "two_stage_min_norm: row counts differ");
  }
  const auto svd_y = truncated_svd(A_y, tol);
  Scalar scale = svd_y.rank() > 0 ? svd_y.sigma(0) : Scalar(0);
  if (A_x.size() > 0) {
    scale = std::max(scale, Eigen::BDCSVD<MatrixX<Scalar>>(A_x.eval()).singularValues()(0));
  }
  Eigen::Index rank_y = 0;
  while (rank_y < svd_y.rank() && svd_y.sigma(rank_y) > tol * scale) ++rank_y;
  // P_B is applied as U_B U_B^T without materializing the m x m projector.
  const MatrixX<Scalar> U_B = svd_y.U.leftCols(rank_y);
  const MatrixX<Scalar> Ax_reduced = A_x - U_B * (U_B.transpose() * A_x);
  const MatrixX<Scalar> C_reduced = C - U_B * (U_B.transpose() * C);

  TwoStageResult<Scalar> out;
  auto stage1 = min_norm_lstsq(Ax_reduced, C_reduced, tol, scale);
  out.X = std::move(stage1.solution);
  out.stage1_rank = stage1.effective_rank;

  const MatrixX<Scalar> remainder = C - A_x * out.X;
  const MatrixX<Scalar> target = U_B * (U_B.transpose() * remainder);
  auto stage2 = min_norm_lstsq(A_y, target, tol, scale);
  out.Y = std::move(stage2.solution);
  out.stage2_rank = stage2.effective_rank;

  out.residual_norm = (A_x * out.X + A_y * out.Y - C).norm();
  return out;
}

/// Largest entrywise deviation of U^T U from the identity.
template <typename Derived>
typename Derived::Scalar orthonormality_defect(const Eigen::MatrixBase<Derived>& U) {
  using Scalar = typename Derived::Scalar;
  if (U.cols() == 0) return Scalar(0);
  const MatrixX<Scalar> gram = U.transpose() * U;
  return (gram - MatrixX<Scalar>::Identity(U.cols(), U.cols())).cwiseAbs().maxCoeff();
}

/// Principal angles between col(U) and col(W), nonincreasing, in [0, pi/2].
/// Both inputs must have orthonormal columns (Gram defect <= 1e-8).
template <typename DerivedU, typename DerivedW>
std::vector<typename DerivedU::Scalar> principal_angles(const Eigen::MatrixBase<DerivedU>& U,
                                                        const Eigen::MatrixBase<DerivedW>& W) {
  using Scalar = typename DerivedU::Scalar;
  if (U.rows() != W.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "principal_angles: ambient dimensions differ");
  }
  if (orthonormality_defect(U) > Scalar(1e-8) || orthonormality_defect(W) > Scalar(1e-8)) {
    throw Error(ErrorCode::kInvalidArgument, "principal_angles: inputs must be orthonormal");
  }
  // Work with W the narrower basis so both spectra below have k entries.
  if (W.cols() > U.cols()) return principal_angles(W, U);
  const Eigen::Index k = W.cols();
  std::vector<Scalar> angles;
  if (k == 0) return angles;
  const MatrixX<Scalar> cross = U.transpose() * W;
  const MatrixX<Scalar> residual = W - U * cross;
  const VectorX<Scalar> cosines = Eigen::JacobiSVD<MatrixX<Scalar>>(cross).singularValues();
  const VectorX<Scalar> sines = Eigen::JacobiSVD<MatrixX<Scalar>>(residual).singularValues();
  angles.reserve(k);
  // Cosines are nonincreasing and sines nonincreasing, so cosines(k-1-i) and
  // sines(i) describe the i-th largest angle. acos loses accuracy near zero
  // and asin near pi/2; each is used on its well-conditioned half.
  const Scalar half = Scalar(1) / std::sqrt(Scalar(2));
  for (Eigen::Index i = 0; i < k; ++i) {
    const Scalar c = std::clamp(cosines(k - 1 - i), Scalar(0), Scalar(1));
    const Scalar s = std::clamp(sines(i), Scalar(0), Scalar(1));
    angles.push_back(c < half ? std::acos(c) : std::asin(s));
  }
  return angles;
}

/// Numerical rank at a relative cutoff.
template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& M,
                            typename Derived::Scalar tol = kDefaultRankTol) {
  if (M.rows() == 0 || M.cols() == 0) return 0;
  Eigen::BDCSVD<MatrixX<typename Derived::Scalar>> svd(M.eval());
  const auto& s = svd.singularValues();
  if (s(0) <= 0) return 0;
  Eigen::Index k = 0;
  while (k < s.size() && s(k) > tol * s(0)) ++k;
  return k;
}

}  // namespace hsid
