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

#include "hsid/types.hpp"

#include <cmath>
#include <cstring>

#include "hsid/diagnostics.hpp"
#include "hsid/error.hpp"
#include "hsid/numerics.hpp"
#include "hsid/overloaded.hpp"
#include "hsid/rng.hpp"

namespace hsid {
namespace {

constexpr Eigen::Index kCalibrationSamples = 20000;

}  // namespace

Eigen::MatrixXd orthonormal_complement(const Eigen::MatrixXd& V) {
  const Eigen::Index d = V.rows();
  const Eigen::Index r = V.cols();
  if (r == 0) return Eigen::MatrixXd::Identity(d, d);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(V);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  return Q.rightCols(d - r);
}

HiddenSubspaceSystem HiddenSubspaceSystem::create(Eigen::MatrixXd A_bar, Eigen::MatrixXd B_bar,
                                                  Eigen::MatrixXd V, DistractorSpec distractor) {
  const Eigen::Index d = V.rows();
  const Eigen::Index r = V.cols();
  const Eigen::Index l = B_bar.cols();
  if (r < 1 || l < 1 || r > d || l > r) {
    throw Error(ErrorCode::kInvalidArgument, "system dimensions must satisfy 1 <= l <= r <= d");
  }
  if (A_bar.rows() != r || A_bar.cols() != r || B_bar.rows() != r) {
    throw Error(ErrorCode::kInvalidArgument, "A_bar must be r x r and B_bar r x l");
  }
  if (orthonormality_defect(V) > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, "V must have orthonormal columns");
  }
  if (numerical_rank(B_bar) != l) {
    throw Error(ErrorCode::kInvalidArgument, "B_bar must have full column rank");
  }

  HiddenSubspaceSystem sys;
  sys.A_bar_ = std::move(A_bar);
  sys.B_bar_ = std::move(B_bar);
  sys.V_ = std::move(V);
  sys.V_perp_ = orthonormal_complement(sys.V_);
  sys.distractor_ = std::move(distractor);

  const Eigen::Index k = d - r;
  std::visit(
      Overloaded{
          [](const ZeroDistractor&) {},
          [&](const GaussianDistractor& g) {
            if (!(g.scale >= 0.0)) {
              throw Error(ErrorCode::kInvalidArgument, "Gaussian distractor scale must be >= 0");
            }
          },
          [&](const PolynomialDistractor& p) {
            if (p.degree < 2) {
              throw Error(ErrorCode::kInvalidArgument, "polynomial distractor degree must be >= 2");
            }
            sys.terms_ = monomial_exponents(static_cast<int>(r), 2, p.degree);
            const auto m = static_cast<Eigen::Index>(sys.terms_.size());
            Engine coeff_engine = make_engine(p.coefficient_seed, Stream::kDistractorCoefficients,
                                              {static_cast<std::uint64_t>(d),
                                               static_cast<std::uint64_t>(r)});
            sys.coefficients_ = gaussian_matrix(k, m, coeff_engine, 1.0 / std::sqrt(double(m)));
            if (p.orthogonalize_linear && k > 0) {
              Engine cal = make_engine(p.coefficient_seed, Stream::kDistractorCalibration,
                                       {static_cast<std::uint64_t>(r)});
              const Eigen::MatrixXd H = gaussian_matrix(r, kCalibrationSamples, cal);
              const Eigen::MatrixXd G = sys.coefficients_ * evaluate_monomials(sys.terms_, H);
              // K = argmin ||G - K H||_F.
              sys.linear_correction_ =
                  min_norm_lstsq(H.transpose(), G.transpose()).solution.transpose();
            }
          },
          [&](const TabulatedDistractor& t) {
            for (const auto& e : t.terms) {
              if (static_cast<Eigen::Index>(e.size()) != r) {
                throw Error(ErrorCode::kInvalidArgument, "tabulated term arity must equal r");
              }
            }
            if (t.coefficients.rows() != k ||
                t.coefficients.cols() != static_cast<Eigen::Index>(t.terms.size())) {
              throw Error(ErrorCode::kInvalidArgument,
                          "tabulated coefficients must be (d - r) x terms");
            }
            sys.terms_ = t.terms;
            sys.coefficients_ = t.coefficients;
          },
      },
      sys.distractor_);

  const LiftedMatrices lifted = derive_lifted(sys);
  sys.controllability_ =
      check_v_controllability(lifted.A.transpose(), sys.B_pinv().transpose(), sys.V_);
  return sys;
}

Eigen::MatrixXd HiddenSubspaceSystem::B_pinv() const {
  return pinv(B_bar_) * V_.transpose();
}

LiftedMatrices derive_lifted(const HiddenSubspaceSystem& system) {
  const Eigen::MatrixXd& V = system.V();
  return {V * system.A_bar() * V.transpose(), V * system.B_bar()};
}

void TrajectoryDataset::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kDimensionMismatch, what);
  };
  check(static_cast<Eigen::Index>(X.size()) == horizon + 1, "X must have horizon + 1 steps");
  check(static_cast<Eigen::Index>(U.size()) == horizon, "U must have horizon steps");
  for (const auto& m : X) check(m.rows() == d && m.cols() == n, "X step must be d x n");
  for (const auto& m : U) check(m.rows() == l && m.cols() == n, "U step must be l x n");
  if (!H.empty()) {
    check(static_cast<Eigen::Index>(H.size()) == horizon + 1, "H must have horizon + 1 steps");
    for (const auto& m : H) check(m.rows() == r_meta && m.cols() == n, "H step must be r x n");
  }
  if (!Z.empty()) {
    check(static_cast<Eigen::Index>(Z.size()) == horizon + 1, "Z must have horizon + 1 steps");
    for (const auto& m : Z) check(m.rows() == d && m.cols() == n, "Z step must be d x n");
  }
}

namespace {

bool same_steps(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) return false;
    const auto bytes = static_cast<size_t>(a[i].size()) * sizeof(double);
    if (bytes > 0 && std::memcmp(a[i].data(), b[i].data(), bytes) != 0) return false;
  }
  return true;
}

}  // namespace

bool operator==(const TrajectoryDataset& a, const TrajectoryDataset& b) {
  return a.d == b.d && a.l == b.l && a.r_meta == b.r_meta && a.horizon == b.horizon &&
         a.n == b.n && a.seed == b.seed && a.noisy_one_step == b.noisy_one_step &&
         same_steps(a.X, b.X) && same_steps(a.U, b.U) && same_steps(a.H, b.H) &&
         same_steps(a.Z, b.Z);
}

}  // namespace hsid
