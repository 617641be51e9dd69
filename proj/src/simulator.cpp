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

#include "hsid/simulator.hpp"

#include <cmath>
#include <string>

#include "hsid/error.hpp"
#include "hsid/overloaded.hpp"

namespace hsid {
namespace {

constexpr int kMaxGenerationAttempts = 100;

}  // namespace

void GenerationConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kInvalidArgument, "generation." + field + ": " + why);
  };
  if (d < 1) fail("d", "must be positive");
  if (r < 1) fail("r", "must be positive");
  if (l < 1) fail("l", "must be positive");
  if (r > d) fail("r", "must not exceed d");
  if (l > r) fail("l", "must not exceed r");
  if (!(a_spectral_norm_target > 0.0 && a_spectral_norm_target <= 2.0)) {
    fail("a_spectral_norm_target", "must lie in (0, 2]");
  }
  if (!(noise_sigma >= 0.0)) fail("noise_sigma", "must be nonnegative");
  if (const auto* p = std::get_if<PolynomialDistractor>(&distractor); p && p->degree < 2) {
    fail("distractor.degree", "must be at least 2");
  }
  if (const auto* g = std::get_if<GaussianDistractor>(&distractor); g && !(g->scale >= 0.0)) {
    fail("distractor.scale", "must be nonnegative");
  }
}

HiddenSubspaceSystem random_system(const GenerationConfig& config, int* attempts) {
  config.validate();
  const Eigen::Index d = config.d;
  const Eigen::Index r = config.r;
  const Eigen::Index l = config.l;
  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    Engine engine = make_engine(config.seed, Stream::kSystem, {static_cast<std::uint64_t>(attempt)});
    Eigen::MatrixXd A_bar = gaussian_matrix(r, r, engine);
    const Eigen::MatrixXd B_bar = gaussian_matrix(r, l, engine);
    const Eigen::MatrixXd G = gaussian_matrix(d, r, engine);

    const double spectral = Eigen::JacobiSVD<Eigen::MatrixXd>(A_bar).singularValues()(0);
    if (!(spectral > 0.0)) continue;
    A_bar *= config.a_spectral_norm_target / spectral;

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd V = qr.householderQ() * Eigen::MatrixXd::Identity(d, r);

    try {
      HiddenSubspaceSystem system =
          HiddenSubspaceSystem::create(std::move(A_bar), B_bar, std::move(V), config.distractor);
      if (!system.controllability().pass) continue;
      if (attempts) *attempts = attempt + 1;
      return system;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInvalidArgument) throw;
    }
  }
  throw Error(ErrorCode::kGenerationFailed,
              "no admissible system after " + std::to_string(kMaxGenerationAttempts) + " attempts");
}

Eigen::MatrixXd realize_distractor(const HiddenSubspaceSystem& system, const Eigen::MatrixXd& H,
                                   Engine& engine) {
  const Eigen::Index d = system.d();
  const Eigen::Index n = H.cols();
  if (H.rows() != system.r()) {
    throw Error(ErrorCode::kDimensionMismatch, "realize_distractor: H must have r rows");
  }
  return std::visit(
      Overloaded{
          [&](const ZeroDistractor&) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(d, n); },
          [&](const GaussianDistractor& g) -> Eigen::MatrixXd {
            const Eigen::MatrixXd w = gaussian_matrix(system.V_perp().cols(), n, engine, g.scale);
            return system.V_perp() * w;
          },
          [&](const auto&) -> Eigen::MatrixXd {
            Eigen::MatrixXd g =
                system.distractor_coefficients() * evaluate_monomials(system.distractor_terms(), H);
            if (system.distractor_linear_correction().size() > 0) {
              g -= system.distractor_linear_correction() * H;
            }
            return system.V_perp() * g;
          },
      },
      system.distractor());
}

Trajectory rollout(const HiddenSubspaceSystem& system, const Eigen::VectorXd& h0,
                   const Eigen::MatrixXd& controls, Engine& engine, double noise_sigma) {
  if (h0.size() != system.r() || controls.rows() != system.l()) {
    throw Error(ErrorCode::kDimensionMismatch, "rollout: h0 must be r-dim, controls l x horizon");
  }
  const Eigen::Index horizon = controls.cols();
  Trajectory out;
  out.H.resize(system.r(), horizon + 1);
  out.H.col(0) = h0;
  for (Eigen::Index t = 0; t < horizon; ++t) {
    out.H.col(t + 1) = system.A_bar() * out.H.col(t) + system.B_bar() * controls.col(t);
  }
  out.Z = realize_distractor(system, out.H, engine);
  out.X = system.V() * out.H + out.Z;
  if (noise_sigma > 0.0) {
    out.X += gaussian_matrix(system.d(), horizon + 1, engine, noise_sigma);
  }
  return out;
}

TrajectoryDataset sample_batch(const HiddenSubspaceSystem& system, Eigen::Index n,
                               Eigen::Index horizon, std::uint64_t seed, double noise_sigma,
                               bool keep_ground_truth) {
  if (n < 1 || horizon < 1) {
    throw Error(ErrorCode::kInvalidArgument, "sample_batch needs n >= 1 and horizon >= 1");
  }
  TrajectoryDataset ds;
  ds.d = system.d();
  ds.l = system.l();
  ds.r_meta = system.r();
  ds.horizon = horizon;
  ds.n = n;
  ds.seed = seed;
  ds.X.assign(horizon + 1, Eigen::MatrixXd(ds.d, n));
  ds.U.assign(horizon, Eigen::MatrixXd(ds.l, n));
  if (keep_ground_truth) {
    ds.H.assign(horizon + 1, Eigen::MatrixXd(ds.r_meta, n));
    ds.Z.assign(horizon + 1, Eigen::MatrixXd(ds.d, n));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    Engine engine = make_engine(seed, Stream::kTrajectory, {static_cast<std::uint64_t>(i)});
    const Eigen::VectorXd h0 = gaussian_matrix(system.r(), 1, engine);
    const Eigen::MatrixXd controls = gaussian_matrix(system.l(), horizon, engine);
    const Trajectory traj = rollout(system, h0, controls, engine, noise_sigma);
    for (Eigen::Index t = 0; t <= horizon; ++t) {
      ds.X[t].col(i) = traj.X.col(t);
      if (keep_ground_truth) {
        ds.H[t].col(i) = traj.H.col(t);
        ds.Z[t].col(i) = traj.Z.col(t);
      }
      if (t < horizon) ds.U[t].col(i) = controls.col(t);
    }
  }
  return ds;
}

TrajectoryDataset warp_observations(
    const TrajectoryDataset& dataset,
    const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& warp) {
  TrajectoryDataset out = dataset;
  out.Z.clear();
  for (auto& x : out.X) x = warp(x);
  out.d = out.X.front().rows();
  out.validate();
  return out;
}

Eigen::MatrixXd signed_cube_root(const Eigen::MatrixXd& M) {
  return M.unaryExpr([](double v) { return std::cbrt(v); });
}

}  // namespace hsid
