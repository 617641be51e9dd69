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

// Config-driven experiment runner. Every trial derives its system and data
// seeds from (master seed, trial index), so reports do not depend on the
// number of worker threads or on scheduling order.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hsid/error.hpp"
#include "hsid/features.hpp"
#include "hsid/nonlinear.hpp"
#include "hsid/simulator.hpp"

namespace hsid {

enum class ExperimentKind { kFitLinear, kFitNoisy, kFitNonlinear, kSweepSamples, kSweepTau, kVerify };

std::string_view to_string(ExperimentKind kind);

struct FeatureSpec {
  DictionaryKind kind = DictionaryKind::kIdentity;
  int degree = 3;
  Eigen::Index count = 64;
  double bandwidth = 1.0;
  std::uint64_t seed = 0;
  /// Rows of a learned combination over the dictionary; 0 keeps the dictionary.
  Eigen::Index learned_dim = 0;

  FeatureMap build(Eigen::Index input_dim) const;
};

enum class Observation { kIdentity, kCubeRoot };

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kFitLinear;
  std::uint64_t seed = 0;
  int trials = 1;

  Eigen::Index d = 1;
  Eigen::Index r = 1;
  Eigen::Index l = 1;
  double a_spectral_norm = 0.9;
  DistractorSpec distractor = ZeroDistractor{};
  /// Polynomial coefficients drawn per trial when the config gives no seed.
  bool distractor_seed_per_trial = false;

  Eigen::Index n = 0;
  Eigen::Index horizon = 0;  // 0: the step count (tau for nonlinear runs)

  Eigen::Index steps = 0;  // 0: r
  double rank_tol = 1e-8;
  double solver_tol = 1e-8;
  double recovery_tol = 1e-6;

  double sigma = 0.0;
  double slack = 0.25;

  std::vector<Eigen::Index> n_grid;
  Eigen::Index tau_max = 0;

  Observation observation = Observation::kIdentity;
  FeatureSpec features;
  Eigen::Index tau = 0;
  Eigen::Index held_out_n = 0;  // 0: n
  OptimizerConfig optimizer;

  std::string report_name = "report.json";
  std::string csv_name = "curve.csv";

  Eigen::Index effective_steps() const { return steps > 0 ? steps : r; }
};

/// Strict parse: unknown keys, wrong types and out-of-range values throw
/// Error(kConfigInvalid) naming the field.
ExperimentConfig parse_config(const nlohmann::json& j);
/// Normalized form with every default spelled out; parse_config accepts it.
nlohmann::json config_to_json(const ExperimentConfig& config);

struct ExperimentReport {
  /// config, trials, aggregates, version, rng, runtime. Everything except
  /// "runtime" is reproducible bit-exactly from the echoed config.
  nlohmann::json json;
  /// (n, success_rate, median_error) for sweep-samples and
  /// (tau, mean_dim, min_dim, max_dim) for sweep-tau; empty otherwise.
  std::string csv;
};

/// threads = 0 uses std::thread::hardware_concurrency().
ExperimentReport run_experiment(const ExperimentConfig& config, unsigned threads = 1);

/// System and data seeds of trial t.
GenerationConfig trial_generation(const ExperimentConfig& config, std::uint64_t trial);
std::uint64_t trial_data_seed(const ExperimentConfig& config, std::uint64_t trial,
                              std::uint64_t salt = 0);

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

int exit_code_for(ErrorCode code);

}  // namespace hsid
