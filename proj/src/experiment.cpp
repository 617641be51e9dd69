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

#include "hsid/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <set>
#include <sstream>
#include <thread>
#include <type_traits>

#include "hsid/diagnostics.hpp"
#include "hsid/linear_solver.hpp"
#include "hsid/noisy.hpp"
#include "hsid/rng.hpp"
#include "hsid/serialization.hpp"

#ifndef HSID_VERSION
#define HSID_VERSION "unknown"
#endif

namespace hsid {
namespace {

using nlohmann::json;

constexpr double kCertificateLoss = 1e-8;
constexpr double kCertificateContainment = 1e-4;
constexpr double kCertificateDynamics = 1e-3;

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kConfigInvalid, field + ": " + what);
}

// One JSON object of the config; records which keys were read so that
// finish() can reject the rest.
class Section {
 public:
  Section(const json* j, std::string path) : j_(j), path_(std::move(path)) {
    if (j_ != nullptr && !j_->is_object()) invalid(path_, "expected an object");
  }

  bool has(const char* key) const { return j_ != nullptr && j_->contains(key); }

  template <typename T>
  std::optional<T> get(const char* key) {
    if (!has(key)) return std::nullopt;
    used_.insert(key);
    const json& v = j_->at(key);
    const std::string field = path_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) invalid(field, "expected a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) invalid(field, "expected a string");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) invalid(field, "expected a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) invalid(field, "expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) invalid(field, "expected a number");
    } else {
      if (!v.is_array()) invalid(field, "expected an array");
      try {
        return v.get<T>();
      } catch (const json::exception&) {
        invalid(field, "array has the wrong element type");
      }
    }
    return v.get<T>();
  }

  template <typename T>
  T get_or(const char* key, T fallback) {
    return get<T>(key).value_or(fallback);
  }

  const json* child(const char* key) {
    if (!has(key)) return nullptr;
    used_.insert(key);
    return &j_->at(key);
  }

  const std::string& path() const { return path_; }

  void finish() const {
    if (j_ == nullptr) return;
    for (const auto& [key, _] : j_->items()) {
      if (!used_.count(key)) invalid(path_ + "." + key, "unknown field");
    }
  }

 private:
  const json* j_;
  std::string path_;
  std::set<std::string> used_;
};

ExperimentKind parse_kind(const std::string& name) {
  for (ExperimentKind k : {ExperimentKind::kFitLinear, ExperimentKind::kFitNoisy,
                           ExperimentKind::kFitNonlinear, ExperimentKind::kSweepSamples,
                           ExperimentKind::kSweepTau, ExperimentKind::kVerify}) {
    if (name == to_string(k)) return k;
  }
  invalid("experiment", "unknown experiment '" + name + "'");
}

std::string_view to_string(DictionaryKind kind) {
  switch (kind) {
    case DictionaryKind::kIdentity: return "identity";
    case DictionaryKind::kMonomials: return "monomials";
    case DictionaryKind::kRandomFourier: return "random_fourier";
  }
  return "identity";
}

std::string_view to_string(Observation obs) {
  return obs == Observation::kCubeRoot ? "cube_root" : "identity";
}

void require_positive(Eigen::Index v, const std::string& field) {
  if (v < 1) invalid(field, "must be >= 1");
}

void require_range(double v, double lo, double hi, const std::string& field) {
  if (!(v > lo && v < hi)) {
    std::ostringstream os;
    os << "must lie in (" << lo << ", " << hi << ")";
    invalid(field, os.str());
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double max_of(const std::vector<double>& v) {
  return v.empty() ? std::nan("") : *std::max_element(v.begin(), v.end());
}

std::vector<double> column(const json& trials, const char* key) {
  std::vector<double> out;
  for (const auto& t : trials) out.push_back(t.at(key).get<double>());
  return out;
}

double rate(const json& trials, const char* key) {
  if (trials.empty()) return 0.0;
  double hits = 0.0;
  for (const auto& t : trials) hits += t.at(key).get<bool>() ? 1.0 : 0.0;
  return hits / static_cast<double>(trials.size());
}

// Runs job(i) for i in [0, count) on a pool of workers. Results are stored
// by index; the first failure by index is rethrown after all workers join.
template <typename Job>
std::vector<json> run_indexed(size_t count, unsigned threads, Job job) {
  std::vector<json> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < count; i = next++) {
      try {
        results[i] = job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

Eigen::Index data_horizon(const ExperimentConfig& cfg, Eigen::Index needed) {
  return std::max(cfg.horizon, needed);
}

json linear_trial(const ExperimentConfig& cfg, std::uint64_t t, Eigen::Index n,
                  std::uint64_t salt, bool extended) {
  int attempts = 0;
  const HiddenSubspaceSystem system = random_system(trial_generation(cfg, t), &attempts);
  const Eigen::Index steps = cfg.effective_steps();
  const TrajectoryDataset data =
      sample_batch(system, n, data_horizon(cfg, steps), trial_data_seed(cfg, t, salt));
  const InverseModelSolution sol = fit_inverse_model(data, steps, cfg.solver_tol);
  const VerificationReport rep = verify_solution(system, sol, cfg.recovery_tol, cfg.rank_tol);

  json out{{"trial", t},
           {"n", n},
           {"generation_attempts", attempts},
           {"residual_rms", sol.residual_rms},
           {"loss", sol.loss},
           {"p_error", rep.p_error},
           {"max_l_error", rep.max_l_error},
           {"max_t_error", rep.max_t_error},
           {"pb_identity_error", rep.pb_identity_error},
           {"max_angle", rep.max_angle},
           {"subspace_dim", rep.subspace_dim},
           {"dimension_mismatch", rep.dimension_mismatch},
           {"recovery_error", std::max({rep.p_error, rep.max_l_error, rep.max_t_error})},
           {"pass", rep.pass}};
  if (extended) {
    const Assumption1Report a1 = assumption1_estimate(data, steps);
    const ControllabilityCheck cc = system.controllability();
    const TrajectoryDataset held_out =
        sample_batch(system, n, data_horizon(cfg, steps), trial_data_seed(cfg, t, salt + 1));
    out["max_rho"] = a1.max_rho;
    out["max_extended_rho"] = a1.max_extended_rho;
    out["krylov_rank"] = cc.krylov_rank;
    out["v_controllable"] = cc.pass;
    out["held_out_residual_rms"] = inverse_prediction_rms(sol, held_out.X, held_out.U);
  }
  return out;
}

json noisy_trial(const ExperimentConfig& cfg, std::uint64_t t) {
  const HiddenSubspaceSystem system = random_system(trial_generation(cfg, t));
  const NoisyTrial trial =
      run_noisy_trial(system, cfg.sigma, cfg.n, trial_data_seed(cfg, t), cfg.slack);
  return json{{"trial", t},          {"p1_norm", trial.p1_norm}, {"p2_norm", trial.p2_norm},
              {"rho", trial.rho},    {"bound", trial.bound},     {"satisfied", trial.satisfied}};
}

TrajectoryDataset observe(const ExperimentConfig& cfg, TrajectoryDataset data) {
  if (cfg.observation == Observation::kCubeRoot) return warp_observations(data, signed_cube_root);
  return data;
}

json nonlinear_trial(const ExperimentConfig& cfg, std::uint64_t t) {
  const HiddenSubspaceSystem system = random_system(trial_generation(cfg, t));
  const Eigen::Index horizon = data_horizon(cfg, cfg.tau);
  const TrajectoryDataset train =
      observe(cfg, sample_batch(system, cfg.n, horizon, trial_data_seed(cfg, t, 0)));
  const Eigen::Index held_n = cfg.held_out_n > 0 ? cfg.held_out_n : cfg.n;
  const TrajectoryDataset held_out =
      observe(cfg, sample_batch(system, held_n, horizon, trial_data_seed(cfg, t, 1)));

  OptimizerConfig opt = cfg.optimizer;
  opt.seed = derive_seed(cfg.optimizer.seed, Stream::kOptimizerInit, {t});
  const FeatureMap fm = cfg.features.build(system.d());
  const NonlinearSolution sol =
      linearize(fit_nonlinear(train, fm, cfg.tau, opt), train, cfg.rank_tol);
  const double held_dyn = dynamics_residual_rms(sol, held_out);

  json out{{"trial", t},
           {"loss", sol.loss},
           {"residual_rms", sol.residual_rms},
           {"held_out_inverse_rms", inverse_prediction_rms(sol, held_out)},
           {"containment_residual", sol.containment_residual},
           {"subspace_dim", sol.basis->cols()},
           {"dynamics_residual_rms", sol.dynamics_residual_rms},
           {"held_out_dynamics_rms", held_dyn},
           {"iterations", sol.diagnostics.iterations},
           {"non_convergence", sol.diagnostics.non_convergence},
           {"trivial", sol.diagnostics.trivial},
           {"certified", sol.loss < kCertificateLoss &&
                             sol.containment_residual < kCertificateContainment &&
                             held_dyn < kCertificateDynamics}};
  if (cfg.observation == Observation::kIdentity && cfg.features.kind == DictionaryKind::kIdentity &&
      cfg.features.learned_dim == 0) {
    const InverseModelSolution lin = fit_inverse_model(train, cfg.tau, cfg.solver_tol);
    double diff = (lin.P - sol.P).norm() / std::max(lin.P.norm(), 1e-12);
    for (size_t i = 0; i < lin.L.size(); ++i) {
      diff = std::max(diff, (lin.L[i] - sol.L[i]).norm() / std::max(lin.L[i].norm(), 1e-12));
    }
    for (size_t k = 0; k < lin.T.size(); ++k) {
      diff = std::max(diff, (lin.T[k] - sol.T[k]).norm() / std::max(lin.T[k].norm(), 1e-12));
    }
    out["linear_agreement"] = diff;
  }
  return out;
}

json tau_trial(const ExperimentConfig& cfg, std::uint64_t t) {
  const HiddenSubspaceSystem system = random_system(trial_generation(cfg, t));
  const TrajectoryDataset data = sample_batch(system, cfg.n, data_horizon(cfg, cfg.tau_max),
                                              trial_data_seed(cfg, t));
  const RankScan scan =
      rank_saturation_scan(data, FeatureMap::identity(system.d()), cfg.tau_max, cfg.optimizer,
                           cfg.rank_tol);
  bool saturates_at_r = static_cast<Eigen::Index>(scan.dims.size()) >= system.r();
  for (size_t i = static_cast<size_t>(system.r()) - 1; saturates_at_r && i < scan.dims.size(); ++i) {
    saturates_at_r = scan.dims[i] == system.r();
  }
  bool monotone = std::is_sorted(scan.dims.begin(), scan.dims.end());
  json out{{"trial", t},
           {"dims", scan.dims},
           {"containment", scan.containment},
           {"monotone", monotone},
           {"saturates_at_r", saturates_at_r}};
  out["saturation_tau"] = scan.saturation_tau ? json(*scan.saturation_tau) : json(nullptr);
  return out;
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kFitLinear: return "fit-linear";
    case ExperimentKind::kFitNoisy: return "fit-noisy";
    case ExperimentKind::kFitNonlinear: return "fit-nonlinear";
    case ExperimentKind::kSweepSamples: return "sweep-samples";
    case ExperimentKind::kSweepTau: return "sweep-tau";
    case ExperimentKind::kVerify: return "verify";
  }
  return "fit-linear";
}

FeatureMap FeatureSpec::build(Eigen::Index input_dim) const {
  FeatureMap base;
  switch (kind) {
    case DictionaryKind::kIdentity: base = FeatureMap::identity(input_dim); break;
    case DictionaryKind::kMonomials: base = FeatureMap::monomials(input_dim, degree); break;
    case DictionaryKind::kRandomFourier:
      base = FeatureMap::random_fourier(input_dim, count, bandwidth, seed);
      break;
  }
  if (learned_dim == 0) return base;
  return FeatureMap::learned(base, Eigen::MatrixXd::Identity(learned_dim, base.dictionary_dim()));
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  Section root(&j, "config");
  const auto kind = root.get<std::string>("experiment");
  if (!kind) invalid("experiment", "missing");
  cfg.kind = parse_kind(*kind);
  cfg.seed = root.get_or<std::uint64_t>("seed", 0);
  cfg.trials = root.get_or<int>("trials", 1);
  if (cfg.trials < 1) invalid("trials", "must be >= 1");

  Section sys(root.child("system"), "system");
  if (!root.has("system")) invalid("system", "missing");
  const auto dim = [&](Section& s, const char* key, Eigen::Index fallback) {
    const auto v = s.get<std::int64_t>(key);
    const Eigen::Index out = v ? static_cast<Eigen::Index>(*v) : fallback;
    require_positive(out, s.path() + "." + key);
    return out;
  };
  cfg.d = dim(sys, "d", 0);
  cfg.r = dim(sys, "r", 0);
  cfg.l = dim(sys, "l", 0);
  if (cfg.r > cfg.d) invalid("system.r", "must be <= d");
  if (cfg.l > cfg.r) invalid("system.l", "must be <= r");
  cfg.a_spectral_norm = sys.get_or<double>("a_spectral_norm", 0.9);
  if (!(cfg.a_spectral_norm >= 0.0) || !std::isfinite(cfg.a_spectral_norm)) {
    invalid("system.a_spectral_norm", "must be a finite number >= 0");
  }
  if (const json* dj = sys.child("distractor")) {
    cfg.distractor = distractor_from_json(*dj);
    cfg.distractor_seed_per_trial =
        std::holds_alternative<PolynomialDistractor>(cfg.distractor) && !dj->contains("coefficient_seed");
  }
  sys.finish();

  Section data(root.child("data"), "data");
  cfg.n = data.get_or<std::int64_t>("n", 0);
  cfg.horizon = data.get_or<std::int64_t>("horizon", 0);
  if (cfg.horizon < 0) invalid("data.horizon", "must be >= 0");
  data.finish();

  Section solver(root.child("solver"), "solver");
  cfg.steps = solver.get_or<std::int64_t>("steps", 0);
  if (cfg.steps < 0) invalid("solver.steps", "must be >= 0");
  cfg.rank_tol = solver.get_or<double>("rank_tol", cfg.rank_tol);
  require_range(cfg.rank_tol, 0.0, 1.0, "solver.rank_tol");
  cfg.solver_tol = solver.get_or<double>("tol", cfg.solver_tol);
  require_range(cfg.solver_tol, 0.0, 1.0, "solver.tol");
  cfg.recovery_tol = solver.get_or<double>("recovery_tol", cfg.recovery_tol);
  if (!(cfg.recovery_tol > 0.0)) invalid("solver.recovery_tol", "must be > 0");
  solver.finish();

  Section noisy(root.child("noisy"), "noisy");
  cfg.sigma = noisy.get_or<double>("sigma", 0.0);
  if (!(cfg.sigma >= 0.0) || !std::isfinite(cfg.sigma)) invalid("noisy.sigma", "must be >= 0");
  cfg.slack = noisy.get_or<double>("slack", cfg.slack);
  if (!(cfg.slack >= 0.0)) invalid("noisy.slack", "must be >= 0");
  noisy.finish();

  Section sweep(root.child("sweep"), "sweep");
  cfg.n_grid = sweep.get_or<std::vector<Eigen::Index>>("n_grid", {});
  for (Eigen::Index v : cfg.n_grid) require_positive(v, "sweep.n_grid");
  cfg.tau_max = sweep.get_or<std::int64_t>("tau_max", 0);
  sweep.finish();

  Section nl(root.child("nonlinear"), "nonlinear");
  const std::string obs = nl.get_or<std::string>("observation", "identity");
  if (obs == "identity") {
    cfg.observation = Observation::kIdentity;
  } else if (obs == "cube_root") {
    cfg.observation = Observation::kCubeRoot;
  } else {
    invalid("nonlinear.observation", "expected identity or cube_root");
  }
  cfg.tau = nl.get_or<std::int64_t>("tau", 0);
  cfg.held_out_n = nl.get_or<std::int64_t>("held_out_n", 0);
  if (cfg.held_out_n < 0) invalid("nonlinear.held_out_n", "must be >= 0");
  Section feat(nl.child("features"), "nonlinear.features");
  const std::string fk = feat.get_or<std::string>("kind", "identity");
  if (fk == "identity") {
    cfg.features.kind = DictionaryKind::kIdentity;
  } else if (fk == "monomials") {
    cfg.features.kind = DictionaryKind::kMonomials;
  } else if (fk == "random_fourier") {
    cfg.features.kind = DictionaryKind::kRandomFourier;
  } else {
    invalid("nonlinear.features.kind", "expected identity, monomials or random_fourier");
  }
  cfg.features.degree = feat.get_or<int>("degree", cfg.features.degree);
  if (cfg.features.degree < 1) invalid("nonlinear.features.degree", "must be >= 1");
  cfg.features.count = feat.get_or<std::int64_t>("count", cfg.features.count);
  require_positive(cfg.features.count, "nonlinear.features.count");
  cfg.features.bandwidth = feat.get_or<double>("bandwidth", cfg.features.bandwidth);
  if (!(cfg.features.bandwidth > 0.0)) invalid("nonlinear.features.bandwidth", "must be > 0");
  cfg.features.seed = feat.get_or<std::uint64_t>("seed", 0);
  cfg.features.learned_dim = feat.get_or<std::int64_t>("learned_dim", 0);
  if (cfg.features.learned_dim < 0) invalid("nonlinear.features.learned_dim", "must be >= 0");
  feat.finish();
  Section opt(nl.child("optimizer"), "nonlinear.optimizer");
  cfg.optimizer.max_iterations = opt.get_or<int>("max_iterations", cfg.optimizer.max_iterations);
  if (cfg.optimizer.max_iterations < 1) invalid("nonlinear.optimizer.max_iterations", "must be >= 1");
  cfg.optimizer.relative_tolerance =
      opt.get_or<double>("relative_tolerance", cfg.optimizer.relative_tolerance);
  if (!(cfg.optimizer.relative_tolerance >= 0.0)) {
    invalid("nonlinear.optimizer.relative_tolerance", "must be >= 0");
  }
  cfg.optimizer.init_noise = opt.get_or<double>("init_noise", cfg.optimizer.init_noise);
  if (!(cfg.optimizer.init_noise >= 0.0)) invalid("nonlinear.optimizer.init_noise", "must be >= 0");
  cfg.optimizer.seed = opt.get_or<std::uint64_t>("seed", 0);
  cfg.optimizer.loss_threshold = opt.get_or<double>("loss_threshold", cfg.optimizer.loss_threshold);
  if (!(cfg.optimizer.loss_threshold >= 0.0)) {
    invalid("nonlinear.optimizer.loss_threshold", "must be >= 0");
  }
  opt.finish();
  nl.finish();

  Section output(root.child("output"), "output");
  cfg.report_name = output.get_or<std::string>("report", cfg.report_name);
  cfg.csv_name = output.get_or<std::string>("csv", cfg.csv_name);
  for (const auto& [field, name] : {std::pair{"output.report", &cfg.report_name},
                                    std::pair{"output.csv", &cfg.csv_name}}) {
    if (name->empty() || name->find('/') != std::string::npos) {
      invalid(field, "must be a plain file name");
    }
  }
  output.finish();
  root.finish();

  // Per-experiment requirements.
  switch (cfg.kind) {
    case ExperimentKind::kFitLinear:
    case ExperimentKind::kVerify:
    case ExperimentKind::kFitNoisy:
      require_positive(cfg.n, "data.n");
      break;
    case ExperimentKind::kFitNonlinear:
      require_positive(cfg.n, "data.n");
      require_positive(cfg.tau, "nonlinear.tau");
      if (cfg.features.learned_dim > 0 && cfg.features.kind == DictionaryKind::kIdentity &&
          cfg.features.learned_dim > cfg.d) {
        invalid("nonlinear.features.learned_dim", "exceeds the dictionary width");
      }
      break;
    case ExperimentKind::kSweepSamples:
      if (cfg.n_grid.empty()) invalid("sweep.n_grid", "must list at least one sample size");
      if (cfg.trials < 10) invalid("trials", "sweep-samples needs at least 10 trials");
      break;
    case ExperimentKind::kSweepTau:
      require_positive(cfg.n, "data.n");
      require_positive(cfg.tau_max, "sweep.tau_max");
      break;
  }
  if (cfg.kind == ExperimentKind::kFitNoisy && cfg.horizon > 1) {
    invalid("data.horizon", "fit-noisy uses one-step samples");
  }
  try {
    GenerationConfig g = trial_generation(cfg, 0);
    g.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument) throw Error(ErrorCode::kConfigInvalid, e.what());
    throw;
  }
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json distractor = distractor_to_json(cfg.distractor);
  if (cfg.distractor_seed_per_trial) distractor.erase("coefficient_seed");
  json solver{{"steps", cfg.steps},
              {"rank_tol", cfg.rank_tol},
              {"tol", cfg.solver_tol},
              {"recovery_tol", cfg.recovery_tol}};
  return json{
      {"experiment", std::string(to_string(cfg.kind))},
      {"seed", cfg.seed},
      {"trials", cfg.trials},
      {"system",
       {{"d", cfg.d},
        {"r", cfg.r},
        {"l", cfg.l},
        {"a_spectral_norm", cfg.a_spectral_norm},
        {"distractor", distractor}}},
      {"data", {{"n", cfg.n}, {"horizon", cfg.horizon}}},
      {"solver", solver},
      {"noisy", {{"sigma", cfg.sigma}, {"slack", cfg.slack}}},
      {"sweep", {{"n_grid", cfg.n_grid}, {"tau_max", cfg.tau_max}}},
      {"nonlinear",
       {{"observation", std::string(to_string(cfg.observation))},
        {"tau", cfg.tau},
        {"held_out_n", cfg.held_out_n},
        {"features",
         {{"kind", std::string(to_string(cfg.features.kind))},
          {"degree", cfg.features.degree},
          {"count", cfg.features.count},
          {"bandwidth", cfg.features.bandwidth},
          {"seed", cfg.features.seed},
          {"learned_dim", cfg.features.learned_dim}}},
        {"optimizer",
         {{"max_iterations", cfg.optimizer.max_iterations},
          {"relative_tolerance", cfg.optimizer.relative_tolerance},
          {"init_noise", cfg.optimizer.init_noise},
          {"seed", cfg.optimizer.seed},
          {"loss_threshold", cfg.optimizer.loss_threshold}}}}},
      {"output", {{"report", cfg.report_name}, {"csv", cfg.csv_name}}}};
}

GenerationConfig trial_generation(const ExperimentConfig& cfg, std::uint64_t trial) {
  GenerationConfig g;
  g.d = cfg.d;
  g.r = cfg.r;
  g.l = cfg.l;
  g.seed = derive_seed(cfg.seed, Stream::kTrial, {trial, 0});
  g.a_spectral_norm_target = cfg.a_spectral_norm;
  g.distractor = cfg.distractor;
  if (cfg.distractor_seed_per_trial) {
    std::get<PolynomialDistractor>(g.distractor).coefficient_seed =
        derive_seed(cfg.seed, Stream::kDistractorCoefficients, {trial});
  }
  return g;
}

std::uint64_t trial_data_seed(const ExperimentConfig& cfg, std::uint64_t trial,
                              std::uint64_t salt) {
  return derive_seed(cfg.seed, Stream::kTrial, {trial, 1, salt});
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const auto start = std::chrono::steady_clock::now();
  const auto trials = static_cast<size_t>(cfg.trials);

  ExperimentReport report;
  json trial_rows = json::array();
  json aggregates = json::object();
  switch (cfg.kind) {
    case ExperimentKind::kFitLinear:
    case ExperimentKind::kVerify: {
      const bool extended = cfg.kind == ExperimentKind::kVerify;
      for (auto& row : run_indexed(trials, threads, [&](size_t t) {
             return linear_trial(cfg, t, cfg.n, 0, extended);
           })) {
        trial_rows.push_back(std::move(row));
      }
      aggregates["success_rate"] = rate(trial_rows, "pass");
      aggregates["median_recovery_error"] = median(column(trial_rows, "recovery_error"));
      aggregates["max_recovery_error"] = max_of(column(trial_rows, "recovery_error"));
      aggregates["max_angle"] = max_of(column(trial_rows, "max_angle"));
      aggregates["max_pb_identity_error"] = max_of(column(trial_rows, "pb_identity_error"));
      if (extended) aggregates["median_max_rho"] = median(column(trial_rows, "max_rho"));
      break;
    }
    case ExperimentKind::kFitNoisy: {
      for (auto& row : run_indexed(trials, threads, [&](size_t t) { return noisy_trial(cfg, t); })) {
        trial_rows.push_back(std::move(row));
      }
      const auto rhos = column(trial_rows, "rho");
      aggregates["satisfied_fraction"] = rate(trial_rows, "satisfied");
      aggregates["median_rho"] = median(rhos);
      aggregates["min_rho"] = rhos.empty() ? 0.0 : *std::min_element(rhos.begin(), rhos.end());
      aggregates["max_rho"] = max_of(rhos);
      aggregates["max_p2_norm"] = max_of(column(trial_rows, "p2_norm"));
      break;
    }
    case ExperimentKind::kFitNonlinear: {
      for (auto& row :
           run_indexed(trials, threads, [&](size_t t) { return nonlinear_trial(cfg, t); })) {
        trial_rows.push_back(std::move(row));
      }
      aggregates["certified_rate"] = rate(trial_rows, "certified");
      aggregates["median_loss"] = median(column(trial_rows, "loss"));
      aggregates["max_containment_residual"] = max_of(column(trial_rows, "containment_residual"));
      aggregates["max_held_out_dynamics_rms"] = max_of(column(trial_rows, "held_out_dynamics_rms"));
      break;
    }
    case ExperimentKind::kSweepSamples: {
      const size_t cells = cfg.n_grid.size() * trials;
      auto rows = run_indexed(cells, threads, [&](size_t idx) {
        const size_t g = idx / trials;
        const std::uint64_t t = idx % trials;
        const Eigen::Index n = cfg.n_grid[g];
        return linear_trial(cfg, t, n, static_cast<std::uint64_t>(n), false);
      });
      std::ostringstream csv;
      csv << "n,success_rate,median_error\n";
      json curve = json::array();
      for (size_t g = 0; g < cfg.n_grid.size(); ++g) {
        json cell = json::array();
        for (size_t t = 0; t < trials; ++t) cell.push_back(rows[g * trials + t]);
        const double success = rate(cell, "pass");
        const double med = median(column(cell, "recovery_error"));
        curve.push_back({{"n", cfg.n_grid[g]}, {"success_rate", success}, {"median_error", med}});
        csv << cfg.n_grid[g] << ',' << format_double(success) << ',' << format_double(med) << '\n';
        for (auto& row : cell) trial_rows.push_back(std::move(row));
      }
      aggregates["curve"] = curve;
      report.csv = csv.str();
      break;
    }
    case ExperimentKind::kSweepTau: {
      for (auto& row : run_indexed(trials, threads, [&](size_t t) { return tau_trial(cfg, t); })) {
        trial_rows.push_back(std::move(row));
      }
      std::ostringstream csv;
      csv << "tau,mean_dim,min_dim,max_dim\n";
      json table = json::array();
      for (Eigen::Index tau = 1; tau <= cfg.tau_max; ++tau) {
        std::vector<double> dims;
        for (const auto& row : trial_rows) {
          dims.push_back(row.at("dims")[static_cast<size_t>(tau - 1)].get<double>());
        }
        double mean = 0.0;
        for (double v : dims) mean += v;
        mean /= static_cast<double>(dims.size());
        const double lo = *std::min_element(dims.begin(), dims.end());
        const double hi = max_of(dims);
        table.push_back({{"tau", tau}, {"mean_dim", mean}, {"min_dim", lo}, {"max_dim", hi}});
        csv << tau << ',' << format_double(mean) << ',' << format_double(lo) << ','
            << format_double(hi) << '\n';
      }
      aggregates["table"] = table;
      aggregates["monotone_rate"] = rate(trial_rows, "monotone");
      aggregates["saturates_at_r_rate"] = rate(trial_rows, "saturates_at_r");
      report.csv = csv.str();
      break;
    }
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.json = json{{"config", config_to_json(cfg)},
                     {"trials", trial_rows},
                     {"aggregates", aggregates},
                     {"version", HSID_VERSION},
                     {"rng", kRngName},
                     {"runtime", {{"wall_clock_seconds", seconds}, {"threads", threads}}}};
  return report;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigInvalid: return kExitConfig;
    case ErrorCode::kIoError:
    case ErrorCode::kBadMagic:
    case ErrorCode::kVersionUnsupported:
    case ErrorCode::kTruncatedFile: return kExitIo;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kGenerationFailed:
    case ErrorCode::kHorizonTooShort:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kDegenerateSample:
    case ErrorCode::kMissingGroundTruth: return kExitNumerical;
  }
  return kExitInternal;
}

}  // namespace hsid
