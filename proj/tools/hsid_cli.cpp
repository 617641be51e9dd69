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

// Command-line front end: run experiments, simulate datasets, inspect and
// convert dataset files.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsid/error.hpp"
#include "hsid/experiment.hpp"
#include "hsid/serialization.hpp"
#include "hsid/simulator.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kExitCodeHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  invalid configuration or command line\n"
    "  3  I/O or dataset format error\n"
    "  4  numerical failure (generation, rank, shape)\n";

hsid::ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  json j;
  try {
    j = json::parse(hsid::read_file(path));
  } catch (const json::parse_error& e) {
    throw hsid::Error(hsid::ErrorCode::kConfigInvalid, path + ": " + e.what());
  }
  hsid::ExperimentConfig cfg = hsid::parse_config(j);
  if (seed) cfg.seed = *seed;
  return cfg;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw hsid::Error(hsid::ErrorCode::kIoError, "cannot create " + dir.string());
}

int run(const std::string& config_path, const std::string& out_dir,
        std::optional<std::uint64_t> seed, unsigned threads) {
  const hsid::ExperimentConfig cfg = load_config(config_path, seed);
  const hsid::ExperimentReport report = hsid::run_experiment(cfg, threads);
  ensure_directory(out_dir);
  const fs::path report_path = fs::path(out_dir) / cfg.report_name;
  hsid::write_file(report_path, report.json.dump(2) + "\n");
  if (!report.csv.empty()) hsid::write_file(fs::path(out_dir) / cfg.csv_name, report.csv);
  std::cout << report_path.string() << "\n";
  return hsid::kExitOk;
}

// Generates the system and dataset of trial 0 of the config.
int simulate(const std::string& config_path, const std::string& out, const std::string& format,
             const std::string& system_out, std::optional<std::uint64_t> seed) {
  const hsid::ExperimentConfig cfg = load_config(config_path, seed);
  const hsid::DatasetFormat fmt = hsid::parse_dataset_format(format);
  if (cfg.n < 1) throw hsid::Error(hsid::ErrorCode::kConfigInvalid, "data.n: must be >= 1");
  const hsid::HiddenSubspaceSystem system = hsid::random_system(hsid::trial_generation(cfg, 0));
  const Eigen::Index horizon = std::max<Eigen::Index>(cfg.horizon, cfg.effective_steps());
  const hsid::TrajectoryDataset data =
      hsid::sample_batch(system, cfg.n, horizon, hsid::trial_data_seed(cfg, 0));
  hsid::export_dataset(data, out, fmt);
  if (!system_out.empty()) {
    hsid::write_file(system_out, hsid::system_to_json(system).dump(2) + "\n");
  }
  return hsid::kExitOk;
}

int inspect(const std::string& path, const std::string& format) {
  const hsid::TrajectoryDataset ds = hsid::import_dataset(path, hsid::parse_dataset_format(format));
  json info{{"d", ds.d},
            {"l", ds.l},
            {"r_meta", ds.r_meta},
            {"horizon", ds.horizon},
            {"n", ds.n},
            {"seed", ds.seed},
            {"has_latents", ds.has_latents()},
            {"has_distractors", ds.has_distractors()},
            {"noisy_one_step", ds.noisy_one_step}};
  double x_sq = 0.0;
  for (const auto& X : ds.X) x_sq += X.squaredNorm();
  info["x_rms"] = std::sqrt(x_sq / static_cast<double>((ds.horizon + 1) * ds.n));
  std::cout << info.dump(2) << "\n";
  return hsid::kExitOk;
}

int convert(const std::string& in, const std::string& from, const std::string& out,
            const std::string& to) {
  const hsid::TrajectoryDataset ds = hsid::import_dataset(in, hsid::parse_dataset_format(from));
  hsid::export_dataset(ds, out, hsid::parse_dataset_format(to));
  return hsid::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hidden-subspace identification experiments", "hsid"};
  app.footer(kExitCodeHelp);
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string format = "binary";
  std::string system_out;
  std::string input;
  std::string from = "binary";
  std::string to = "csv";

  CLI::App* run_cmd = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run_cmd->add_option("--out", out, "Output directory for the report and CSV tables")->required();
  run_cmd->add_option("--seed", seed, "Master seed, overrides the config");
  run_cmd->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Generate the dataset of trial 0 of a config");
  sim_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  sim_cmd->add_option("--out", out, "Dataset file (binary) or directory (csv)")->required();
  sim_cmd->add_option("--format", format, "binary or csv")->check(CLI::IsMember({"binary", "csv"}));
  sim_cmd->add_option("--system-out", system_out, "Also write the generating system as JSON");
  sim_cmd->add_option("--seed", seed, "Master seed, overrides the config");

  CLI::App* inspect_cmd = app.add_subcommand("inspect", "Print the header of a dataset");
  inspect_cmd->add_option("path", input, "Dataset path")->required();
  inspect_cmd->add_option("--format", format, "binary or csv")
      ->check(CLI::IsMember({"binary", "csv"}));

  CLI::App* convert_cmd = app.add_subcommand("convert", "Convert a dataset between formats");
  convert_cmd->add_option("input", input, "Source dataset")->required();
  convert_cmd->add_option("output", out, "Destination")->required();
  convert_cmd->add_option("--from", from, "binary or csv")->check(CLI::IsMember({"binary", "csv"}));
  convert_cmd->add_option("--to", to, "binary or csv")->check(CLI::IsMember({"binary", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? hsid::kExitOk : hsid::kExitConfig;
  }

  try {
    if (*run_cmd) return run(config_path, out, seed, threads);
    if (*sim_cmd) return simulate(config_path, out, format, system_out, seed);
    if (*inspect_cmd) return inspect(input, format);
    if (*convert_cmd) return convert(input, from, out, to);
  } catch (const hsid::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return hsid::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return hsid::kExitInternal;
  }
  return hsid::kExitInternal;
}
