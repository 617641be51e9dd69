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
#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace hsid {

/// Name recorded in reports and dataset metadata.
inline constexpr const char* kRngName = "mt19937_64/seed_seq/normal_distribution";

/// Stream tags. Each independent random quantity draws from its own stream
/// keyed by (seed, tag, indices...), so generation order never matters.
enum class Stream : std::uint32_t {
  kSystem = 1,
  kTrajectory = 2,
  kDistractorCoefficients = 3,
  kDistractorCalibration = 4,
  kNoisyOneStep = 5,
  kTrial = 6,
  kFeatureMap = 7,
  kOptimizerInit = 8,
};

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, Stream stream,
                          std::initializer_list<std::uint64_t> indices = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(3 + 2 * indices.size());
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  words.push_back(static_cast<std::uint32_t>(stream));
  for (std::uint64_t idx : indices) {
    words.push_back(static_cast<std::uint32_t>(idx));
    words.push_back(static_cast<std::uint32_t>(idx >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

/// A 64-bit child seed derived from a parent seed, e.g. one per trial.
inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                                 std::initializer_list<std::uint64_t> indices = {}) {
  Engine engine = make_engine(seed, stream, indices);
  return engine();
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gaussian_matrix(Eigen::Index rows,
                                                                      Eigen::Index cols,
                                                                      Engine& engine,
                                                                      Scalar scale = Scalar(1)) {
  std::normal_distribution<Scalar> normal(Scalar(0), scale);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(engine);
  }
  return out;
}

}  // namespace hsid
