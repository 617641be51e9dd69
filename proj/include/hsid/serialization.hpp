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

// Dataset and system persistence.
//
// Binary layout, all integers and floats little-endian:
//   "LSD1"                              4 bytes
//   version                             u32 (= 1)
//   d, l, r_meta, horizon, n, flags     u32 each; flags bit0 H, bit1 Z, bit2 noisy-one-step
//   seed                                u64
//   X[n][horizon + 1][d]                binary64, row-major
//   U[n][horizon][l]
//   H[n][horizon + 1][r_meta]           when bit0
//   Z[n][horizon + 1][d]                when bit1
//
// The CSV variant is a directory holding meta.csv (key,value) and one
// X.csv / U.csv / H.csv / Z.csv per array with the header
// trajectory,step,coordinate,value. Values use the shortest decimal that
// round-trips binary64.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "hsid/simulator.hpp"
#include "hsid/types.hpp"

namespace hsid {

inline constexpr std::uint32_t kBinaryFormatVersion = 1;

enum class DatasetFormat { kBinary, kCsv };

/// Throws Error(kInvalidArgument) for anything but "binary" or "csv".
DatasetFormat parse_dataset_format(std::string_view name);

std::string encode_binary(const TrajectoryDataset& dataset);
/// Throws Error(kBadMagic), Error(kVersionUnsupported) or Error(kTruncatedFile);
/// trailing bytes after the last array are Error(kIoError).
TrajectoryDataset decode_binary(std::string_view bytes);

/// Binary: `path` is a file. CSV: `path` is a directory, created if missing.
/// Throws Error(kIoError) on filesystem failures.
void export_dataset(const TrajectoryDataset& dataset, const std::filesystem::path& path,
                    DatasetFormat format);
TrajectoryDataset import_dataset(const std::filesystem::path& path, DatasetFormat format);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

nlohmann::json distractor_to_json(const DistractorSpec& spec);
/// Throws Error(kConfigInvalid) naming the offending field.
DistractorSpec distractor_from_json(const nlohmann::json& j);

/// Full system description (matrices as nested row arrays).
nlohmann::json system_to_json(const HiddenSubspaceSystem& system);
/// Re-validates through HiddenSubspaceSystem::create.
HiddenSubspaceSystem system_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& M);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

/// Whole-file helpers; throw Error(kIoError).
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace hsid
