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

#include "hsid/serialization.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <system_error>

#include "hsid/error.hpp"
#include "hsid/overloaded.hpp"

namespace hsid {
namespace {

constexpr std::array<char, 4> kMagic = {'L', 'S', 'D', '1'};
constexpr std::uint32_t kFlagLatents = 1u << 0;
constexpr std::uint32_t kFlagDistractors = 1u << 1;
constexpr std::uint32_t kFlagNoisy = 1u << 2;
constexpr std::size_t kHeaderBytes = 4 + 4 + 6 * 4 + 8;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out_.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out_.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t unsigned_le(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(unsigned_le(4)); }
  std::uint64_t u64() { return unsigned_le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view take(std::size_t n) {
    need(n);
    const std::string_view v = bytes_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw Error(ErrorCode::kTruncatedFile, "dataset file ends early");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t checked_u32(Eigen::Index v, const char* field) {
  if (v < 0 || static_cast<std::uint64_t>(v) > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, std::string("dataset field out of u32 range: ") + field);
  }
  return static_cast<std::uint32_t>(v);
}

// Writes arr[trajectory][step][coordinate] in row-major order.
void write_array(Writer& w, const std::vector<Eigen::MatrixXd>& steps, Eigen::Index n) {
  for (Eigen::Index j = 0; j < n; ++j) {
    for (const auto& M : steps) {
      for (Eigen::Index c = 0; c < M.rows(); ++c) w.f64(M(c, j));
    }
  }
}

std::vector<Eigen::MatrixXd> read_array(Reader& r, Eigen::Index steps, Eigen::Index dim,
                                        Eigen::Index n) {
  std::vector<Eigen::MatrixXd> out(static_cast<size_t>(steps), Eigen::MatrixXd(dim, n));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (auto& M : out) {
      for (Eigen::Index c = 0; c < dim; ++c) M(c, j) = r.f64();
    }
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, const std::string& context) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kIoError, "cannot parse number '" + std::string(text) + "' in " + context);
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    parts.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::string_view line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

constexpr std::string_view kArrayHeader = "trajectory,step,coordinate,value";

std::string array_csv(const std::vector<Eigen::MatrixXd>& steps, Eigen::Index n) {
  std::string out(kArrayHeader);
  out += '\n';
  for (Eigen::Index j = 0; j < n; ++j) {
    for (size_t t = 0; t < steps.size(); ++t) {
      for (Eigen::Index c = 0; c < steps[t].rows(); ++c) {
        out += std::to_string(j) + ',' + std::to_string(t) + ',' + std::to_string(c) + ',' +
               format_double(steps[t](c, j)) + '\n';
      }
    }
  }
  return out;
}

std::vector<Eigen::MatrixXd> array_from_csv(std::string_view text, Eigen::Index steps,
                                            Eigen::Index dim, Eigen::Index n,
                                            const std::string& name) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines.front() != kArrayHeader) {
    throw Error(ErrorCode::kIoError, name + ": missing header " + std::string(kArrayHeader));
  }
  if (static_cast<Eigen::Index>(lines.size()) - 1 != steps * dim * n) {
    throw Error(ErrorCode::kTruncatedFile, name + ": unexpected number of rows");
  }
  std::vector<Eigen::MatrixXd> out(static_cast<size_t>(steps), Eigen::MatrixXd::Zero(dim, n));
  for (size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != 4) throw Error(ErrorCode::kIoError, name + ": expected 4 columns");
    const auto j = parse_number<Eigen::Index>(cells[0], name);
    const auto t = parse_number<Eigen::Index>(cells[1], name);
    const auto c = parse_number<Eigen::Index>(cells[2], name);
    if (j < 0 || j >= n || t < 0 || t >= steps || c < 0 || c >= dim) {
      throw Error(ErrorCode::kIoError, name + ": index out of range");
    }
    out[static_cast<size_t>(t)](c, j) = parse_number<double>(cells[3], name);
  }
  return out;
}

const nlohmann::json& require(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::kConfigInvalid, where + "." + key + ": missing");
  }
  return j.at(key);
}

}  // namespace

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "binary") return DatasetFormat::kBinary;
  if (name == "csv") return DatasetFormat::kCsv;
  throw Error(ErrorCode::kInvalidArgument, "unknown dataset format: " + std::string(name));
}

std::string encode_binary(const TrajectoryDataset& dataset) {
  dataset.validate();
  Writer w;
  w.raw(kMagic.data(), kMagic.size());
  w.u32(kBinaryFormatVersion);
  w.u32(checked_u32(dataset.d, "d"));
  w.u32(checked_u32(dataset.l, "l"));
  w.u32(checked_u32(dataset.r_meta, "r_meta"));
  w.u32(checked_u32(dataset.horizon, "horizon"));
  w.u32(checked_u32(dataset.n, "n"));
  std::uint32_t flags = 0;
  if (dataset.has_latents()) flags |= kFlagLatents;
  if (dataset.has_distractors()) flags |= kFlagDistractors;
  if (dataset.noisy_one_step) flags |= kFlagNoisy;
  w.u32(flags);
  w.u64(dataset.seed);
  write_array(w, dataset.X, dataset.n);
  write_array(w, dataset.U, dataset.n);
  if (dataset.has_latents()) write_array(w, dataset.H, dataset.n);
  if (dataset.has_distractors()) write_array(w, dataset.Z, dataset.n);
  return w.take();
}

TrajectoryDataset decode_binary(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < kMagic.size()) throw Error(ErrorCode::kTruncatedFile, "dataset file ends early");
  const std::string_view magic = r.take(kMagic.size());
  if (magic != std::string_view(kMagic.data(), kMagic.size())) {
    throw Error(ErrorCode::kBadMagic, "not an LSD1 dataset");
  }
  const std::uint32_t version = r.u32();
  if (version != kBinaryFormatVersion) {
    throw Error(ErrorCode::kVersionUnsupported, "dataset format version " + std::to_string(version));
  }
  TrajectoryDataset ds;
  ds.d = r.u32();
  ds.l = r.u32();
  ds.r_meta = r.u32();
  ds.horizon = r.u32();
  ds.n = r.u32();
  const std::uint32_t flags = r.u32();
  ds.seed = r.u64();
  ds.noisy_one_step = (flags & kFlagNoisy) != 0;

  // Check the payload size before allocating anything.
  const auto steps = static_cast<std::uint64_t>(ds.horizon) + 1;
  std::uint64_t values = steps * ds.d + (steps - 1) * ds.l;
  if (flags & kFlagLatents) values += steps * ds.r_meta;
  if (flags & kFlagDistractors) values += steps * ds.d;
  values *= static_cast<std::uint64_t>(ds.n);
  if (r.remaining() / 8 < values) throw Error(ErrorCode::kTruncatedFile, "dataset file ends early");
  if (r.remaining() != values * 8) throw Error(ErrorCode::kIoError, "trailing bytes after dataset");

  ds.X = read_array(r, ds.horizon + 1, ds.d, ds.n);
  ds.U = read_array(r, ds.horizon, ds.l, ds.n);
  if (flags & kFlagLatents) ds.H = read_array(r, ds.horizon + 1, ds.r_meta, ds.n);
  if (flags & kFlagDistractors) ds.Z = read_array(r, ds.horizon + 1, ds.d, ds.n);
  static_assert(kHeaderBytes == 40);
  return ds;
}

std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw Error(ErrorCode::kIoError, "cannot format double");
  return std::string(buf.data(), ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
}

void export_dataset(const TrajectoryDataset& dataset, const std::filesystem::path& path,
                    DatasetFormat format) {
  if (format == DatasetFormat::kBinary) {
    write_file(path, encode_binary(dataset));
    return;
  }
  dataset.validate();
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + path.string() + ": " + ec.message());
  std::ostringstream meta;
  meta << "key,value\n"
       << "format_version," << kBinaryFormatVersion << '\n'
       << "d," << dataset.d << '\n'
       << "l," << dataset.l << '\n'
       << "r_meta," << dataset.r_meta << '\n'
       << "horizon," << dataset.horizon << '\n'
       << "n," << dataset.n << '\n'
       << "seed," << dataset.seed << '\n'
       << "has_latents," << (dataset.has_latents() ? 1 : 0) << '\n'
       << "has_distractors," << (dataset.has_distractors() ? 1 : 0) << '\n'
       << "noisy_one_step," << (dataset.noisy_one_step ? 1 : 0) << '\n';
  write_file(path / "meta.csv", meta.str());
  write_file(path / "X.csv", array_csv(dataset.X, dataset.n));
  write_file(path / "U.csv", array_csv(dataset.U, dataset.n));
  if (dataset.has_latents()) write_file(path / "H.csv", array_csv(dataset.H, dataset.n));
  if (dataset.has_distractors()) write_file(path / "Z.csv", array_csv(dataset.Z, dataset.n));
}

TrajectoryDataset import_dataset(const std::filesystem::path& path, DatasetFormat format) {
  if (format == DatasetFormat::kBinary) return decode_binary(read_file(path));

  const std::string meta_text = read_file(path / "meta.csv");
  std::map<std::string, std::string, std::less<>> meta;
  const auto lines = lines_of(meta_text);
  for (size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != 2) throw Error(ErrorCode::kIoError, "meta.csv: expected key,value");
    meta.emplace(std::string(cells[0]), std::string(cells[1]));
  }
  auto field = [&](const char* key) -> std::uint64_t {
    const auto it = meta.find(key);
    if (it == meta.end()) throw Error(ErrorCode::kIoError, std::string("meta.csv: missing ") + key);
    return parse_number<std::uint64_t>(it->second, "meta.csv");
  };
  const auto version = field("format_version");
  if (version != kBinaryFormatVersion) {
    throw Error(ErrorCode::kVersionUnsupported, "dataset format version " + std::to_string(version));
  }
  TrajectoryDataset ds;
  ds.d = static_cast<Eigen::Index>(field("d"));
  ds.l = static_cast<Eigen::Index>(field("l"));
  ds.r_meta = static_cast<Eigen::Index>(field("r_meta"));
  ds.horizon = static_cast<Eigen::Index>(field("horizon"));
  ds.n = static_cast<Eigen::Index>(field("n"));
  ds.seed = field("seed");
  ds.noisy_one_step = field("noisy_one_step") != 0;
  ds.X = array_from_csv(read_file(path / "X.csv"), ds.horizon + 1, ds.d, ds.n, "X.csv");
  ds.U = array_from_csv(read_file(path / "U.csv"), ds.horizon, ds.l, ds.n, "U.csv");
  if (field("has_latents") != 0) {
    ds.H = array_from_csv(read_file(path / "H.csv"), ds.horizon + 1, ds.r_meta, ds.n, "H.csv");
  }
  if (field("has_distractors") != 0) {
    ds.Z = array_from_csv(read_file(path / "Z.csv"), ds.horizon + 1, ds.d, ds.n, "Z.csv");
  }
  ds.validate();
  return ds;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kConfigInvalid, "matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::kConfigInvalid, "matrix rows must have equal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<size_t>(c)];
      if (!v.is_number()) throw Error(ErrorCode::kConfigInvalid, "matrix entries must be numbers");
      M(i, c) = v.get<double>();
    }
  }
  return M;
}

nlohmann::json distractor_to_json(const DistractorSpec& spec) {
  return std::visit(
      Overloaded{
          [](const ZeroDistractor&) { return nlohmann::json{{"kind", "zero"}}; },
          [](const GaussianDistractor& g) {
            return nlohmann::json{{"kind", "gaussian"}, {"scale", g.scale}};
          },
          [](const PolynomialDistractor& p) {
            return nlohmann::json{{"kind", "polynomial"},
                                  {"degree", p.degree},
                                  {"coefficient_seed", p.coefficient_seed},
                                  {"orthogonalize_linear", p.orthogonalize_linear}};
          },
          [](const TabulatedDistractor& t) {
            return nlohmann::json{{"kind", "tabulated"},
                                  {"terms", t.terms},
                                  {"coefficients", matrix_to_json(t.coefficients)}};
          },
      },
      spec);
}

DistractorSpec distractor_from_json(const nlohmann::json& j) {
  const std::string where = "distractor";
  const auto& kind_json = require(j, "kind", where);
  if (!kind_json.is_string()) throw Error(ErrorCode::kConfigInvalid, where + ".kind: not a string");
  const std::string kind = kind_json.get<std::string>();
  auto check_keys = [&](std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : j.items()) {
      bool ok = key == "kind";
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) throw Error(ErrorCode::kConfigInvalid, where + "." + key + ": unknown field");
    }
  };
  try {
    if (kind == "zero") {
      check_keys({});
      return ZeroDistractor{};
    }
    if (kind == "gaussian") {
      check_keys({"scale"});
      GaussianDistractor g;
      if (j.contains("scale")) g.scale = j.at("scale").get<double>();
      if (!(g.scale >= 0.0)) throw Error(ErrorCode::kConfigInvalid, where + ".scale: must be >= 0");
      return g;
    }
    if (kind == "polynomial") {
      check_keys({"degree", "coefficient_seed", "orthogonalize_linear"});
      PolynomialDistractor p;
      if (j.contains("degree")) p.degree = j.at("degree").get<int>();
      if (j.contains("coefficient_seed")) p.coefficient_seed = j.at("coefficient_seed").get<std::uint64_t>();
      if (j.contains("orthogonalize_linear")) p.orthogonalize_linear = j.at("orthogonalize_linear").get<bool>();
      if (p.degree < 2) throw Error(ErrorCode::kConfigInvalid, where + ".degree: must be >= 2");
      return p;
    }
    if (kind == "tabulated") {
      check_keys({"terms", "coefficients"});
      TabulatedDistractor t;
      t.terms = require(j, "terms", where).get<std::vector<Exponents>>();
      t.coefficients = matrix_from_json(require(j, "coefficients", where));
      return t;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, where + ": " + e.what());
  }
  throw Error(ErrorCode::kConfigInvalid, where + ".kind: unknown kind '" + kind + "'");
}

nlohmann::json system_to_json(const HiddenSubspaceSystem& system) {
  return nlohmann::json{{"d", system.d()},
                        {"r", system.r()},
                        {"l", system.l()},
                        {"A_bar", matrix_to_json(system.A_bar())},
                        {"B_bar", matrix_to_json(system.B_bar())},
                        {"V", matrix_to_json(system.V())},
                        {"distractor", distractor_to_json(system.distractor())}};
}

HiddenSubspaceSystem system_from_json(const nlohmann::json& j) {
  const std::string where = "system";
  try {
    return HiddenSubspaceSystem::create(matrix_from_json(require(j, "A_bar", where)),
                                        matrix_from_json(require(j, "B_bar", where)),
                                        matrix_from_json(require(j, "V", where)),
                                        distractor_from_json(require(j, "distractor", where)));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument) throw Error(ErrorCode::kConfigInvalid, e.what());
    throw;
  }
}

}  // namespace hsid
