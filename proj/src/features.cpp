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

#include "hsid/features.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "hsid/error.hpp"
#include "hsid/rng.hpp"

namespace hsid {

FeatureMap FeatureMap::identity(Eigen::Index input_dim) {
  if (input_dim < 1) throw Error(ErrorCode::kInvalidArgument, "feature map input_dim must be >= 1");
  FeatureMap f;
  f.input_dim_ = input_dim;
  f.kind_ = DictionaryKind::kIdentity;
  return f;
}

FeatureMap FeatureMap::monomials(Eigen::Index input_dim, int max_degree,
                                 std::vector<int> coordinates) {
  if (input_dim < 1 || max_degree < 1) {
    throw Error(ErrorCode::kInvalidArgument, "monomial features need input_dim, degree >= 1");
  }
  if (coordinates.empty()) {
    for (Eigen::Index j = 0; j < input_dim; ++j) coordinates.push_back(static_cast<int>(j));
  }
  for (int c : coordinates) {
    if (c < 0 || c >= input_dim) {
      throw Error(ErrorCode::kInvalidArgument, "monomial coordinate out of range");
    }
  }
  FeatureMap f;
  f.input_dim_ = input_dim;
  f.kind_ = DictionaryKind::kMonomials;
  f.max_degree_ = max_degree;
  f.coordinates_ = std::move(coordinates);
  f.terms_ = monomial_exponents(static_cast<int>(f.coordinates_.size()), 1, max_degree);
  return f;
}

FeatureMap FeatureMap::random_fourier(Eigen::Index input_dim, Eigen::Index count,
                                      double bandwidth, std::uint64_t seed) {
  if (input_dim < 1 || count < 1 || !(bandwidth > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "random Fourier features need count >= 1, bandwidth > 0");
  }
  FeatureMap f;
  f.input_dim_ = input_dim;
  f.kind_ = DictionaryKind::kRandomFourier;
  f.bandwidth_ = bandwidth;
  f.seed_ = seed;
  Engine engine = make_engine(seed, Stream::kFeatureMap, {static_cast<std::uint64_t>(input_dim)});
  f.omega_ = gaussian_matrix(count, input_dim, engine, 1.0 / bandwidth);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  f.phase_.resize(count);
  for (Eigen::Index i = 0; i < count; ++i) f.phase_(i) = phase(engine);
  return f;
}

FeatureMap FeatureMap::learned(FeatureMap dictionary, Eigen::MatrixXd W) {
  if (dictionary.learned_) {
    throw Error(ErrorCode::kInvalidArgument, "learned combinations cannot be nested");
  }
  if (W.cols() != dictionary.dictionary_dim() || W.rows() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "combination matrix must be k x m");
  }
  dictionary.learned_ = true;
  dictionary.W_ = std::move(W);
  return dictionary;
}

Eigen::Index FeatureMap::dictionary_dim() const {
  switch (kind_) {
    case DictionaryKind::kIdentity: return input_dim_;
    case DictionaryKind::kMonomials: return static_cast<Eigen::Index>(terms_.size());
    case DictionaryKind::kRandomFourier: return omega_.rows();
  }
  return 0;
}

Eigen::Index FeatureMap::output_dim() const {
  return learned_ ? W_.rows() : dictionary_dim();
}

Eigen::MatrixXd FeatureMap::dictionary(const Eigen::MatrixXd& X) const {
  if (X.rows() != input_dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "feature map input dimension");
  }
  switch (kind_) {
    case DictionaryKind::kIdentity:
      return X;
    case DictionaryKind::kMonomials: {
      Eigen::MatrixXd selected(static_cast<Eigen::Index>(coordinates_.size()), X.cols());
      for (size_t j = 0; j < coordinates_.size(); ++j) {
        selected.row(static_cast<Eigen::Index>(j)) = X.row(coordinates_[j]);
      }
      return evaluate_monomials(terms_, selected);
    }
    case DictionaryKind::kRandomFourier: {
      Eigen::MatrixXd arg = omega_ * X;
      arg.colwise() += phase_;
      const double scale = std::sqrt(2.0 / static_cast<double>(omega_.rows()));
      return scale * arg.array().cos().matrix();
    }
  }
  return {};
}

Eigen::MatrixXd FeatureMap::evaluate(const Eigen::MatrixXd& X) const {
  if (learned_) return W_ * dictionary(X);
  return dictionary(X);
}

FeatureMap FeatureMap::with_weights(Eigen::MatrixXd W) const {
  FeatureMap base = *this;
  base.learned_ = false;
  base.W_.resize(0, 0);
  return learned(std::move(base), std::move(W));
}

std::string FeatureMap::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case DictionaryKind::kIdentity: os << "identity(" << input_dim_ << ")"; break;
    case DictionaryKind::kMonomials:
      os << "monomials(degree=" << max_degree_ << ", vars=" << coordinates_.size() << ")";
      break;
    case DictionaryKind::kRandomFourier:
      os << "random_fourier(count=" << omega_.rows() << ", bandwidth=" << bandwidth_ << ")";
      break;
  }
  if (learned_) os << " combined to " << W_.rows();
  return os.str();
}

}  // namespace hsid
