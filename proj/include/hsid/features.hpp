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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hsid/polynomial.hpp"

namespace hsid {

/// Fixed dictionaries psi: R^d -> R^m.
enum class DictionaryKind { kIdentity, kMonomials, kRandomFourier };

/// State feature map. Either one of the fixed dictionaries, or a learned
/// linear combination phi(x) = W psi(x) over one of them (W is k x m).
/// Immutable; evaluation is deterministic.
class FeatureMap {
 public:
  /// Empty map; assign one built by the factories below before use.
  FeatureMap() = default;

  static FeatureMap identity(Eigen::Index input_dim);
  /// All monomials of total degree 1..max_degree in the selected coordinates
  /// (all coordinates when empty), degree-1 terms first.
  static FeatureMap monomials(Eigen::Index input_dim, int max_degree,
                              std::vector<int> coordinates = {});
  /// sqrt(2/m) cos(Omega x + b) with Omega ~ N(0, 1/bandwidth^2), b ~ U[0, 2 pi).
  static FeatureMap random_fourier(Eigen::Index input_dim, Eigen::Index count, double bandwidth,
                                   std::uint64_t seed);
  static FeatureMap learned(FeatureMap dictionary, Eigen::MatrixXd W);

  Eigen::Index input_dim() const { return input_dim_; }
  Eigen::Index output_dim() const;
  /// Dictionary width m (equals output_dim unless learned).
  Eigen::Index dictionary_dim() const;

  bool is_learned() const { return learned_; }
  DictionaryKind dictionary_kind() const { return kind_; }
  const Eigen::MatrixXd& W() const { return W_; }
  int max_degree() const { return max_degree_; }
  const std::vector<int>& coordinates() const { return coordinates_; }
  Eigen::Index fourier_count() const { return omega_.rows(); }
  double bandwidth() const { return bandwidth_; }
  std::uint64_t seed() const { return seed_; }

  /// psi(X) column-wise (m x n).
  Eigen::MatrixXd dictionary(const Eigen::MatrixXd& X) const;
  /// phi(X) column-wise (k x n).
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& X) const;

  /// Same dictionary with a different combination matrix.
  FeatureMap with_weights(Eigen::MatrixXd W) const;

  std::string describe() const;

 private:
  Eigen::Index input_dim_ = 0;
  DictionaryKind kind_ = DictionaryKind::kIdentity;
  int max_degree_ = 0;
  std::vector<int> coordinates_;
  std::vector<Exponents> terms_;
  Eigen::MatrixXd omega_;
  Eigen::VectorXd phase_;
  double bandwidth_ = 1.0;
  std::uint64_t seed_ = 0;
  bool learned_ = false;
  Eigen::MatrixXd W_;
};

}  // namespace hsid
