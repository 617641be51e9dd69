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

#include <vector>

#include <Eigen/Dense>

namespace hsid {

/// Exponent vector of one monomial; entry j is the power of variable j.
using Exponents = std::vector<int>;

/// All monomials in `num_vars` variables with total degree in
/// [min_degree, max_degree], ordered by degree and then lexicographically
/// (so degree-1 terms come out in coordinate order).
std::vector<Exponents> monomial_exponents(int num_vars, int min_degree, int max_degree);

/// Evaluates each monomial on every column of `samples` (num_vars x n),
/// returning a (terms x n) matrix.
Eigen::MatrixXd evaluate_monomials(const std::vector<Exponents>& terms,
                                   const Eigen::MatrixXd& samples);

}  // namespace hsid
