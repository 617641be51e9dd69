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

#include "hsid/polynomial.hpp"

#include <algorithm>
#include <functional>

#include "hsid/error.hpp"

namespace hsid {

std::vector<Exponents> monomial_exponents(int num_vars, int min_degree, int max_degree) {
  if (num_vars < 0 || min_degree < 0 || max_degree < min_degree) {
    throw Error(ErrorCode::kInvalidArgument, "monomial_exponents: bad degree range");
  }
  std::vector<Exponents> out;
  Exponents current(static_cast<size_t>(num_vars), 0);
  for (int degree = min_degree; degree <= max_degree; ++degree) {
    // Lexicographic (descending powers of the first variable) enumeration of
    // compositions of `degree` into num_vars parts.
    std::function<void(int, int)> fill = [&](int var, int remaining) {
      if (var == num_vars - 1) {
        current[var] = remaining;
        out.push_back(current);
        return;
      }
      for (int p = remaining; p >= 0; --p) {
        current[var] = p;
        fill(var + 1, remaining - p);
      }
    };
    if (num_vars == 0) {
      if (degree == 0) out.push_back({});
      continue;
    }
    fill(0, degree);
  }
  return out;
}

Eigen::MatrixXd evaluate_monomials(const std::vector<Exponents>& terms,
                                   const Eigen::MatrixXd& samples) {
  const Eigen::Index n = samples.cols();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(terms.size()), n);
  for (size_t t = 0; t < terms.size(); ++t) {
    const Exponents& e = terms[t];
    if (static_cast<Eigen::Index>(e.size()) != samples.rows()) {
      throw Error(ErrorCode::kDimensionMismatch, "evaluate_monomials: exponent arity");
    }
    Eigen::RowVectorXd value = Eigen::RowVectorXd::Ones(n);
    for (size_t j = 0; j < e.size(); ++j) {
      for (int p = 0; p < e[j]; ++p) value.array() *= samples.row(static_cast<Eigen::Index>(j)).array();
    }
    out.row(static_cast<Eigen::Index>(t)) = value;
  }
  return out;
}

}  // namespace hsid
