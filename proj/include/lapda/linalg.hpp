// Copyright 2026 The lapda Authors.
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

#ifndef LAPDA_LINALG_HPP_
#define LAPDA_LINALG_HPP_

#include <cstddef>
#include <vector>

#include "lapda/tensor.hpp"

namespace lapda {

/// LU factorization with partial pivoting (PA = LU), kept so the backward
/// pass of a solve can reuse the factors for transpose systems.
class LuFactors {
 public:
  // Factorizes a square matrix. Throws SingularSystem on pivot breakdown.
  explicit LuFactors(const Tensor& a);

  std::size_t n() const { return n_; }

  // Solves A * X = B for X (B is n x m).
  Tensor solve(const Tensor& b) const;

  // Solves A^T * X = B for X.
  Tensor solve_transposed(const Tensor& b) const;

  // 1-norm condition estimate via Hager's method, ||A||_1 * est(||A^-1||_1).
  double condition_estimate() const;

 private:
  void solve_vec(std::vector<double>& x) const;
  void solve_vec_transposed(std::vector<double>& x) const;

  std::size_t n_;
  std::vector<double> lu_;    // packed L (unit diag, below) and U (on/above)
  std::vector<int> pivots_;   // row swapped with k at step k
  double norm1_a_;            // 1-norm of the original matrix
};

// Convenience wrapper: factorizes, enforces the condition guard, solves.
// Throws SingularSystem when the estimate exceeds `condition_limit`.
Tensor lu_solve(const Tensor& a, const Tensor& b,
                double condition_limit = 1e12);

// C = A * B with plain accumulation (deterministic order).
Tensor matmul(const Tensor& a, const Tensor& b);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace lapda

#endif  // LAPDA_LINALG_HPP_
