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

#include "lapda/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "lapda/errors.hpp"

namespace lapda {

LuFactors::LuFactors(const Tensor& a) : n_(a.rows()) {
  if (a.rows() != a.cols()) {
    throw ShapeError("lu: matrix must be square, got " + a.shape_str());
  }
  lu_ = a.values();
  pivots_.resize(n_);

  norm1_a_ = 0.0;
  for (std::size_t j = 0; j < n_; ++j) {
    double colsum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) colsum += std::abs(a.at(i, j));
    norm1_a_ = std::max(norm1_a_, colsum);
  }

  for (std::size_t k = 0; k < n_; ++k) {
    std::size_t p = k;
    double best = std::abs(lu_[k * n_ + k]);
    for (std::size_t i = k + 1; i < n_; ++i) {
      double v = std::abs(lu_[i * n_ + k]);
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (!(best > 0.0) || !std::isfinite(best)) {
      throw SingularSystem(
          "linear-solve: zero pivot at column " + std::to_string(k) +
              " (matrix is singular)",
          static_cast<long>(k));
    }
    pivots_[k] = static_cast<int>(p);
    if (p != k) {
      for (std::size_t j = 0; j < n_; ++j) {
        std::swap(lu_[k * n_ + j], lu_[p * n_ + j]);
      }
    }
    const double pivot = lu_[k * n_ + k];
    for (std::size_t i = k + 1; i < n_; ++i) {
      double m = lu_[i * n_ + k] / pivot;
      lu_[i * n_ + k] = m;
      if (m != 0.0) {
        for (std::size_t j = k + 1; j < n_; ++j) {
          lu_[i * n_ + j] -= m * lu_[k * n_ + j];
        }
      }
    }
  }
}

void LuFactors::solve_vec(std::vector<double>& x) const {
  // Apply the pivot swaps, then unit-lower forward and upper back substitution.
  for (std::size_t k = 0; k < n_; ++k) {
    int p = pivots_[k];
    if (static_cast<std::size_t>(p) != k) std::swap(x[k], x[p]);
  }
  for (std::size_t i = 1; i < n_; ++i) {
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu_[i * n_ + j] * x[j];
    x[i] = s;
  }
  for (std::size_t ii = n_; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n_; ++j) s -= lu_[ii * n_ + j] * x[j];
    x[ii] = s / lu_[ii * n_ + ii];
  }
}

void LuFactors::solve_vec_transposed(std::vector<double>& x) const {
  // A^T = U^T L^T P, so solve U^T z = b, L^T w = z, then undo the swaps.
  for (std::size_t i = 0; i < n_; ++i) {
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu_[j * n_ + i] * x[j];
    x[i] = s / lu_[i * n_ + i];
  }
  for (std::size_t ii = n_; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n_; ++j) s -= lu_[j * n_ + ii] * x[j];
    x[ii] = s;
  }
  for (std::size_t kk = n_; kk-- > 0;) {
    int p = pivots_[kk];
    if (static_cast<std::size_t>(p) != kk) std::swap(x[kk], x[p]);
  }
}

Tensor LuFactors::solve(const Tensor& b) const {
  if (b.rows() != n_) {
    throw ShapeError("lu-solve: rhs rows " + std::to_string(b.rows()) +
                     " != system size " + std::to_string(n_));
  }
  Tensor x(n_, b.cols());
  std::vector<double> col(n_);
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n_; ++i) col[i] = b.at(i, c);
    solve_vec(col);
    for (std::size_t i = 0; i < n_; ++i) x.at(i, c) = col[i];
  }
  return x;
}

Tensor LuFactors::solve_transposed(const Tensor& b) const {
  if (b.rows() != n_) {
    throw ShapeError("lu-solve^T: rhs rows " + std::to_string(b.rows()) +
                     " != system size " + std::to_string(n_));
  }
  Tensor x(n_, b.cols());
  std::vector<double> col(n_);
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n_; ++i) col[i] = b.at(i, c);
    solve_vec_transposed(col);
    for (std::size_t i = 0; i < n_; ++i) x.at(i, c) = col[i];
  }
  return x;
}

double LuFactors::condition_estimate() const {
  // Hager's estimator for ||A^-1||_1 using a few solves with A and A^T.
  if (n_ == 0) return 0.0;
  std::vector<double> x(n_, 1.0 / static_cast<double>(n_));
  double est = 0.0;
  std::size_t last_j = n_;  // sentinel
  for (int iter = 0; iter < 5; ++iter) {
    std::vector<double> y = x;
    solve_vec(y);
    est = 0.0;
    for (double v : y) est += std::abs(v);

    std::vector<double> xi(n_);
    for (std::size_t i = 0; i < n_; ++i) xi[i] = (y[i] >= 0.0) ? 1.0 : -1.0;
    solve_vec_transposed(xi);

    std::size_t j = 0;
    double zmax = -1.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double v = std::abs(xi[i]);
      if (v > zmax) {
        zmax = v;
        j = i;
      }
    }
    double ztx = 0.0;
    for (std::size_t i = 0; i < n_; ++i) ztx += xi[i] * x[i];
    if (zmax <= ztx || j == last_j) break;
    std::fill(x.begin(), x.end(), 0.0);
    x[j] = 1.0;
    last_j = j;
  }
  return norm1_a_ * est;
}

Tensor lu_solve(const Tensor& a, const Tensor& b, double condition_limit) {
  LuFactors lu(a);
  double cond = lu.condition_estimate();
  if (!(cond < condition_limit)) {
    throw SingularSystem(
        "linear-solve: condition estimate " + std::to_string(cond) +
            " exceeds limit " + std::to_string(condition_limit),
        -1);
  }
  return lu.solve(b);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dims " + std::to_string(a.cols()) +
                     " != " + std::to_string(b.rows()) + " (lhs " +
                     a.shape_str() + ", rhs " + b.shape_str() + ")");
  }
  Tensor c(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data() + i * k;
    double* crow = c.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_diff: shapes " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

}  // namespace lapda
