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

#ifndef LAPDA_TENSOR_HPP_
#define LAPDA_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "lapda/errors.hpp"

namespace lapda {

/// Dense row-major matrix of doubles. Every differentiable quantity in the
/// library lives in one of these; scalars are 1x1, vectors are 1xN or Nx1.
class Tensor {
 public:
  Tensor() : rows_(0), cols_(0) {}

  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("tensor: data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str());
    }
  }

  Tensor(std::size_t rows, std::size_t cols, std::initializer_list<double> v)
      : Tensor(rows, cols, std::vector<double>(v)) {}

  static Tensor scalar(double v) { return Tensor(1, 1, {v}); }

  static Tensor identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::vector<std::size_t> shape() const { return {rows_, cols_}; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  double item() const {
    if (size() != 1) {
      throw ShapeError("tensor: item() on non-scalar " + shape_str());
    }
    return data_[0];
  }

  bool same_shape(const Tensor& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

/// A named leaf of the computation graph. The gradient always has the shape
/// of the value and is zeroed at the start of each training step.
struct Parameter {
  std::string id;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string id_, Tensor value_)
      : id(std::move(id_)),
        value(std::move(value_)),
        grad(value.rows(), value.cols()) {}

  void zero_grad() { grad = Tensor(value.rows(), value.cols()); }
};

}  // namespace lapda

#endif  // LAPDA_TENSOR_HPP_
