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

#ifndef LAPDA_ERRORS_HPP_
#define LAPDA_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lapda {

// Shape or rank mismatch in a tensor operation.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// The linear system in a solve is singular or too ill-conditioned to trust.
// `index` is the pivot column where elimination broke down, or -1 when the
// factorization succeeded but the condition estimate exceeded the guard.
class SingularSystem : public std::runtime_error {
 public:
  SingularSystem(const std::string& what, long index)
      : std::runtime_error(what), index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

// Malformed input file (IDX container, checkpoint, ...).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Bad run configuration (unknown key, unparsable value, missing file).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A forward value or loss became non-finite during training.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lapda

#endif  // LAPDA_ERRORS_HPP_
