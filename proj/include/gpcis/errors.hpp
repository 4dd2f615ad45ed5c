// Copyright 2026 The GPCIS Authors.
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gpcis {

// Caller passed something outside an operation's domain.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A factorization or evaluation produced an unusable number.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, std::ptrdiff_t pivot = -1)
      : std::runtime_error(what), pivot_(pivot) {}

  // Index of the failing Cholesky pivot, or -1 when not applicable.
  std::ptrdiff_t pivot() const { return pivot_; }

 private:
  std::ptrdiff_t pivot_;
};

// Corrupt, truncated or version-mismatched file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gpcis
