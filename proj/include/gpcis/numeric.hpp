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

#include <cmath>

namespace gpcis {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// log(sigmoid(x)) without cancellation.
inline double log_sigmoid(double x) { return -softplus(-x); }

}  // namespace gpcis

namespace gpcis {

// sigmoid kept strictly inside (0, 1) so downstream logs and thresholds never
// see an exact 0 or 1.
inline double open_sigmoid(double x) {
  constexpr double kLow = 1e-300;
  constexpr double kHigh = 1.0 - 0x1.0p-53;
  const double s = sigmoid(x);
  return s < kLow ? kLow : (s > kHigh ? kHigh : s);
}

}  // namespace gpcis
