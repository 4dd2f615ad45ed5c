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

#include <Eigen/Core>
#include <cstdint>

#include "gpcis/posterior.hpp"

namespace gpcis {

inline constexpr double kFocalDenominatorFloor = 1e-8;

// Normalized focal loss over probabilities. gt entries are 0 or 1.
double nfl_loss(const Eigen::VectorXd& prob, const Eigen::VectorXd& gt, double gamma);

// Variational objective at the clicks: summed cross-entropy of s(f_n) against
// (y + 1) / 2 for one reparameterized draw f_n, plus the quadratic term
// 0.5 m^T (K + eps2 I)^{-1} m.
double vi_loss(const VariationalHead& head, const Eigen::MatrixXd& X_n, const Eigen::VectorXd& y_n,
               const Eigen::MatrixXd& K_nn, double eps2, double sigma2, std::uint64_t seed);

}  // namespace gpcis
