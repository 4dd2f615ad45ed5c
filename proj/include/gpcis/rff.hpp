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

#include "gpcis/kernel.hpp"

namespace gpcis {

inline constexpr int kDefaultBases = 128;
inline constexpr double kFixedSigma2W = 0.025;
inline constexpr double kMuWInitVariance = 0.25;

// Random Fourier basis phi_r(x) = sqrt(2/l) cos(theta_r . x + tau_r) and the
// Gaussian prior w ~ N(mu_w, sigma_w^2 I_l) over its weights.
struct WeightSpaceParams {
  Eigen::MatrixXd theta;  // l x dim
  Eigen::VectorXd tau;    // l
  Eigen::VectorXd mu_w;   // l
  double log_sigma2_w = 0.0;
  LearnMode mode = LearnMode::kLearned;

  int bases() const { return static_cast<int>(theta.rows()); }
  int dim() const { return static_cast<int>(theta.cols()); }
  double sigma2_w() const;
  double basis_scale() const;
};

// theta ~ N(0, I), tau ~ U(0, 2 pi), mu_w ~ N(0, 0.25 I), sigma_w^2 = 0.025.
// Learned mode starts from the same draws.
WeightSpaceParams init_weight_space(int bases, int dim, LearnMode mode, std::uint64_t seed);

// p x l basis matrix.
Eigen::MatrixXd phi(const WeightSpaceParams& ws, const Eigen::MatrixXd& Xbar);

// w = mu_w + sigma_w z with z from the seeded stream; sigma_w = 0 when
// log_sigma2_w = -inf.
Eigen::VectorXd sample_w(const WeightSpaceParams& ws, std::uint64_t seed);

// Phi(Xbar) w evaluated without materializing Phi.
Eigen::VectorXd rff_project(const WeightSpaceParams& ws, const Eigen::MatrixXd& Xbar, const Eigen::VectorXd& w);

}  // namespace gpcis
