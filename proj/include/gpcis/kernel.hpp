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
#include <span>

namespace gpcis {

enum class LearnMode { kFixed, kLearned };

inline constexpr double kFixedEta0 = 1.0;
// e^-1, the constant length-scale divisor of the fixed-kernel variant.
inline constexpr double kFixedEtaT = 0.36787944117144233;

// Hyperparameters of the double-space kernel
//   k(a, b) = eta0 * exp(-|I_a - I_b|^2 / 2) + exp(-sum_t (x_at - x_bt)^2 / (2 eta_t))
// on inputs laid out as [x (d) | I (3)]. Positivity comes from storing logs.
// With use_color off the inputs are x alone and the eta0 term is dropped.
struct KernelParams {
  double log_eta0 = 0.0;
  Eigen::VectorXd log_eta;
  LearnMode mode = LearnMode::kLearned;
  bool use_color = true;

  static KernelParams make(int deep_dims, double eta0, double eta_t, LearnMode mode, bool use_color = true);

  double eta0() const;
  Eigen::VectorXd eta() const;
  int deep_dims() const { return static_cast<int>(log_eta.size()); }
  int input_dims() const { return deep_dims() + (use_color ? 3 : 0); }
};

struct JitterConfig {
  double eps2_train = 1e-2;
  double eps2_test = 1e-7;
};

double kernel_eval(const KernelParams& params, std::span<const double> a, std::span<const double> b);

// p x q matrix of kernel values between the rows of A and the rows of B.
Eigen::MatrixXd kernel_matrix(const KernelParams& params, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// Copies the upper triangle over the lower one. Used when both arguments are
// the same rows, so K(A, A) is symmetric bit for bit.
void mirror_upper(Eigen::MatrixXd& K);

}  // namespace gpcis
