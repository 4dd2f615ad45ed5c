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

// Independent reference implementations. Nothing here calls the production
// routines it is meant to check: formulas are re-evaluated directly, in long
// double where that helps, with explicit inverses and brute-force searches.

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gpcis/image.hpp"
#include "gpcis/kernel.hpp"
#include "gpcis/model.hpp"
#include "gpcis/posterior.hpp"
#include "gpcis/rff.hpp"

namespace gpcis::oracle {

using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VectorL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

// Kernel on [x (d) | I (3 when use_color)] vectors.
long double kernel(const KernelParams& kp, const Eigen::VectorXd& a, const Eigen::VectorXd& b);
Eigen::MatrixXd kernel_matrix(const KernelParams& kp, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

Eigen::MatrixXd phi(const WeightSpaceParams& ws, const Eigen::MatrixXd& Xbar);

// Head output before the label sign, computed in float as the stored
// parameters are.
Eigen::VectorXd head_magnitude_f32(const VariationalHead& head, const Eigen::MatrixXd& X);

struct Posterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// mean = K_tn Kinv m, cov = K_tt - K_tn Kinv (I - sigma2 Kinv) K_nt with
// Kinv = (K_nn + eps2 I)^{-1} formed explicitly.
Posterior exact_posterior(const KernelParams& kp, const Eigen::MatrixXd& xbar_n, const Eigen::MatrixXd& xbar_t,
                          const Eigen::VectorXd& m_xi, double eps2, double sigma2);

double nfl(const Eigen::VectorXd& prob, const Eigen::VectorXd& gt, double gamma);

// Cross-entropy of s(f_n) against (y + 1) / 2 plus 0.5 m^T Kinv m.
double vi(const Eigen::VectorXd& m_xi, const Eigen::VectorXd& f_n, const Eigen::VectorXd& y, const Eigen::MatrixXd& K,
          double eps2);

// 2-D convolution with a (2r+1)^2 window and mirrored borders.
std::vector<double> dense_blur(const std::vector<double>& channel, int width, int height, double sigma);

// Feature matrix (m x 11) built from dense_blur.
Eigen::MatrixXd features(const Image& image);

// Squared distance from each pixel of `inside` to the nearest outside pixel
// or border-ring position, by exhaustive search.
std::vector<double> brute_distance(const std::vector<std::uint8_t>& inside, int width, int height);

// Largest 4-connected error component (flood fill by BFS over explicit
// neighbor lists), then the farthest unclicked pixel from its complement.
std::optional<Click> brute_next_click(const Mask& pred, const Mask& gt, const std::vector<std::size_t>& clicked);

// Central differences of `loss` over every trainable scalar of `model`.
std::vector<Eigen::MatrixXd> finite_difference(ModelCheckpoint model,
                                               const std::function<double(const ModelCheckpoint&)>& loss,
                                               double step = 1e-4);

}  // namespace gpcis::oracle
