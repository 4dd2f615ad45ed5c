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
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gpcis/features.hpp"
#include "gpcis/kernel.hpp"
#include "gpcis/rff.hpp"

namespace gpcis {

inline constexpr int kHeadHidden = 96;
inline constexpr double kDefaultSigma2 = 0.01;

// One-hidden-layer ReLU perceptron whose softplus output, signed by the click
// label, is the variational mean at the clicks.
struct VariationalHead {
  Eigen::MatrixXd W1;  // hidden x d
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd W2;  // 1 x hidden
  double b2 = 0.0;
  double sigma2 = kDefaultSigma2;

  // PyTorch-style uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
  static VariationalHead init(int input_dims, int hidden, std::uint64_t seed);
  static VariationalHead zeros(int input_dims, int hidden);

  int input_dims() const { return static_cast<int>(W1.cols()); }
};

struct Click {
  std::size_t pixel = 0;
  int label = 1;  // +1 foreground, -1 background

  bool operator==(const Click&) const = default;
};

// Ordered clicks with unique pixels and labels in {+1, -1}.
class ClickSet {
 public:
  ClickSet() = default;
  explicit ClickSet(std::vector<Click> clicks);

  void add(Click click);
  void pop_back();
  bool contains(std::size_t pixel) const;

  std::size_t size() const { return clicks_.size(); }
  bool empty() const { return clicks_.empty(); }
  const std::vector<Click>& clicks() const { return clicks_; }
  const Click& operator[](std::size_t i) const { return clicks_[i]; }
  std::vector<std::size_t> pixels() const;
  Eigen::VectorXd labels() const;

 private:
  std::vector<Click> clicks_;
};

struct PosteriorSample {
  Eigen::VectorXd f;
  Eigen::VectorXd prior_map;
  Eigen::VectorXd update_map;
  Eigen::VectorXd prob;
};

struct ExactPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Softplus(MLP(X_n)) * y_n.
Eigen::VectorXd variational_mean(const VariationalHead& head, const Eigen::MatrixXd& X_n,
                                 const Eigen::VectorXd& labels);

// m_xi + sqrt(sigma2) z.
Eigen::VectorXd sample_f_n(const Eigen::VectorXd& m_xi, double sigma2, std::uint64_t seed);

// Dense Gaussian posterior at test pixels under the variational q(f_n):
//   mean = K_*n A^{-1} m_xi
//   cov  = K_** - K_*n A^{-1} K_n* + sigma2 K_*n A^{-1} A^{-1} K_n*,  A = K_nn + eps2 I
// Cubic in the test count; used as the reference for the pathwise sampler.
ExactPosterior exact_posterior(const FeatureMap& fm, const ClickSet& clicks, const VariationalHead& head,
                               const KernelParams& kp, double eps2, std::span<const std::size_t> test_indices);

// Decoupled sample over all m pixels:
//   f = Phi(Xbar_m) w + K_mn A^{-1} (f_n - Phi(Xbar_n) w)
// Linear in m; no m x m or m x l matrix is formed.
PosteriorSample pathwise_sample(const FeatureMap& fm, const ClickSet& clicks, const VariationalHead& head,
                                const KernelParams& kp, const WeightSpaceParams& ws, double eps2, double sigma2,
                                std::uint64_t seed);

// Mean of sigmoid(f) over `samples` pathwise draws; draw 0 uses `seed` itself.
Eigen::VectorXd predict(const FeatureMap& fm, const ClickSet& clicks, const VariationalHead& head,
                        const KernelParams& kp, const WeightSpaceParams& ws, double eps2, double sigma2,
                        std::uint64_t seed, int samples = 1);

struct DecomposedProbabilities {
  Eigen::VectorXd prior_prob;
  Eigen::VectorXd update_prob;
};

DecomposedProbabilities decompose(const PosteriorSample& sample);

// Seeds of the two stochastic parts of one pathwise draw.
std::uint64_t weight_seed(std::uint64_t seed);
std::uint64_t latent_seed(std::uint64_t seed);

}  // namespace gpcis
