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

#include "gpcis/rff.hpp"

#include <cmath>
#include <numbers>

#include "gpcis/errors.hpp"
#include "gpcis/rng.hpp"
#include "gpcis/simd/kernels.hpp"

namespace gpcis {
namespace {

simd::PixelColumns columns_of(const Eigen::MatrixXd& Xbar) {
  return {Xbar.data(), static_cast<std::size_t>(Xbar.rows()), static_cast<std::size_t>(Xbar.rows()),
          static_cast<std::size_t>(Xbar.cols())};
}

void check_width(const WeightSpaceParams& ws, const Eigen::MatrixXd& Xbar) {
  if (Xbar.cols() != ws.dim()) throw InvalidInput("Fourier basis: input width does not match theta");
}

}  // namespace

double WeightSpaceParams::sigma2_w() const { return std::exp(log_sigma2_w); }

double WeightSpaceParams::basis_scale() const { return std::sqrt(2.0 / bases()); }

WeightSpaceParams init_weight_space(int bases, int dim, LearnMode mode, std::uint64_t seed) {
  if (bases < 1 || dim < 1) throw InvalidInput("weight space needs l >= 1 and dim >= 1");
  WeightSpaceParams ws;
  ws.theta.resize(bases, dim);
  ws.tau.resize(bases);
  ws.mu_w.resize(bases);
  RandomStream theta_rng(seed, 0);
  for (int r = 0; r < bases; ++r) {
    for (int t = 0; t < dim; ++t) ws.theta(r, t) = theta_rng.normal();
  }
  RandomStream tau_rng(seed, 1);
  for (int r = 0; r < bases; ++r) ws.tau[r] = tau_rng.uniform(0.0, 2.0 * std::numbers::pi);
  RandomStream mu_rng(seed, 2);
  const double mu_sd = std::sqrt(kMuWInitVariance);
  for (int r = 0; r < bases; ++r) ws.mu_w[r] = mu_sd * mu_rng.normal();
  ws.log_sigma2_w = std::log(kFixedSigma2W);
  ws.mode = mode;
  return ws;
}

Eigen::MatrixXd phi(const WeightSpaceParams& ws, const Eigen::MatrixXd& Xbar) {
  check_width(ws, Xbar);
  Eigen::MatrixXd out(Xbar.rows(), ws.bases());
  if (out.size() == 0) return out;
  const Eigen::MatrixXd theta_rows = ws.theta.transpose();  // row-major theta
  simd::PhiMatrixArgs args;
  args.pixels = columns_of(Xbar);
  args.theta = theta_rows.data();
  args.tau = ws.tau.data();
  args.bases = static_cast<std::size_t>(ws.bases());
  args.scale = ws.basis_scale();
  args.out = out.data();
  simd::active_table().phi_matrix(args);
  return out;
}

Eigen::VectorXd sample_w(const WeightSpaceParams& ws, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  Eigen::VectorXd z(ws.bases());
  rng.fill_normal({z.data(), static_cast<std::size_t>(z.size())});
  const double sigma = std::exp(0.5 * ws.log_sigma2_w);
  if (sigma == 0.0) return ws.mu_w;
  return ws.mu_w + sigma * z;
}

Eigen::VectorXd rff_project(const WeightSpaceParams& ws, const Eigen::MatrixXd& Xbar, const Eigen::VectorXd& w) {
  check_width(ws, Xbar);
  if (w.size() != ws.bases()) throw InvalidInput("rff_project: weight vector length mismatch");
  Eigen::VectorXd out(Xbar.rows());
  if (out.size() == 0) return out;
  const Eigen::MatrixXd theta_rows = ws.theta.transpose();
  const Eigen::VectorXd coef = ws.basis_scale() * w;
  simd::RffProjectArgs args;
  args.pixels = columns_of(Xbar);
  args.theta = theta_rows.data();
  args.tau = ws.tau.data();
  args.coef = coef.data();
  args.bases = static_cast<std::size_t>(ws.bases());
  args.out = out.data();
  simd::active_table().rff_project(args);
  return out;
}

}  // namespace gpcis
