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

#include "gpcis/posterior.hpp"

#include <algorithm>
#include <cmath>

#include "gpcis/errors.hpp"
#include "gpcis/linalg.hpp"
#include "gpcis/numeric.hpp"
#include "gpcis/rng.hpp"

namespace gpcis {
namespace {

void require_clicks(const ClickSet& clicks, const FeatureMap& fm) {
  if (clicks.empty()) throw InvalidInput("posterior query needs at least one click");
  for (const Click& c : clicks.clicks()) {
    if (c.pixel >= fm.m()) throw InvalidInput("click pixel outside the image");
  }
}

void require_head(const VariationalHead& head, const FeatureMap& fm) {
  if (head.input_dims() != fm.d()) throw InvalidInput("head input width does not match the feature map");
}

}  // namespace

VariationalHead VariationalHead::init(int input_dims, int hidden, std::uint64_t seed) {
  VariationalHead head = zeros(input_dims, hidden);
  RandomStream rng(seed, 0);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_dims));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Eigen::Index i = 0; i < head.W1.size(); ++i) head.W1.data()[i] = rng.uniform(-bound1, bound1);
  for (Eigen::Index i = 0; i < head.b1.size(); ++i) head.b1[i] = rng.uniform(-bound1, bound1);
  for (Eigen::Index i = 0; i < head.W2.size(); ++i) head.W2.data()[i] = rng.uniform(-bound2, bound2);
  head.b2 = rng.uniform(-bound2, bound2);
  return head;
}

VariationalHead VariationalHead::zeros(int input_dims, int hidden) {
  if (input_dims < 1 || hidden < 1) throw InvalidInput("head dimensions must be positive");
  VariationalHead head;
  head.W1 = Eigen::MatrixXd::Zero(hidden, input_dims);
  head.b1 = Eigen::VectorXd::Zero(hidden);
  head.W2 = Eigen::MatrixXd::Zero(1, hidden);
  head.b2 = 0.0;
  return head;
}

ClickSet::ClickSet(std::vector<Click> clicks) {
  for (const Click& c : clicks) add(c);
}

void ClickSet::add(Click click) {
  if (click.label != 1 && click.label != -1) throw InvalidInput("click label must be +1 or -1");
  if (contains(click.pixel)) throw InvalidInput("pixel already clicked");
  clicks_.push_back(click);
}

void ClickSet::pop_back() {
  if (clicks_.empty()) throw InvalidInput("no clicks to remove");
  clicks_.pop_back();
}

bool ClickSet::contains(std::size_t pixel) const {
  return std::any_of(clicks_.begin(), clicks_.end(), [pixel](const Click& c) { return c.pixel == pixel; });
}

std::vector<std::size_t> ClickSet::pixels() const {
  std::vector<std::size_t> out;
  out.reserve(clicks_.size());
  for (const Click& c : clicks_) out.push_back(c.pixel);
  return out;
}

Eigen::VectorXd ClickSet::labels() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(clicks_.size()));
  for (std::size_t i = 0; i < clicks_.size(); ++i) y[static_cast<Eigen::Index>(i)] = clicks_[i].label;
  return y;
}

Eigen::VectorXd variational_mean(const VariationalHead& head, const Eigen::MatrixXd& X_n,
                                 const Eigen::VectorXd& labels) {
  if (X_n.rows() != labels.size()) throw InvalidInput("variational_mean: one label per click row");
  if (X_n.cols() != head.input_dims()) throw InvalidInput("variational_mean: feature width mismatch");
  const Eigen::MatrixXd hidden = ((head.W1 * X_n.transpose()).colwise() + head.b1).cwiseMax(0.0);
  const Eigen::RowVectorXd logits = (head.W2 * hidden).array() + head.b2;
  Eigen::VectorXd m(labels.size());
  for (Eigen::Index c = 0; c < labels.size(); ++c) m[c] = softplus(logits[c]) * labels[c];
  return m;
}

Eigen::VectorXd sample_f_n(const Eigen::VectorXd& m_xi, double sigma2, std::uint64_t seed) {
  if (!(sigma2 >= 0.0)) throw InvalidInput("sigma2 must be non-negative");
  if (sigma2 == 0.0) return m_xi;
  RandomStream rng(seed, 0);
  Eigen::VectorXd z(m_xi.size());
  rng.fill_normal({z.data(), static_cast<std::size_t>(z.size())});
  return m_xi + std::sqrt(sigma2) * z;
}

ExactPosterior exact_posterior(const FeatureMap& fm, const ClickSet& clicks, const VariationalHead& head,
                               const KernelParams& kp, double eps2, std::span<const std::size_t> test_indices) {
  require_clicks(clicks, fm);
  require_head(head, fm);
  if (test_indices.empty()) throw InvalidInput("exact_posterior needs at least one test pixel");

  const auto click_px = clicks.pixels();
  const FeatureRows at_clicks = gather(fm, click_px);
  const FeatureRows at_test = gather(fm, test_indices);
  const Eigen::MatrixXd xbar_n = kernel_inputs(at_clicks.X, at_clicks.I, kp.use_color);
  const Eigen::MatrixXd xbar_t = kernel_inputs(at_test.X, at_test.I, kp.use_color);

  const Eigen::VectorXd m_xi = variational_mean(head, at_clicks.X, clicks.labels());
  const Eigen::MatrixXd K_nn = kernel_matrix(kp, xbar_n, xbar_n);
  const Eigen::MatrixXd K_nt = kernel_matrix(kp, xbar_n, xbar_t);
  const Eigen::MatrixXd K_tt = kernel_matrix(kp, xbar_t, xbar_t);
  const CholeskyFactor chol = CholeskyFactor::jittered(K_nn, eps2);

  ExactPosterior post;
  post.mean = K_nt.transpose() * chol.solve(m_xi);
  // Both subtracted/added pieces are Gram matrices, so the sum stays PSD.
  const Eigen::MatrixXd V = chol.solve_lower(K_nt);  // L^{-1} K_n*
  const Eigen::MatrixXd U = chol.solve_upper(V);     // A^{-1} K_n*
  Eigen::MatrixXd cov = K_tt - V.transpose() * V + head.sigma2 * (U.transpose() * U);
  post.cov = 0.5 * (cov + cov.transpose());
  return post;
}

std::uint64_t weight_seed(std::uint64_t seed) { return derive_seed(seed, 1); }
std::uint64_t latent_seed(std::uint64_t seed) { return derive_seed(seed, 2); }

PosteriorSample pathwise_sample(const FeatureMap& fm, const ClickSet& clicks, const VariationalHead& head,
                                const KernelParams& kp, const WeightSpaceParams& ws, double eps2, double sigma2,
                                std::uint64_t seed) {
  require_clicks(clicks, fm);
  require_head(head, fm);

  const auto click_px = clicks.pixels();
  const FeatureRows at_clicks = gather(fm, click_px);
  const Eigen::MatrixXd xbar_n = kernel_inputs(at_clicks.X, at_clicks.I, kp.use_color);
  const Eigen::MatrixXd xbar_m = kernel_inputs(fm.X, fm.I, kp.use_color);

  const Eigen::VectorXd m_xi = variational_mean(head, at_clicks.X, clicks.labels());
  const Eigen::VectorXd f_n = sample_f_n(m_xi, sigma2, latent_seed(seed));
  const Eigen::VectorXd w = sample_w(ws, weight_seed(seed));

  PosteriorSample s;
  s.prior_map = rff_project(ws, xbar_m, w);
  const Eigen::VectorXd prior_n = rff_project(ws, xbar_n, w);
  const Eigen::MatrixXd K_nn = kernel_matrix(kp, xbar_n, xbar_n);
  const Eigen::MatrixXd K_mn = kernel_matrix(kp, xbar_m, xbar_n);
  const Eigen::VectorXd v = CholeskyFactor::jittered(K_nn, eps2).solve(f_n - prior_n);
  s.update_map = K_mn * v;
  s.f = s.prior_map + s.update_map;
  s.prob = s.f.unaryExpr([](double x) { return open_sigmoid(x); });
  return s;
}

Eigen::VectorXd predict(const FeatureMap& fm, const ClickSet& clicks, const VariationalHead& head,
                        const KernelParams& kp, const WeightSpaceParams& ws, double eps2, double sigma2,
                        std::uint64_t seed, int samples) {
  if (samples < 1) throw InvalidInput("predict needs at least one sample");
  Eigen::VectorXd prob = pathwise_sample(fm, clicks, head, kp, ws, eps2, sigma2, seed).prob;
  for (int s = 1; s < samples; ++s) {
    prob += pathwise_sample(fm, clicks, head, kp, ws, eps2, sigma2, derive_seed(seed, 1000 + s)).prob;
  }
  if (samples > 1) prob /= samples;
  return prob;
}

DecomposedProbabilities decompose(const PosteriorSample& sample) {
  return {sample.prior_map.unaryExpr([](double x) { return open_sigmoid(x); }),
          sample.update_map.unaryExpr([](double x) { return open_sigmoid(x); })};
}

}  // namespace gpcis
