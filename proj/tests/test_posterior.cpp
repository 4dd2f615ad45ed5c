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

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gpcis/clicksim.hpp"
#include "gpcis/errors.hpp"
#include "gpcis/features.hpp"
#include "gpcis/numeric.hpp"
#include "gpcis/posterior.hpp"
#include "gpcis/rng.hpp"
#include "gpcis/synthetic.hpp"
#include "oracles.hpp"

using namespace gpcis;

namespace {

FeatureMap random_map(int m, std::uint64_t seed, double scale = 0.4) {
  RandomStream r(seed);
  FeatureMap fm;
  fm.width = m;
  fm.height = 1;
  fm.X.resize(m, kFeatureDim);
  fm.I.resize(m, kColorDim);
  for (Eigen::Index i = 0; i < fm.X.size(); ++i) fm.X.data()[i] = scale * r.normal();
  for (Eigen::Index i = 0; i < fm.I.size(); ++i) fm.I.data()[i] = r.uniform();
  return fm;
}

ClickSet random_clicks(int n, int m, std::uint64_t seed) {
  RandomStream r(seed);
  ClickSet clicks;
  while (static_cast<int>(clicks.size()) < n) {
    const auto p = static_cast<std::size_t>(r.uniform_int(0, m - 1));
    if (!clicks.contains(p)) clicks.add({p, r.uniform() < 0.5 ? 1 : -1});
  }
  return clicks;
}

KernelParams fixed_kernel() { return KernelParams::make(kFeatureDim, 1.0, kFixedEtaT, LearnMode::kFixed); }

}  // namespace

TEST_CASE("zero head gives plus/minus ln 2") {
  const VariationalHead head = VariationalHead::zeros(kFeatureDim, kHeadHidden);
  Eigen::VectorXd y(2);
  y << 1, -1;
  const Eigen::VectorXd m = variational_mean(head, Eigen::MatrixXd::Random(2, kFeatureDim), y);
  CHECK(m[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(m[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("head signs follow labels and match the float oracle") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const VariationalHead head = VariationalHead::init(kFeatureDim, kHeadHidden, s);
    RandomStream r(100 + s);
    Eigen::MatrixXd X(7, kFeatureDim);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = r.normal();
    Eigen::VectorXd y(7);
    for (Eigen::Index i = 0; i < 7; ++i) y[i] = r.uniform() < 0.5 ? 1 : -1;
    const Eigen::VectorXd m = variational_mean(head, X, y);
    const Eigen::VectorXd ref = oracle::head_magnitude_f32(head, X);
    for (Eigen::Index i = 0; i < 7; ++i) {
      CHECK(m[i] * y[i] > 0.0);
      CHECK(std::abs(std::abs(m[i]) - ref[i]) <= 1e-5 * ref[i]);
    }
    const Eigen::VectorXd pos = variational_mean(head, X, Eigen::VectorXd::Ones(7));
    CHECK(pos.minCoeff() > 0.0);
  }
}

TEST_CASE("sample_f_n") {
  Eigen::VectorXd m(3);
  m << 0.5, -1.0, 2.0;
  CHECK(sample_f_n(m, 0.0, 1) == m);
  CHECK(sample_f_n(m, 0.01, 9) == sample_f_n(m, 0.01, 9));
  CHECK_THROWS_AS(sample_f_n(m, -1.0, 1), InvalidInput);

  const int n = 100000;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(3), s2 = Eigen::VectorXd::Zero(3);
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd d = sample_f_n(m, 0.01, static_cast<std::uint64_t>(k)) - m;
    s += d;
    s2 += d.cwiseAbs2();
  }
  const Eigen::VectorXd var = s2 / n - (s / n).cwiseAbs2();
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(var[j] >= 0.009);
    CHECK(var[j] <= 0.011);
  }
}

TEST_CASE("exact posterior at a coincident point") {
  FeatureMap fm = random_map(5, 1);
  VariationalHead head = VariationalHead::init(kFeatureDim, kHeadHidden, 3);
  head.sigma2 = 0.0;
  const ClickSet clicks({{2, 1}});
  const std::vector<std::size_t> test{2};
  const KernelParams kp = fixed_kernel();
  const ExactPosterior post = exact_posterior(fm, clicks, head, kp, 1e-7, test);
  const Eigen::VectorXd m = variational_mean(head, gather(fm, clicks.pixels()).X, clicks.labels());
  CHECK(std::abs(post.mean[0] - m[0]) < 1e-4);
  CHECK(std::abs(post.cov(0, 0)) < 1e-4);
}

TEST_CASE("exact posterior far from every click is the prior") {
  FeatureMap fm = random_map(4, 2);
  fm.X.row(3).setConstant(1e3);
  fm.I.row(3).setConstant(1e3);
  const VariationalHead head = VariationalHead::init(kFeatureDim, kHeadHidden, 4);
  const ClickSet clicks({{0, 1}, {1, -1}});
  const std::vector<std::size_t> test{3};
  const KernelParams kp = fixed_kernel();
  const ExactPosterior post = exact_posterior(fm, clicks, head, kp, 1e-2, test);
  CHECK(post.mean[0] == 0.0);
  CHECK(post.cov(0, 0) == doctest::Approx(kp.eta0() + 1.0).epsilon(1e-15));
}

TEST_CASE("exact posterior against the dense oracle") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const FeatureMap fm = random_map(10, 10 + s);
    VariationalHead head = VariationalHead::init(kFeatureDim, kHeadHidden, 20 + s);
    head.sigma2 = 0.01;
    const ClickSet clicks = random_clicks(3, 10, 30 + s);
    std::vector<std::size_t> test(7);
    std::iota(test.begin(), test.end(), 3);
    RandomStream r(40 + s);
    KernelParams kp = KernelParams::make(kFeatureDim, 1.0, 1.0, LearnMode::kLearned);
    kp.log_eta0 = 0.5 * r.normal();
    for (Eigen::Index t = 0; t < kp.log_eta.size(); ++t) kp.log_eta[t] = 0.5 * r.normal();
    const double eps2 = 1e-3;

    const ExactPosterior post = exact_posterior(fm, clicks, head, kp, eps2, test);
    const FeatureRows n = gather(fm, clicks.pixels());
    const FeatureRows t = gather(fm, test);
    const Eigen::VectorXd m = variational_mean(head, n.X, clicks.labels());
    const oracle::Posterior ref = oracle::exact_posterior(kp, kernel_inputs(n.X, n.I, true),
                                                          kernel_inputs(t.X, t.I, true), m, eps2, head.sigma2);
    CHECK((post.mean - ref.mean).cwiseAbs().maxCoeff() <= 1e-8 * ref.mean.cwiseAbs().maxCoeff());
    CHECK((post.cov - ref.cov).cwiseAbs().maxCoeff() <= 1e-8 * ref.cov.cwiseAbs().maxCoeff());
    CHECK(post.cov == post.cov.transpose());
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(post.cov).eigenvalues().minCoeff();
    CHECK(min_eig >= -1e-8 * (kp.eta0() + 1.0));
  }
}

TEST_CASE("exact posterior preconditions") {
  const FeatureMap fm = random_map(4, 3);
  const VariationalHead head = VariationalHead::init(kFeatureDim, kHeadHidden, 4);
  const std::vector<std::size_t> test{0};
  CHECK_THROWS_AS(exact_posterior(fm, ClickSet{}, head, fixed_kernel(), 1e-2, test), InvalidInput);
  CHECK_THROWS_AS(exact_posterior(fm, ClickSet({{0, 1}}), head, fixed_kernel(), 1e-2, {}), InvalidInput);
  CHECK_THROWS_AS(ClickSet({{0, 2}}), InvalidInput);
  CHECK_THROWS_AS(ClickSet({{0, 1}, {0, -1}}), InvalidInput);
}

TEST_CASE("pathwise sample interpolates a single click") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const FeatureMap fm = random_map(30, 50 + s);
    const VariationalHead head = VariationalHead::init(kFeatureDim, kHeadHidden, 60 + s);
    const WeightSpaceParams ws = init_weight_space(kDefaultBases, kFeatureDim + kColorDim, LearnMode::kFixed, 70 + s);
    const auto p = static_cast<std::size_t>(s % 30);
    const int label = s % 2 == 0 ? 1 : -1;
    const ClickSet clicks({{p, label}});
    const PosteriorSample smp = pathwise_sample(fm, clicks, head, fixed_kernel(), ws, 1e-7, 0.0, s);
    const Eigen::VectorXd m = variational_mean(head, gather(fm, clicks.pixels()).X, clicks.labels());
    const auto i = static_cast<Eigen::Index>(p);
    CHECK(smp.f[i] * label > 0.0);
    CHECK(std::abs(smp.f[i] - m[0]) <= 1e-4 * 2.0 * std::abs(m[0] - smp.prior_map[i]) + 1e-12);
  }
}

TEST_CASE("vanishing Fourier basis leaves the function-space interpolant") {
  const FeatureMap fm = random_map(25, 5);
  const VariationalHead head = VariationalHead::init(kFeatureDim, kHeadHidden, 6);
  WeightSpaceParams ws = init_weight_space(16, kFeatureDim + kColorDim, LearnMode::kFixed, 7);
  ws.theta.setZero();
  ws.tau.setConstant(std::numbers::pi / 2.0);
  const ClickSet clicks = random_clicks(4, 25, 8);
  const PosteriorSample smp = pathwise_sample(fm, clicks, head, fixed_kernel(), ws, 1e-4, 0.0, 9);
  CHECK(smp.prior_map.cwiseAbs().maxCoeff() < 1e-14);
  std::vector<std::size_t> all(25);
  std::iota(all.begin(), all.end(), 0);
  VariationalHead h0 = head;
  h0.sigma2 = 0.0;
  const ExactPosterior post = exact_posterior(fm, clicks, h0, fixed_kernel(), 1e-4, all);
  CHECK((smp.f - post.mean).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("sample invariants") {
  const FeatureMap fm = random_map(40, 11);
  VariationalHead head = VariationalHead::init(kFeatureDim, kHeadHidden, 12);
  head.b2 = 30.0;  // huge magnitudes push sigmoid to its limits
  const WeightSpaceParams ws = init_weight_space(kDefaultBases, kFeatureDim + kColorDim, LearnMode::kFixed, 13);
  const ClickSet clicks = random_clicks(5, 40, 14);
  const PosteriorSample smp = pathwise_sample(fm, clicks, head, fixed_kernel(), ws, 1e-7, 0.01, 15);
  CHECK(smp.f == smp.prior_map + smp.update_map);
  for (Eigen::Index i = 0; i < smp.prob.size(); ++i) {
    CHECK(smp.prob[i] > 0.0);
    CHECK(smp.prob[i] < 1.0);
    CHECK(smp.prob[i] == open_sigmoid(smp.f[i]));
  }
  CHECK(open_sigmoid(1e4) < 1.0);
  CHECK(open_sigmoid(-1e4) > 0.0);
  const PosteriorSample again = pathwise_sample(fm, clicks, head, fixed_kernel(), ws, 1e-7, 0.01, 15);
  CHECK(again.f == smp.f);
}

TEST_CASE("predict") {
  const FeatureMap fm = random_map(50, 21);
  const VariationalHead head = VariationalHead::init(kFeatureDim, kHeadHidden, 22);
  const WeightSpaceParams ws = init_weight_space(kDefaultBases, kFeatureDim + kColorDim, LearnMode::kFixed, 23);
  const ClickSet clicks = random_clicks(5, 50, 24);
  const KernelParams kp = fixed_kernel();
  CHECK(predict(fm, clicks, head, kp, ws, 1e-7, 0.01, 5, 1) ==
        pathwise_sample(fm, clicks, head, kp, ws, 1e-7, 0.01, 5).prob);
  CHECK_THROWS_AS(predict(fm, clicks, head, kp, ws, 1e-7, 0.01, 5, 0), InvalidInput);

  // Per-pixel spread from independent single draws.
  const int draws = 2000;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(50), s2 = Eigen::VectorXd::Zero(50);
  for (int k = 0; k < draws; ++k) {
    const Eigen::VectorXd p = pathwise_sample(fm, clicks, head, kp, ws, 1e-7, 0.01, 90000 + k).prob;
    s += p;
    s2 += p.cwiseAbs2();
  }
  const Eigen::VectorXd sd = (s2 / draws - (s / draws).cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
  const Eigen::VectorXd reference = predict(fm, clicks, head, kp, ws, 1e-7, 0.01, 31, 10000);
  const Eigen::VectorXd p64 = predict(fm, clicks, head, kp, ws, 1e-7, 0.01, 32, 64);
  for (Eigen::Index i = 0; i < 50; ++i) {
    const double se = sd[i] * std::sqrt(1.0 / 64 + 1.0 / 10000);
    CHECK(std::abs(p64[i] - reference[i]) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("degenerate configuration predicts one half") {
  const FeatureMap fm = random_map(12, 41);
  VariationalHead head = VariationalHead::zeros(kFeatureDim, kHeadHidden);
  head.b2 = -1000.0;  // softplus underflows to exactly zero
  WeightSpaceParams ws = init_weight_space(8, kFeatureDim + kColorDim, LearnMode::kFixed, 42);
  ws.mu_w.setZero();
  ws.log_sigma2_w = -std::numeric_limits<double>::infinity();
  const ClickSet clicks = random_clicks(3, 12, 43);
  const PosteriorSample smp = pathwise_sample(fm, clicks, head, fixed_kernel(), ws, 1e-7, 0.0, 1);
  CHECK((smp.prob.array() == 0.5).all());
  const DecomposedProbabilities d = decompose(smp);
  CHECK((d.update_prob.array() == 0.5).all());
  CHECK((d.prior_prob.array() == 0.5).all());
}

TEST_CASE("update map concentrates on the clicked region") {
  const LabeledImage li = make_synthetic(5, 0);
  const FeatureMap fm = extract_features(li.image);
  const VariationalHead head = VariationalHead::init(kFeatureDim, kHeadHidden, 1);
  const WeightSpaceParams ws = init_weight_space(kDefaultBases, kFeatureDim + kColorDim, LearnMode::kFixed, 2);
  const auto first = next_click(Mask(li.gt.width, li.gt.height), li.gt, ClickSet{});
  REQUIRE(first.has_value());
  CHECK(first->label == 1);
  const PosteriorSample smp = pathwise_sample(fm, ClickSet({*first}), head, fixed_kernel(), ws, 1e-7, 0.0, 3);
  const DecomposedProbabilities d = decompose(smp);
  double in = 0.0, out = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < li.gt.values.size(); ++i) {
    if (li.gt.values[i] != 0) {
      in += d.update_prob[static_cast<Eigen::Index>(i)];
      ++n_in;
    } else {
      out += d.update_prob[static_cast<Eigen::Index>(i)];
      ++n_out;
    }
  }
  CHECK(in / n_in > 0.5);
  CHECK(in / n_in > out / n_out + 0.05);
}
