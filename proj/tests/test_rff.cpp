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

#include <cmath>
#include <numbers>

#include "gpcis/errors.hpp"
#include "gpcis/rff.hpp"
#include "gpcis/rng.hpp"
#include "oracles.hpp"

using namespace gpcis;

TEST_CASE("init is seeded") {
  const WeightSpaceParams a = init_weight_space(1, 2, LearnMode::kFixed, 17);
  const WeightSpaceParams b = init_weight_space(1, 2, LearnMode::kFixed, 17);
  CHECK(a.theta == b.theta);
  CHECK(a.tau == b.tau);
  CHECK(a.mu_w == b.mu_w);
  const WeightSpaceParams c = init_weight_space(1, 2, LearnMode::kFixed, 18);
  CHECK(a.theta != c.theta);
  CHECK_THROWS_AS(init_weight_space(0, 2, LearnMode::kFixed, 1), InvalidInput);
}

TEST_CASE("fixed mode constants") {
  const WeightSpaceParams ws = init_weight_space(4096, 14, LearnMode::kFixed, 3);
  CHECK(ws.sigma2_w() == doctest::Approx(0.025).epsilon(1e-15));
  CHECK(std::abs(ws.tau.mean() - std::numbers::pi) < 2.0 * std::numbers::pi * 0.05);
  CHECK(ws.tau.minCoeff() >= 0.0);
  CHECK(ws.tau.maxCoeff() <= 2.0 * std::numbers::pi);
  const double mu_var = ws.mu_w.squaredNorm() / ws.bases();
  CHECK(mu_var == doctest::Approx(0.25).epsilon(0.1));
  CHECK(ws.basis_scale() == doctest::Approx(std::sqrt(2.0 / 4096.0)));
}

TEST_CASE("phi special cases") {
  WeightSpaceParams ws = init_weight_space(2, 3, LearnMode::kFixed, 1);
  ws.theta.setZero();
  ws.tau << 0.0, std::numbers::pi / 2.0;
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 3);
  const Eigen::MatrixXd P = phi(ws, X);
  CHECK((P.col(0).array() - 1.0).abs().maxCoeff() < 1e-15);
  CHECK(P.col(1).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(phi(ws, Eigen::MatrixXd::Zero(2, 4)), InvalidInput);
}

TEST_CASE("phi against the oracle and bounded") {
  const WeightSpaceParams ws = init_weight_space(64, 14, LearnMode::kLearned, 5);
  RandomStream r(9);
  Eigen::MatrixXd X(37, 14);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = r.uniform(-1.0, 1.0);
  const Eigen::MatrixXd P = phi(ws, X);
  const Eigen::MatrixXd ref = oracle::phi(ws, X);
  CHECK((P - ref).cwiseAbs().maxCoeff() <= 1e-12 * ws.basis_scale());
  CHECK(P.cwiseAbs().maxCoeff() <= ws.basis_scale());
}

TEST_CASE("sample_w") {
  WeightSpaceParams ws = init_weight_space(8, 3, LearnMode::kFixed, 2);
  CHECK(sample_w(ws, 4) == sample_w(ws, 4));
  ws.log_sigma2_w = -std::numeric_limits<double>::infinity();
  CHECK(sample_w(ws, 4) == ws.mu_w);
}

TEST_CASE("sample_w variance") {
  WeightSpaceParams ws = init_weight_space(3, 2, LearnMode::kFixed, 2);
  ws.mu_w.setZero();
  const int n = 100000;
  Eigen::VectorXd s2 = Eigen::VectorXd::Zero(3);
  for (int k = 0; k < n; ++k) s2 += sample_w(ws, static_cast<std::uint64_t>(k)).cwiseAbs2();
  s2 /= n;
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(s2[j] >= 0.0225);
    CHECK(s2[j] <= 0.0275);
  }
}

TEST_CASE("rff_project equals phi times w") {
  const WeightSpaceParams ws = init_weight_space(32, 5, LearnMode::kFixed, 8);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(19, 5);
  const Eigen::VectorXd w = sample_w(ws, 1);
  const Eigen::VectorXd a = rff_project(ws, X, w);
  const Eigen::VectorXd b = phi(ws, X) * w;
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-13);
}
