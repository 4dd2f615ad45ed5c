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

#include "gpcis/losses.hpp"

#include <algorithm>
#include <cmath>

#include "gpcis/errors.hpp"
#include "gpcis/linalg.hpp"
#include "gpcis/numeric.hpp"

namespace gpcis {

double nfl_loss(const Eigen::VectorXd& prob, const Eigen::VectorXd& gt, double gamma) {
  if (prob.size() != gt.size()) throw InvalidInput("nfl_loss: prob and gt sizes differ");
  double numer = 0.0;
  double denom = 0.0;
  for (Eigen::Index i = 0; i < prob.size(); ++i) {
    const double p = prob[i];
    if (!(p > 0.0 && p < 1.0)) throw InvalidInput("nfl_loss: probabilities must lie in (0, 1)");
    const double p_t = gt[i] > 0.5 ? p : 1.0 - p;
    const double w = std::pow(1.0 - p_t, gamma);
    numer -= w * std::log(p_t);
    denom += w;
  }
  return numer / std::max(denom, kFocalDenominatorFloor);
}

double vi_loss(const VariationalHead& head, const Eigen::MatrixXd& X_n, const Eigen::VectorXd& y_n,
               const Eigen::MatrixXd& K_nn, double eps2, double sigma2, std::uint64_t seed) {
  if (y_n.size() < 1) throw InvalidInput("vi_loss needs at least one click");
  if (K_nn.rows() != y_n.size() || K_nn.cols() != y_n.size()) throw InvalidInput("vi_loss: K_nn shape mismatch");
  const Eigen::VectorXd m = variational_mean(head, X_n, y_n);
  const Eigen::VectorXd f_n = sample_f_n(m, sigma2, seed);
  double ce = 0.0;
  for (Eigen::Index c = 0; c < y_n.size(); ++c) {
    const double t = 0.5 * (y_n[c] + 1.0);
    ce += softplus(f_n[c]) - t * f_n[c];
  }
  const Eigen::VectorXd alpha = jittered_solve(K_nn, eps2, m);
  return ce + 0.5 * m.dot(alpha);
}

}  // namespace gpcis
