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

#include "gpcis/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gpcis/errors.hpp"

namespace gpcis {

CholeskyFactor CholeskyFactor::jittered(const Eigen::MatrixXd& K, double eps2) {
  if (K.rows() != K.cols()) throw InvalidInput("jittered factorization needs a square matrix");
  if (!(eps2 > 0.0)) throw InvalidInput("jitter eps2 must be positive");
  if (!K.allFinite()) throw InvalidInput("kernel matrix has non-finite entries");
  const Eigen::Index n = K.rows();
  const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw InvalidInput("kernel matrix is not symmetric within tolerance");
  }

  CholeskyFactor f;
  f.lower_ = Eigen::MatrixXd::Zero(n, n);
  f.min_pivot_ = n > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  Eigen::MatrixXd& L = f.lower_;
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = K(j, j) + eps2;
    for (Eigen::Index k = 0; k < j; ++k) pivot -= L(j, k) * L(j, k);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      throw NumericalError("Cholesky factorization failed at pivot " + std::to_string(j), j);
    }
    f.min_pivot_ = std::min(f.min_pivot_, pivot);
    const double diag = std::sqrt(pivot);
    L(j, j) = diag;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = 0.5 * (K(i, j) + K(j, i));
      for (Eigen::Index k = 0; k < j; ++k) v -= L(i, k) * L(j, k);
      L(i, j) = v / diag;
    }
  }
  return f;
}

Eigen::MatrixXd CholeskyFactor::solve_lower(const Eigen::MatrixXd& B) const {
  if (B.rows() != size()) throw InvalidInput("solve: right-hand side row count mismatch");
  Eigen::MatrixXd X = B;
  const Eigen::Index n = size();
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double v = X(i, c);
      for (Eigen::Index k = 0; k < i; ++k) v -= lower_(i, k) * X(k, c);
      X(i, c) = v / lower_(i, i);
    }
  }
  return X;
}

Eigen::MatrixXd CholeskyFactor::solve_upper(const Eigen::MatrixXd& B) const {
  if (B.rows() != size()) throw InvalidInput("solve: right-hand side row count mismatch");
  Eigen::MatrixXd X = B;
  const Eigen::Index n = size();
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      double v = X(i, c);
      for (Eigen::Index k = i + 1; k < n; ++k) v -= lower_(k, i) * X(k, c);
      X(i, c) = v / lower_(i, i);
    }
  }
  return X;
}

Eigen::MatrixXd CholeskyFactor::solve(const Eigen::MatrixXd& B) const { return solve_upper(solve_lower(B)); }

Eigen::MatrixXd jittered_solve(const Eigen::MatrixXd& K, double eps2, const Eigen::MatrixXd& B) {
  return CholeskyFactor::jittered(K, eps2).solve(B);
}

}  // namespace gpcis
