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

namespace gpcis {

// Lower Cholesky factor of (K + eps2 I). No explicit inverse is ever formed;
// all uses go through triangular solves.
class CholeskyFactor {
 public:
  // K must be square and symmetric within 1e-8 (relative to its largest
  // entry); it is symmetrized as (K + K^T) / 2 first. Throws NumericalError
  // carrying the pivot index if the jittered matrix is not positive definite.
  static CholeskyFactor jittered(const Eigen::MatrixXd& K, double eps2);

  Eigen::Index size() const { return lower_.rows(); }
  const Eigen::MatrixXd& lower() const { return lower_; }
  double min_pivot() const { return min_pivot_; }

  // (K + eps2 I)^{-1} B
  Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const;
  // L^{-1} B
  Eigen::MatrixXd solve_lower(const Eigen::MatrixXd& B) const;
  // L^{-T} B
  Eigen::MatrixXd solve_upper(const Eigen::MatrixXd& B) const;

 private:
  Eigen::MatrixXd lower_;
  double min_pivot_ = 0.0;
};

Eigen::MatrixXd jittered_solve(const Eigen::MatrixXd& K, double eps2, const Eigen::MatrixXd& B);

}  // namespace gpcis
