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

#include "gpcis/kernel.hpp"

#include <cmath>

#include "gpcis/errors.hpp"
#include "gpcis/simd/kernels.hpp"

namespace gpcis {

KernelParams KernelParams::make(int deep_dims, double eta0, double eta_t, LearnMode mode, bool use_color) {
  if (deep_dims < 1) throw InvalidInput("kernel needs at least one deep dimension");
  if (!(eta0 > 0.0) || !(eta_t > 0.0)) throw InvalidInput("kernel scales must be positive");
  KernelParams p;
  p.log_eta0 = std::log(eta0);
  p.log_eta = Eigen::VectorXd::Constant(deep_dims, std::log(eta_t));
  p.mode = mode;
  p.use_color = use_color;
  return p;
}

double KernelParams::eta0() const { return std::exp(log_eta0); }

Eigen::VectorXd KernelParams::eta() const { return log_eta.array().exp(); }

double kernel_eval(const KernelParams& params, std::span<const double> a, std::span<const double> b) {
  const auto dims = static_cast<std::size_t>(params.input_dims());
  if (a.size() != dims || b.size() != dims) throw InvalidInput("kernel_eval: input width does not match params");
  for (std::size_t t = 0; t < dims; ++t) {
    if (!std::isfinite(a[t]) || !std::isfinite(b[t])) throw InvalidInput("kernel_eval: non-finite input");
  }
  const auto d = static_cast<std::size_t>(params.deep_dims());
  double deep = 0.0;
  for (std::size_t t = 0; t < d; ++t) {
    const double diff = a[t] - b[t];
    deep += diff * diff / (2.0 * std::exp(params.log_eta[static_cast<Eigen::Index>(t)]));
  }
  double value = std::exp(-deep);
  if (params.use_color) {
    double color = 0.0;
    for (std::size_t t = d; t < dims; ++t) {
      const double diff = a[t] - b[t];
      color += diff * diff;
    }
    value += params.eta0() * std::exp(-0.5 * color);
  }
  return value;
}

Eigen::MatrixXd kernel_matrix(const KernelParams& params, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.cols() != params.input_dims() || B.cols() != params.input_dims()) {
    throw InvalidInput("kernel_matrix: column count does not match kernel input width");
  }
  if (!A.allFinite() || !B.allFinite()) throw InvalidInput("kernel_matrix: non-finite input");

  const Eigen::MatrixXd points = B.transpose();  // column-major transpose == row-major B
  const Eigen::VectorXd inv_two_eta = (2.0 * params.eta().array()).inverse();
  Eigen::MatrixXd out(A.rows(), B.rows());
  if (out.size() == 0) return out;

  simd::KernelCrossArgs args;
  args.pixels = {A.data(), static_cast<std::size_t>(A.rows()), static_cast<std::size_t>(A.rows()),
                 static_cast<std::size_t>(A.cols())};
  args.points = points.data();
  args.n = static_cast<std::size_t>(B.rows());
  args.deep_dims = static_cast<std::size_t>(params.deep_dims());
  args.color_dims = params.use_color ? 3 : 0;
  args.inv_two_eta = inv_two_eta.data();
  args.eta0 = params.use_color ? params.eta0() : 0.0;
  args.out = out.data();
  simd::active_table().kernel_cross(args);
  if (&A == &B || A == B) mirror_upper(out);
  return out;
}

void mirror_upper(Eigen::MatrixXd& K) {
  for (Eigen::Index j = 0; j < K.cols(); ++j) {
    for (Eigen::Index i = j + 1; i < K.rows(); ++i) K(i, j) = K(j, i);
  }
}

}  // namespace gpcis
