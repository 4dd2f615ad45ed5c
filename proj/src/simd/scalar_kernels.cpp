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

#include <cmath>

#include "gpcis/simd/kernels.hpp"

namespace gpcis::simd {
namespace {

inline double channel(const PixelColumns& p, std::size_t t, std::size_t i) { return p.data[t * p.stride + i]; }

void kernel_cross(const KernelCrossArgs& a) {
  const std::size_t m = a.pixels.rows;
  const std::size_t dims = a.deep_dims + a.color_dims;
  for (std::size_t j = 0; j < a.n; ++j) {
    const double* pt = a.points + j * dims;
    double* out = a.out + j * m;
    for (std::size_t i = 0; i < m; ++i) {
      double deep = 0.0;
      for (std::size_t t = 0; t < a.deep_dims; ++t) {
        const double diff = channel(a.pixels, t, i) - pt[t];
        deep += diff * diff * a.inv_two_eta[t];
      }
      double value = std::exp(-deep);
      if (a.color_dims > 0) {
        double color = 0.0;
        for (std::size_t t = a.deep_dims; t < dims; ++t) {
          const double diff = channel(a.pixels, t, i) - pt[t];
          color += diff * diff;
        }
        value += a.eta0 * std::exp(-0.5 * color);
      }
      out[i] = value;
    }
  }
}

void kernel_cross_grad(const KernelCrossGradArgs& g) {
  const KernelCrossArgs& a = g.forward;
  const std::size_t m = a.pixels.rows;
  const std::size_t dims = a.deep_dims + a.color_dims;
  for (std::size_t j = 0; j < a.n; ++j) {
    const double* pt = a.points + j * dims;
    const double* up = g.grad_out + j * m;
    for (std::size_t i = 0; i < m; ++i) {
      if (up[i] == 0.0) continue;
      double deep = 0.0;
      for (std::size_t t = 0; t < a.deep_dims; ++t) {
        const double diff = channel(a.pixels, t, i) - pt[t];
        deep += diff * diff * a.inv_two_eta[t];
      }
      // d/dlog(eta_t) of exp(-sum d^2/(2 eta_t)) = e * d_t^2 / (2 eta_t).
      const double w = up[i] * std::exp(-deep);
      for (std::size_t t = 0; t < a.deep_dims; ++t) {
        const double diff = channel(a.pixels, t, i) - pt[t];
        g.grad_log_eta[t] += w * diff * diff * a.inv_two_eta[t];
      }
      if (a.color_dims > 0) {
        double color = 0.0;
        for (std::size_t t = a.deep_dims; t < dims; ++t) {
          const double diff = channel(a.pixels, t, i) - pt[t];
          color += diff * diff;
        }
        *g.grad_log_eta0 += up[i] * a.eta0 * std::exp(-0.5 * color);
      }
    }
  }
}

void rff_project(const RffProjectArgs& a) {
  const std::size_t dims = a.pixels.dims;
  for (std::size_t i = 0; i < a.pixels.rows; ++i) {
    double acc = 0.0;
    for (std::size_t r = 0; r < a.bases; ++r) {
      const double* th = a.theta + r * dims;
      double u = a.tau[r];
      for (std::size_t t = 0; t < dims; ++t) u += th[t] * channel(a.pixels, t, i);
      acc += a.coef[r] * std::cos(u);
    }
    a.out[i] = acc;
  }
}

void rff_project_grad(const RffProjectGradArgs& g) {
  const RffProjectArgs& a = g.forward;
  const std::size_t dims = a.pixels.dims;
  for (std::size_t r = 0; r < a.bases; ++r) {
    const double* th = a.theta + r * dims;
    double* gth = g.grad_theta + r * dims;
    double gtau = 0.0;
    double gcoef = 0.0;
    for (std::size_t i = 0; i < a.pixels.rows; ++i) {
      const double up = g.grad_out[i];
      double u = a.tau[r];
      for (std::size_t t = 0; t < dims; ++t) u += th[t] * channel(a.pixels, t, i);
      gcoef += up * std::cos(u);
      const double du = -up * a.coef[r] * std::sin(u);
      gtau += du;
      for (std::size_t t = 0; t < dims; ++t) gth[t] += du * channel(a.pixels, t, i);
    }
    g.grad_tau[r] += gtau;
    g.grad_coef[r] += gcoef;
  }
}

void phi_matrix(const PhiMatrixArgs& a) {
  const std::size_t dims = a.pixels.dims;
  const std::size_t rows = a.pixels.rows;
  for (std::size_t r = 0; r < a.bases; ++r) {
    const double* th = a.theta + r * dims;
    for (std::size_t i = 0; i < rows; ++i) {
      double u = a.tau[r];
      for (std::size_t t = 0; t < dims; ++t) u += th[t] * channel(a.pixels, t, i);
      a.out[r * rows + i] = a.scale * std::cos(u);
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", kernel_cross, kernel_cross_grad, rff_project, rff_project_grad,
                                 phi_matrix};
  return table;
}

}  // namespace gpcis::simd
