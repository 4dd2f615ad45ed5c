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

#include <immintrin.h>

#include <array>
#include <cmath>
#include <vector>

#include "avx2_math.hpp"
#include "gpcis/simd/kernels.hpp"

namespace gpcis::simd {
namespace {

constexpr std::size_t kLanes = 4;
// Channels kept in registers per pixel block; wider inputs use the scalar path.
constexpr std::size_t kMaxDims = 24;

inline double channel(const PixelColumns& p, std::size_t t, std::size_t i) { return p.data[t * p.stride + i]; }

struct Lane4 {
  __m256d v = _mm256_setzero_pd();
};

struct PixelBlock {
  __m256d x[kMaxDims];
};

inline void load_block(const PixelColumns& p, std::size_t i, PixelBlock& b) {
  for (std::size_t t = 0; t < p.dims; ++t) b.x[t] = _mm256_loadu_pd(p.data + t * p.stride + i);
}

inline __m256d project(const PixelBlock& b, const double* theta_row, double tau, std::size_t dims) {
  __m256d u = _mm256_set1_pd(tau);
  for (std::size_t t = 0; t < dims; ++t) u = _mm256_fmadd_pd(_mm256_set1_pd(theta_row[t]), b.x[t], u);
  return u;
}

inline __m256d cos_checked(__m256d u) {
  if (avx2::trig_out_of_range(u)) [[unlikely]] {
    alignas(32) double lanes[kLanes];
    _mm256_store_pd(lanes, u);
    for (double& v : lanes) v = std::cos(v);
    return _mm256_load_pd(lanes);
  }
  return avx2::cos_pd(u);
}

inline void sincos_checked(__m256d u, __m256d* s, __m256d* c) {
  if (avx2::trig_out_of_range(u)) [[unlikely]] {
    alignas(32) double lanes[kLanes], sl[kLanes], cl[kLanes];
    _mm256_store_pd(lanes, u);
    for (std::size_t k = 0; k < kLanes; ++k) {
      sl[k] = std::sin(lanes[k]);
      cl[k] = std::cos(lanes[k]);
    }
    *s = _mm256_load_pd(sl);
    *c = _mm256_load_pd(cl);
    return;
  }
  avx2::sincos_pd(u, s, c);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

// Scalar tails reuse the reference table so both paths agree on edge pixels.
PixelColumns tail_of(const PixelColumns& p, std::size_t start) {
  return {p.data + start, p.rows - start, p.stride, p.dims};
}

void kernel_cross(const KernelCrossArgs& a) {
  const std::size_t dims = a.deep_dims + a.color_dims;
  if (dims > kMaxDims) return scalar_table().kernel_cross(a);
  const std::size_t m = a.pixels.rows;
  const std::size_t body = m - m % kLanes;
  PixelColumns cols = a.pixels;
  cols.dims = dims;
  const __m256d eta0 = _mm256_set1_pd(a.eta0);
  const __m256d neg_half = _mm256_set1_pd(-0.5);
  PixelBlock b;
  for (std::size_t i = 0; i < body; i += kLanes) {
    load_block(cols, i, b);
    for (std::size_t j = 0; j < a.n; ++j) {
      const double* pt = a.points + j * dims;
      __m256d deep = _mm256_setzero_pd();
      for (std::size_t t = 0; t < a.deep_dims; ++t) {
        const __m256d diff = _mm256_sub_pd(b.x[t], _mm256_set1_pd(pt[t]));
        deep = _mm256_fmadd_pd(_mm256_mul_pd(diff, diff), _mm256_set1_pd(a.inv_two_eta[t]), deep);
      }
      __m256d value = avx2::exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), deep));
      if (a.color_dims > 0) {
        __m256d color = _mm256_setzero_pd();
        for (std::size_t t = a.deep_dims; t < dims; ++t) {
          const __m256d diff = _mm256_sub_pd(b.x[t], _mm256_set1_pd(pt[t]));
          color = _mm256_fmadd_pd(diff, diff, color);
        }
        value = _mm256_fmadd_pd(eta0, avx2::exp_pd(_mm256_mul_pd(neg_half, color)), value);
      }
      _mm256_storeu_pd(a.out + j * m + i, value);
    }
  }
  if (body < m) {
    // Tail rows go through the reference path one click column at a time.
    for (std::size_t j = 0; j < a.n; ++j) {
      KernelCrossArgs tail = a;
      tail.pixels = tail_of(a.pixels, body);
      tail.points = a.points + j * dims;
      tail.n = 1;
      tail.out = a.out + j * m + body;
      scalar_table().kernel_cross(tail);
    }
  }
}

void rff_project(const RffProjectArgs& a) {
  const std::size_t dims = a.pixels.dims;
  if (dims > kMaxDims) return scalar_table().rff_project(a);
  const std::size_t m = a.pixels.rows;
  const std::size_t body = m - m % kLanes;
  PixelBlock b;
  for (std::size_t i = 0; i < body; i += kLanes) {
    load_block(a.pixels, i, b);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t r = 0; r < a.bases; ++r) {
      const __m256d u = project(b, a.theta + r * dims, a.tau[r], dims);
      acc = _mm256_fmadd_pd(_mm256_set1_pd(a.coef[r]), cos_checked(u), acc);
    }
    _mm256_storeu_pd(a.out + i, acc);
  }
  if (body < m) {
    RffProjectArgs tail = a;
    tail.pixels = tail_of(a.pixels, body);
    tail.out = a.out + body;
    scalar_table().rff_project(tail);
  }
}

void rff_project_grad(const RffProjectGradArgs& g) {
  const RffProjectArgs& a = g.forward;
  const std::size_t dims = a.pixels.dims;
  if (dims > kMaxDims) return scalar_table().rff_project_grad(g);
  const std::size_t m = a.pixels.rows;
  const std::size_t body = m - m % kLanes;
  const std::size_t l = a.bases;

  // Lane-wise partial sums, reduced once at the end.
  std::vector<Lane4> acc_theta(l * dims);
  std::vector<Lane4> acc_tau(l);
  std::vector<Lane4> acc_coef(l);
  PixelBlock b;
  for (std::size_t i = 0; i < body; i += kLanes) {
    load_block(a.pixels, i, b);
    const __m256d up = _mm256_loadu_pd(g.grad_out + i);
    for (std::size_t r = 0; r < l; ++r) {
      const __m256d u = project(b, a.theta + r * dims, a.tau[r], dims);
      __m256d s, c;
      sincos_checked(u, &s, &c);
      acc_coef[r].v = _mm256_fmadd_pd(up, c, acc_coef[r].v);
      const __m256d du = _mm256_mul_pd(_mm256_mul_pd(up, _mm256_set1_pd(-a.coef[r])), s);
      acc_tau[r].v = _mm256_add_pd(acc_tau[r].v, du);
      Lane4* row = acc_theta.data() + r * dims;
      for (std::size_t t = 0; t < dims; ++t) row[t].v = _mm256_fmadd_pd(du, b.x[t], row[t].v);
    }
  }
  for (std::size_t r = 0; r < l; ++r) {
    g.grad_tau[r] += hsum(acc_tau[r].v);
    g.grad_coef[r] += hsum(acc_coef[r].v);
    for (std::size_t t = 0; t < dims; ++t) g.grad_theta[r * dims + t] += hsum(acc_theta[r * dims + t].v);
  }
  if (body < m) {
    RffProjectGradArgs tail = g;
    tail.forward.pixels = tail_of(a.pixels, body);
    tail.grad_out = g.grad_out + body;
    scalar_table().rff_project_grad(tail);
  }
}

void phi_matrix(const PhiMatrixArgs& a) {
  const std::size_t dims = a.pixels.dims;
  if (dims > kMaxDims) return scalar_table().phi_matrix(a);
  const std::size_t rows = a.pixels.rows;
  const std::size_t body = rows - rows % kLanes;
  const __m256d scale = _mm256_set1_pd(a.scale);
  PixelBlock b;
  for (std::size_t i = 0; i < body; i += kLanes) {
    load_block(a.pixels, i, b);
    for (std::size_t r = 0; r < a.bases; ++r) {
      const __m256d u = project(b, a.theta + r * dims, a.tau[r], dims);
      _mm256_storeu_pd(a.out + r * rows + i, _mm256_mul_pd(scale, cos_checked(u)));
    }
  }
  for (std::size_t i = body; i < rows; ++i) {
    for (std::size_t r = 0; r < a.bases; ++r) {
      const double* th = a.theta + r * dims;
      double u = a.tau[r];
      for (std::size_t t = 0; t < dims; ++t) u += th[t] * channel(a.pixels, t, i);
      a.out[r * rows + i] = a.scale * std::cos(u);
    }
  }
}

}  // namespace

const KernelTable& avx2_table_impl() {
  static const KernelTable table{"avx2", kernel_cross, scalar_table().kernel_cross_grad, rff_project,
                                 rff_project_grad, phi_matrix};
  return table;
}

}  // namespace gpcis::simd
