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

// Data-parallel inner loops of the GP path. Every entry point exists as a
// scalar reference implementation; the AVX2/FMA variants compute the same
// quantities four pixels at a time and are selected at runtime.
//
// Pixel inputs are column-major (one contiguous column per feature channel),
// so vector lanes always run across pixels. Each output entry is accumulated
// in a fixed order over bases/clicks, independent of the lane width.

#include <cstddef>
#include <string_view>

namespace gpcis::simd {

// Column-major block of `rows` pixels with `dims` channels; channel t starts
// at data + t * stride.
struct PixelColumns {
  const double* data = nullptr;
  std::size_t rows = 0;
  std::size_t stride = 0;
  std::size_t dims = 0;
};

// out(i, j) = eta0 * exp(-|c_i - c_j|^2 / 2) + exp(-sum_t (x_it - x_jt)^2 * inv_two_eta[t])
// where the first `deep_dims` channels are x and the next `color_dims`
// (0 or 3) are c. `points` is row-major n x (deep_dims + color_dims);
// `out` is column-major rows x n.
struct KernelCrossArgs {
  PixelColumns pixels;
  const double* points = nullptr;
  std::size_t n = 0;
  std::size_t deep_dims = 0;
  std::size_t color_dims = 0;
  const double* inv_two_eta = nullptr;
  double eta0 = 0.0;
  double* out = nullptr;
};

// Reverse pass of the cross kernel w.r.t. log eta0 and log eta_t, given the
// upstream gradient `grad_out` (column-major rows x n). Results are added.
struct KernelCrossGradArgs {
  KernelCrossArgs forward;
  const double* grad_out = nullptr;
  double* grad_log_eta0 = nullptr;
  double* grad_log_eta = nullptr;  // deep_dims entries
};

// out_i = sum_r coef_r * cos(theta_r . x_i + tau_r); theta row-major l x dims.
struct RffProjectArgs {
  PixelColumns pixels;
  const double* theta = nullptr;
  const double* tau = nullptr;
  const double* coef = nullptr;
  std::size_t bases = 0;
  double* out = nullptr;
};

// Reverse pass of RffProject given upstream grad (rows entries). Results are
// added into grad_theta (l x dims), grad_tau (l) and grad_coef (l).
struct RffProjectGradArgs {
  RffProjectArgs forward;
  const double* grad_out = nullptr;
  double* grad_theta = nullptr;
  double* grad_tau = nullptr;
  double* grad_coef = nullptr;
};

// out(i, r) = scale * cos(theta_r . x_i + tau_r), column-major rows x l.
struct PhiMatrixArgs {
  PixelColumns pixels;
  const double* theta = nullptr;
  const double* tau = nullptr;
  std::size_t bases = 0;
  double scale = 1.0;
  double* out = nullptr;
};

struct KernelTable {
  std::string_view name;
  void (*kernel_cross)(const KernelCrossArgs&);
  void (*kernel_cross_grad)(const KernelCrossGradArgs&);
  void (*rff_project)(const RffProjectArgs&);
  void (*rff_project_grad)(const RffProjectGradArgs&);
  void (*phi_matrix)(const PhiMatrixArgs&);
};

const KernelTable& scalar_table();

// nullptr when the variant was not compiled in or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

// Chosen once per process: AVX2 when available, unless GPCIS_SIMD=scalar.
const KernelTable& active_table();

// Overrides the process-wide choice ("scalar", "avx2" or "auto"); returns
// false if the requested variant is unavailable.
bool select_table(std::string_view name);

}  // namespace gpcis::simd
