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

#include <Eigen/Core>
#include <cmath>

#include "gpcis/rng.hpp"
#include "gpcis/simd/kernels.hpp"

using namespace gpcis;
using namespace gpcis::simd;

namespace {

struct Fixture {
  std::size_t rows, stride, deep, color, n, bases;
  std::vector<double> pixels, points, inv_two_eta, theta, tau, coef, grad_out;
  double eta0;

  Fixture(std::size_t rows_, std::size_t deep_, std::size_t color_, std::size_t n_, std::size_t bases_,
          std::uint64_t seed, double theta_scale = 1.0)
      : rows(rows_), stride(rows_ + 3), deep(deep_), color(color_), n(n_), bases(bases_) {
    RandomStream r(seed);
    const std::size_t dims = deep + color;
    pixels.resize(stride * dims);
    for (double& v : pixels) v = r.uniform(-1.0, 1.0);
    points.resize(n * dims);
    for (double& v : points) v = r.uniform(-1.0, 1.0);
    inv_two_eta.resize(deep);
    for (double& v : inv_two_eta) v = 0.5 * std::exp(r.normal());
    theta.resize(bases * dims);
    for (double& v : theta) v = theta_scale * r.normal();
    tau.resize(bases);
    for (double& v : tau) v = r.uniform(0.0, 6.283185307179586);
    coef.resize(bases);
    for (double& v : coef) v = r.normal();
    grad_out.resize(std::max(rows * n, rows));
    for (double& v : grad_out) v = r.normal();
    grad_out[1] = 0.0;
    eta0 = std::exp(r.normal());
  }

  PixelColumns columns() const { return {pixels.data(), rows, stride, deep + color}; }
};

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

double max_abs(const std::vector<double>& a) {
  double d = 0.0;
  for (double v : a) d = std::max(d, std::abs(v));
  return d;
}

// Phase arguments are summed in a different order (FMA), so with huge
// frequencies the comparison is limited by the rounding of the argument.
void compare(const KernelTable& s, const KernelTable& v, const Fixture& f, double scale = 1.0) {
  const double tol = 1e-13 * scale;
  {
    std::vector<double> out_s(f.rows * f.n), out_v(f.rows * f.n);
    KernelCrossArgs a{f.columns(), f.points.data(), f.n, f.deep, f.color, f.inv_two_eta.data(), f.eta0, out_s.data()};
    s.kernel_cross(a);
    a.out = out_v.data();
    v.kernel_cross(a);
    CHECK(max_abs_diff(out_s, out_v) <= tol * (1.0 + max_abs(out_s)));

    std::vector<double> ge_s(f.deep, 0.0), ge_v(f.deep, 0.0);
    double g0_s = 0.0, g0_v = 0.0;
    KernelCrossGradArgs g{a, f.grad_out.data(), &g0_s, ge_s.data()};
    s.kernel_cross_grad(g);
    g.grad_log_eta0 = &g0_v;
    g.grad_log_eta = ge_v.data();
    v.kernel_cross_grad(g);
    CHECK(std::abs(g0_s - g0_v) <= tol * 10.0 * (1.0 + std::abs(g0_s)));
    CHECK(max_abs_diff(ge_s, ge_v) <= tol * 10.0 * (1.0 + max_abs(ge_s)));
  }
  {
    std::vector<double> out_s(f.rows), out_v(f.rows);
    RffProjectArgs a{f.columns(), f.theta.data(), f.tau.data(), f.coef.data(), f.bases, out_s.data()};
    s.rff_project(a);
    a.out = out_v.data();
    v.rff_project(a);
    CHECK(max_abs_diff(out_s, out_v) <= tol * 10.0 * (1.0 + max_abs(out_s)));

    const std::size_t dims = f.deep + f.color;
    std::vector<double> gth_s(f.bases * dims, 0.0), gth_v = gth_s, gt_s(f.bases, 0.0), gt_v = gt_s, gc_s = gt_s,
                                                    gc_v = gt_s;
    RffProjectGradArgs g{a, f.grad_out.data(), gth_s.data(), gt_s.data(), gc_s.data()};
    s.rff_project_grad(g);
    g.grad_theta = gth_v.data();
    g.grad_tau = gt_v.data();
    g.grad_coef = gc_v.data();
    v.rff_project_grad(g);
    CHECK(max_abs_diff(gth_s, gth_v) <= tol * 10.0 * (1.0 + max_abs(gth_s)));
    CHECK(max_abs_diff(gt_s, gt_v) <= tol * 10.0 * (1.0 + max_abs(gt_s)));
    CHECK(max_abs_diff(gc_s, gc_v) <= tol * 10.0 * (1.0 + max_abs(gc_s)));
  }
  {
    std::vector<double> out_s(f.rows * f.bases), out_v(f.rows * f.bases);
    PhiMatrixArgs a{f.columns(), f.theta.data(), f.tau.data(), f.bases, 0.125, out_s.data()};
    s.phi_matrix(a);
    a.out = out_v.data();
    v.phi_matrix(a);
    CHECK(max_abs_diff(out_s, out_v) <= tol);
  }
}

}  // namespace

TEST_CASE("scalar table is always available") {
  CHECK(scalar_table().name == "scalar");
  CHECK(select_table("scalar"));
  CHECK(active_table().name == "scalar");
  CHECK_FALSE(select_table("sse9"));
  CHECK(active_table().name == "scalar");
  CHECK(select_table("auto"));
}

TEST_CASE("avx2 matches scalar") {
  const KernelTable* v = avx2_table();
  if (v == nullptr) {
    MESSAGE("AVX2 not available on this CPU or build; equivalence test skipped");
    return;
  }
  const KernelTable& s = scalar_table();
  // Row counts around the lane width, with and without the color term.
  for (std::size_t rows : {1u, 3u, 4u, 5u, 8u, 13u, 64u, 101u}) {
    SUBCASE(("rows " + std::to_string(rows)).c_str()) {
      compare(s, *v, Fixture(rows, 11, 3, 4, 9, rows));
      compare(s, *v, Fixture(rows, 11, 0, 3, 5, rows + 100));
      compare(s, *v, Fixture(rows, 1, 3, 1, 1, rows + 200));
    }
  }
  SUBCASE("large phase arguments") { compare(s, *v, Fixture(37, 11, 3, 2, 16, 77, 5e4), 1e5); }
}
