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

// Property suites shared by the acceptance binary and `gpcis selftest`.
// Each returns a verdict plus a one-line measurement summary; sizes are
// parameters so the self-test can run reduced versions.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gpcis/model.hpp"

namespace gpcis::verify {

struct Result {
  bool pass = false;
  std::string detail;
};

struct InterpolationOptions {
  int fixtures = 50;
  int max_clicks = 20;
  int size = 64;
  std::uint64_t seed = 20260101;
  double min_agreement = 0.99;
};
Result interpolation_sweep(const InterpolationOptions& o);

struct FidelityOptions {
  int pixels = 50;
  int clicks = 5;
  int bases = 4096;
  int samples = 20000;
  double sigma2 = 0.01;
  double eps2 = 1e-6;
  std::uint64_t seed = 20260102;
  double mean_tol = 5e-2;
  double cov_tol = 1e-1;
};
Result sampler_fidelity(const FidelityOptions& o);

struct RffOptions {
  int bases = 4096;
  int pairs = 100;
  int dims = 14;
  std::uint64_t seed = 20260103;
  double tol = 0.05;
};
Result rff_approximation(const RffOptions& o);

struct GradientOptions {
  int fixtures = 10;
  int size = 10;  // size x size pixels
  int clicks = 4;
  int hidden = 96;
  int bases = 128;
  std::uint64_t seed = 20260104;
  double rel_tol = 1e-4;
  double min_grad = 1e-6;
  double step = 1e-4;
  // Negative control: evaluate the finite differences at a point where one
  // head weight has been moved, so the comparison must fail.
  bool inject_fault = false;
};
Result gradient_check(const GradientOptions& o);

struct ComplexityOptions {
  // width x height of each benchmark image
  std::vector<std::pair<int, int>> sizes{{100, 100}, {200, 200}, {400, 400}};
  int clicks = 10;
  int bases = 128;
  int repeat = 5;
  std::uint64_t seed = 20260105;
  double min_exponent = 0.8;
  double max_exponent = 1.3;
};
struct ComplexityResult {
  Result verdict;
  std::vector<double> pixels;
  std::vector<double> seconds;
  double exponent = 0.0;
};
ComplexityResult complexity(const ComplexityOptions& o, const ModelCheckpoint* model = nullptr);

// Least-squares slope of log(y) against log(x).
double fit_exponent(const std::vector<double>& x, const std::vector<double>& y);

struct ExactOptions {
  int instances = 20;
  std::uint64_t seed = 20260107;
  double rel_tol = 1e-8;
};
Result exact_posterior_oracle(const ExactOptions& o);

struct EndToEndOptions {
  int train_images = 200;
  int test_images = 50;
  int epochs = 60;
  std::uint64_t data_seed = 20260108;
  std::uint64_t test_seed = 20260109;
  std::uint64_t train_seed = 7;
  double max_noc90 = 5.0;
  int max_nof = 0;
};
struct EndToEndResult {
  Result verdict;
  ModelCheckpoint model;
};
EndToEndResult end_to_end(const EndToEndOptions& o);

struct DeterminismOptions {
  int images = 10;
  std::uint64_t data_seed = 20260110;
  std::uint64_t seed = 99;
};
Result protocol_determinism(const DeterminismOptions& o, const ModelCheckpoint* model = nullptr);

struct DistanceOptions {
  int cases = 40;
  std::uint64_t seed = 20260111;
};
// Distance transform and next-click selection against brute force.
Result distance_transform(const DistanceOptions& o);

struct KernelOracleOptions {
  int cases = 200;
  std::uint64_t seed = 20260112;
  double rel_tol = 1e-12;
};
Result kernel_oracle(const KernelOracleOptions& o);

}  // namespace gpcis::verify
