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
#include <cstddef>
#include <span>
#include <vector>

#include "gpcis/image.hpp"

namespace gpcis {

// Bumped whenever the per-pixel recipe below changes; stored in checkpoints.
inline constexpr int kFeatureRecipeVersion = 1;
inline constexpr int kFeatureDim = 11;
inline constexpr int kColorDim = 3;

// Per-pixel stand-in for backbone features. Rows are pixels in row-major
// order; storage is column-major so each channel is contiguous.
//
// X columns: R, G, B, col/(W-1), row/(H-1), blur2(R,G,B), blur8(R,G,B).
// I columns: raw R, G, B.
struct FeatureMap {
  int width = 0;
  int height = 0;
  Eigen::MatrixXd X;
  Eigen::MatrixXd I;

  std::size_t m() const { return static_cast<std::size_t>(X.rows()); }
  int d() const { return static_cast<int>(X.cols()); }
};

struct FeatureRows {
  Eigen::MatrixXd X;
  Eigen::MatrixXd I;
};

FeatureMap extract_features(const Image& image);

// Separable Gaussian blur of one row-major channel: kernel truncated at
// ceil(3 sigma), renormalized to unit mass, symmetric reflect padding.
std::vector<double> gaussian_blur(std::span<const double> channel, int width, int height, double sigma);

// Normalized 1-D taps for the blur above (length 2 * radius + 1).
std::vector<double> gaussian_taps(double sigma);

// Maps an out-of-range coordinate into [0, n) with edge-duplicating reflection.
int reflect_index(int i, int n);

FeatureRows gather(const FeatureMap& fm, std::span<const std::size_t> indices);

// x-bar = [X | I] when include_color, else X alone.
Eigen::MatrixXd kernel_inputs(const Eigen::MatrixXd& X, const Eigen::MatrixXd& I, bool include_color);

// Experimental: appends a previous-probability column to X (d -> d + 1).
// Not part of the reference model.
FeatureMap with_previous_probability(const FeatureMap& fm, std::span<const double> prob);

}  // namespace gpcis
