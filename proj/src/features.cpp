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

#include "gpcis/features.hpp"

#include <cmath>

#include "gpcis/errors.hpp"

namespace gpcis {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  int k = i % period;
  if (k < 0) k += period;
  return k < n ? k : period - 1 - k;
}

std::vector<double> gaussian_taps(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    total += taps[k + radius];
  }
  for (double& t : taps) t /= total;
  return taps;
}

std::vector<double> gaussian_blur(std::span<const double> channel, int width, int height, double sigma) {
  if (channel.size() != static_cast<std::size_t>(width) * height) throw InvalidInput("blur: size mismatch");
  const auto taps = gaussian_taps(sigma);
  const int radius = static_cast<int>(taps.size() / 2);
  std::vector<double> horiz(channel.size());
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      // Offsets from the center sample, so a flat neighborhood comes back unchanged.
      const double center = channel[r * width + c];
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += taps[k + radius] * (channel[r * width + reflect_index(c + k, width)] - center);
      }
      horiz[r * width + c] = center + acc;
    }
  }
  std::vector<double> out(channel.size());
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double center = horiz[r * width + c];
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * (horiz[reflect_index(r + k, height) * width + c] - center);
      out[r * width + c] = center + acc;
    }
  }
  return out;
}

FeatureMap extract_features(const Image& image) {
  validate_image(image);
  const int w = image.width;
  const int h = image.height;
  const std::size_t m = image.pixel_count();

  FeatureMap fm;
  fm.width = w;
  fm.height = h;
  fm.X.resize(static_cast<Eigen::Index>(m), kFeatureDim);
  fm.I.resize(static_cast<Eigen::Index>(m), kColorDim);

  std::vector<double> plane(m);
  for (int ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < m; ++i) plane[i] = image.rgb[3 * i + ch];
    const auto blur2 = gaussian_blur(plane, w, h, 2.0);
    const auto blur8 = gaussian_blur(plane, w, h, 8.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      fm.X(row, ch) = plane[i];
      fm.I(row, ch) = plane[i];
      fm.X(row, 5 + ch) = blur2[i];
      fm.X(row, 8 + ch) = blur8[i];
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Eigen::Index row = static_cast<Eigen::Index>(r) * w + c;
      fm.X(row, 3) = w > 1 ? static_cast<double>(c) / (w - 1) : 0.0;
      fm.X(row, 4) = h > 1 ? static_cast<double>(r) / (h - 1) : 0.0;
    }
  }
  return fm;
}

FeatureRows gather(const FeatureMap& fm, std::span<const std::size_t> indices) {
  FeatureRows rows;
  rows.X.resize(static_cast<Eigen::Index>(indices.size()), fm.X.cols());
  rows.I.resize(static_cast<Eigen::Index>(indices.size()), fm.I.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= fm.m()) throw InvalidInput("gather: pixel index out of range");
    const auto src = static_cast<Eigen::Index>(indices[k]);
    rows.X.row(static_cast<Eigen::Index>(k)) = fm.X.row(src);
    rows.I.row(static_cast<Eigen::Index>(k)) = fm.I.row(src);
  }
  return rows;
}

Eigen::MatrixXd kernel_inputs(const Eigen::MatrixXd& X, const Eigen::MatrixXd& I, bool include_color) {
  if (!include_color) return X;
  if (X.rows() != I.rows()) throw InvalidInput("kernel_inputs: row count mismatch");
  Eigen::MatrixXd out(X.rows(), X.cols() + I.cols());
  out << X, I;
  return out;
}

FeatureMap with_previous_probability(const FeatureMap& fm, std::span<const double> prob) {
  if (prob.size() != fm.m()) throw InvalidInput("previous probability map size mismatch");
  FeatureMap out = fm;
  out.X.conservativeResize(Eigen::NoChange, fm.X.cols() + 1);
  for (std::size_t i = 0; i < prob.size(); ++i) out.X(static_cast<Eigen::Index>(i), fm.X.cols()) = prob[i];
  return out;
}

}  // namespace gpcis
