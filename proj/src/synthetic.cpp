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

#include "gpcis/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gpcis/errors.hpp"
#include "gpcis/rng.hpp"

namespace gpcis {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Mask draw_blob(RandomStream& rng, int w, int h, double radius) {
  const double cx = rng.uniform(0.3, 0.7) * w;
  const double cy = rng.uniform(0.3, 0.7) * h;
  const double stretch = rng.uniform(0.7, 1.3);
  double amp[3], phase[3];
  for (int k = 0; k < 3; ++k) {
    amp[k] = rng.uniform(0.0, 0.18);
    phase[k] = rng.uniform(0.0, kTwoPi);
  }
  Mask m(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double dx = (c + 0.5 - cx) / stretch;
      const double dy = (r + 0.5 - cy) * stretch;
      const double angle = std::atan2(dy, dx);
      double rad = radius;
      for (int k = 0; k < 3; ++k) rad *= 1.0 + amp[k] * std::cos((k + 2) * angle + phase[k]);
      m.values[static_cast<std::size_t>(r) * w + c] = std::hypot(dx, dy) <= rad ? 1 : 0;
    }
  }
  return m;
}

Mask draw_polygon(RandomStream& rng, int w, int h, double radius) {
  const double cx = rng.uniform(0.3, 0.7) * w;
  const double cy = rng.uniform(0.3, 0.7) * h;
  const auto sides = static_cast<int>(rng.uniform_int(3, 7));
  std::vector<double> angles(static_cast<std::size_t>(sides));
  for (double& a : angles) a = rng.uniform(0.0, kTwoPi);
  std::sort(angles.begin(), angles.end());
  std::vector<double> xs, ys;
  for (double a : angles) {
    const double rad = radius * rng.uniform(0.7, 1.3);
    xs.push_back(cx + rad * std::cos(a));
    ys.push_back(cy + rad * std::sin(a));
  }
  Mask m(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double px = c + 0.5;
      const double py = r + 0.5;
      bool in = false;
      for (std::size_t i = 0, j = xs.size() - 1; i < xs.size(); j = i++) {
        if ((ys[i] > py) != (ys[j] > py) && px < (xs[j] - xs[i]) * (py - ys[i]) / (ys[j] - ys[i]) + xs[i]) in = !in;
      }
      m.values[static_cast<std::size_t>(r) * w + c] = in ? 1 : 0;
    }
  }
  return m;
}

}  // namespace

LabeledImage make_synthetic(std::uint64_t seed, std::size_t index, const SyntheticConfig& cfg) {
  if (cfg.width < 8 || cfg.height < 8) throw InvalidInput("synthetic images need at least 8x8 pixels");
  if (!(cfg.min_area > 0.0 && cfg.min_area < cfg.max_area && cfg.max_area < 1.0)) {
    throw InvalidInput("synthetic area bounds must satisfy 0 < min < max < 1");
  }
  RandomStream rng(derive_seed(seed, index), 0);
  const double total = static_cast<double>(cfg.width) * cfg.height;
  const bool polygon = rng.uniform() < 0.5;

  Mask mask;
  for (int attempt = 0;; ++attempt) {
    const double area = rng.uniform(cfg.min_area, cfg.max_area);
    const double radius = std::sqrt(area * total / std::numbers::pi);
    mask = polygon ? draw_polygon(rng, cfg.width, cfg.height, radius) : draw_blob(rng, cfg.width, cfg.height, radius);
    const double frac = static_cast<double>(mask.foreground_count()) / total;
    if (frac >= cfg.min_area && frac <= cfg.max_area) break;
    if (attempt > 200) throw InvalidInput("could not draw a shape within the area bounds");
  }

  double fg[3], bg[3];
  for (int attempt = 0;; ++attempt) {
    double dist2 = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
      fg[ch] = rng.uniform(0.05, 0.95);
      bg[ch] = rng.uniform(0.05, 0.95);
      dist2 += (fg[ch] - bg[ch]) * (fg[ch] - bg[ch]);
    }
    if (std::sqrt(dist2) >= cfg.min_color_distance) break;
    if (attempt > 1000) throw InvalidInput("could not draw separated region colors");
  }

  LabeledImage out;
  out.name = fmt::format("{:04d}.png", index);
  out.image = Image(cfg.width, cfg.height);
  for (int r = 0; r < cfg.height; ++r) {
    for (int c = 0; c < cfg.width; ++c) {
      const bool in = mask.values[static_cast<std::size_t>(r) * cfg.width + c] != 0;
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::clamp((in ? fg[ch] : bg[ch]) + cfg.noise_sd * rng.normal(), 0.0, 1.0);
        out.image.at(r, c, ch) = std::round(255.0 * v) / 255.0;
      }
    }
  }
  out.gt = std::move(mask);
  return out;
}

std::vector<LabeledImage> make_synthetic_set(std::uint64_t seed, std::size_t count, const SyntheticConfig& cfg) {
  std::vector<LabeledImage> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_synthetic(seed, i, cfg));
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<LabeledImage>& items) {
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  for (const LabeledImage& li : items) {
    write_file_bytes(dir / "images" / li.name, encode_png_rgb(li.image));
    write_file_bytes(dir / "masks" / li.name, encode_mask_png(li.gt));
  }
}

}  // namespace gpcis
