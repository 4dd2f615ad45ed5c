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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gpcis/training.hpp"

namespace gpcis {

// Two-region test images: one foreground shape (smooth blob or star-shaped
// polygon) over a flat background, each region a single color plus
// per-pixel Gaussian noise, quantized to 8 bits.
struct SyntheticConfig {
  int width = 64;
  int height = 64;
  double noise_sd = 0.04;
  double min_area = 0.05;  // fraction of the image
  double max_area = 0.40;
  double min_color_distance = 0.35;
};

LabeledImage make_synthetic(std::uint64_t seed, std::size_t index, const SyntheticConfig& cfg = {});

std::vector<LabeledImage> make_synthetic_set(std::uint64_t seed, std::size_t count, const SyntheticConfig& cfg = {});

// Writes DIR/images/<name> and DIR/masks/<name> as PNG.
void write_dataset(const std::filesystem::path& dir, const std::vector<LabeledImage>& items);

}  // namespace gpcis
