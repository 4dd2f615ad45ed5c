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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gpcis {

// Row-major RGB image with channels in [0, 1]. Pixel index = row * width + col.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;  // size 3 * width * height, interleaved

  Image() = default;
  Image(int w, int h);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  double& at(int row, int col, int channel) { return rgb[3 * (static_cast<std::size_t>(row) * width + col) + channel]; }
  double at(int row, int col, int channel) const {
    return rgb[3 * (static_cast<std::size_t>(row) * width + col) + channel];
  }
};

// Binary per-pixel mask (1 = foreground), same layout as Image.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;

  Mask() = default;
  Mask(int w, int h, std::uint8_t fill = 0);

  std::size_t pixel_count() const { return values.size(); }
  std::size_t foreground_count() const;
  bool operator==(const Mask&) const = default;
};

// Throws InvalidInput when the image is empty or a channel leaves [0, 1].
// An image with its ground-truth mask.
struct LabeledImage {
  std::string name;
  Image image;
  Mask gt;
};

void validate_image(const Image& image);

// PNG (8-bit gray/RGB/RGBA, alpha dropped) or binary PPM (P6), sniffed by magic.
Image decode_image(std::span<const std::uint8_t> bytes);
Image read_image(const std::filesystem::path& path);

// Any decodable image; a pixel is foreground when its first channel > 0.5.
Mask decode_mask(std::span<const std::uint8_t> bytes);
Mask read_mask(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png_gray(int width, int height, std::span<const std::uint8_t> gray);
std::vector<std::uint8_t> encode_png_rgb(const Image& image);
std::vector<std::uint8_t> encode_ppm(const Image& image);
std::vector<std::uint8_t> encode_mask_png(const Mask& mask);

// Probability map -> 8-bit gray PNG, value = round(255 * p).
std::vector<std::uint8_t> encode_probability_png(int width, int height, std::span<const double> prob);

// Little-endian float32 flat file plus "<path>.json" sidecar {m, d, order}.
void write_float_dump(const std::filesystem::path& path, std::span<const double> values, std::size_t rows,
                      std::size_t cols);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace gpcis
