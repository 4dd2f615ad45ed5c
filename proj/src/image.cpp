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

#include "gpcis/image.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "gpcis/errors.hpp"

namespace gpcis {
namespace {

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw InvalidInput(std::string("PNG decode failed: ") + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  if (png.width == 0 || png.height == 0) {
    png_image_free(&png);
    throw InvalidInput("PNG has zero size");
  }
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(png));
  // Alpha is dropped; RGBA sources are composited onto black by libpng.
  if (!png_image_finish_read(&png, nullptr, raw.data(), 0, nullptr)) {
    throw InvalidInput(std::string("PNG decode failed: ") + png.message);
  }
  Image image(static_cast<int>(png.width), static_cast<int>(png.height));
  std::transform(raw.begin(), raw.end(), image.rgb.begin(), [](std::uint8_t v) { return v / 255.0; });
  return image;
}

// Skips whitespace and '#' comments in a PPM header.
std::size_t ppm_skip(std::span<const std::uint8_t> b, std::size_t i) {
  while (i < b.size()) {
    if (b[i] == '#') {
      while (i < b.size() && b[i] != '\n') ++i;
    } else if (std::isspace(b[i])) {
      ++i;
    } else {
      break;
    }
  }
  return i;
}

long ppm_int(std::span<const std::uint8_t> b, std::size_t& i) {
  i = ppm_skip(b, i);
  long v = 0;
  std::size_t start = i;
  while (i < b.size() && b[i] >= '0' && b[i] <= '9') v = v * 10 + (b[i++] - '0');
  if (i == start) throw InvalidInput("malformed PPM header");
  return v;
}

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t i = 2;
  const long w = ppm_int(bytes, i);
  const long h = ppm_int(bytes, i);
  const long maxval = ppm_int(bytes, i);
  if (w <= 0 || h <= 0) throw InvalidInput("PPM has zero size");
  if (maxval != 255) throw InvalidInput("only 8-bit PPM (maxval 255) is supported");
  ++i;  // single whitespace byte before the raster
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() < i + need) throw InvalidInput("truncated PPM raster");
  Image image(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t k = 0; k < need; ++k) image.rgb[k] = bytes[i + k] / 255.0;
  return image;
}

std::vector<std::uint8_t> encode_png(int width, int height, std::uint32_t format, int channels,
                                     std::span<const std::uint8_t> raw) {
  if (width <= 0 || height <= 0) throw InvalidInput("cannot encode an empty image");
  if (raw.size() != static_cast<std::size_t>(width) * height * channels) {
    throw InvalidInput("raster size does not match image dimensions");
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(width);
  png.height = static_cast<png_uint_32>(height);
  png.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, raw.data(), 0, nullptr)) {
    throw InvalidInput(std::string("PNG encode failed: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, raw.data(), 0, nullptr)) {
    throw InvalidInput(std::string("PNG encode failed: ") + png.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

Image::Image(int w, int h) : width(w), height(h), rgb(3 * static_cast<std::size_t>(w) * h, 0.0) {}

Mask::Mask(int w, int h, std::uint8_t fill) : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

std::size_t Mask::foreground_count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](auto v) { return v != 0; }));
}

void validate_image(const Image& image) {
  if (image.width < 1 || image.height < 1) throw InvalidInput("image must be at least 1x1");
  if (image.rgb.size() != 3 * image.pixel_count()) throw InvalidInput("image raster size mismatch");
  for (double v : image.rgb) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("image channel outside [0, 1]");
  }
}

Image decode_image(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() >= 8 && std::equal(kPngMagic, kPngMagic + 8, bytes.begin())) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  throw InvalidInput("unrecognized image format (expected PNG or binary PPM)");
}

Image read_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_image(bytes);
}

Mask decode_mask(std::span<const std::uint8_t> bytes) {
  const Image image = decode_image(bytes);
  Mask mask(image.width, image.height);
  for (std::size_t i = 0; i < mask.values.size(); ++i) mask.values[i] = image.rgb[3 * i] > 0.5 ? 1 : 0;
  return mask;
}

Mask read_mask(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_mask(bytes);
}

std::vector<std::uint8_t> encode_png_gray(int width, int height, std::span<const std::uint8_t> gray) {
  return encode_png(width, height, PNG_FORMAT_GRAY, 1, gray);
}

std::vector<std::uint8_t> encode_png_rgb(const Image& image) {
  std::vector<std::uint8_t> raw(image.rgb.size());
  std::transform(image.rgb.begin(), image.rgb.end(), raw.begin(),
                 [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); });
  return encode_png(image.width, image.height, PNG_FORMAT_RGB, 3, raw);
}

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (double v : image.rgb) out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  return out;
}

std::vector<std::uint8_t> encode_mask_png(const Mask& mask) {
  std::vector<std::uint8_t> raw(mask.values.size());
  std::transform(mask.values.begin(), mask.values.end(), raw.begin(), [](auto v) { return v ? 255 : 0; });
  return encode_png_gray(mask.width, mask.height, raw);
}

std::vector<std::uint8_t> encode_probability_png(int width, int height, std::span<const double> prob) {
  std::vector<std::uint8_t> raw(prob.size());
  std::transform(prob.begin(), prob.end(), raw.begin(),
                 [](double p) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(p, 0.0, 1.0))); });
  return encode_png_gray(width, height, raw);
}

void write_float_dump(const std::filesystem::path& path, std::span<const double> values, std::size_t rows,
                      std::size_t cols) {
  if (values.size() != rows * cols) throw InvalidInput("float dump shape mismatch");
  std::vector<std::uint8_t> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  write_file_bytes(path, bytes);
  const nlohmann::json sidecar = {{"m", rows}, {"d", cols}, {"order", "row-major"}};
  const std::string text = sidecar.dump();
  auto sidecar_path = path;
  sidecar_path += ".json";
  write_file_bytes(sidecar_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidInput("write failed for " + path.string());
}

}  // namespace gpcis
