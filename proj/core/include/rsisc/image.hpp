#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "rsisc/tensor.hpp"

namespace rsisc {

/// Interleaved image with values in [0, 1]. Pixel (x, y, c) lives at
/// ((y * width) + x) * channels + c, i.e. rows top to bottom.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c = 3, double fill = 0.0)
      : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

  double& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  double at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }

  bool operator==(const Image& other) const = default;
};

// Stacks same-sized images into a [B, W, H, C] feature map.
Tensor to_feature_map(std::span<const Image> images);

// Binary P6 (and ASCII P3) with maxval up to 65535.
Image decode_ppm(std::istream& in);
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& img);

}  // namespace rsisc
