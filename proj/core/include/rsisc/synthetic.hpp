#pragma once

// Seeded procedural texture datasets for desk-scale training runs.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rsisc/dataset.hpp"

namespace rsisc {

enum class TextureTask {
  a,  // blobs, checker, dots, stripes
  b,  // crosshatch, diagonal, grid, rings
};

struct SyntheticConfig {
  TextureTask task = TextureTask::a;
  std::size_t per_class = 24;
  std::size_t size = 16;
  double noise = 0.08;  // std-dev of additive Gaussian pixel noise
  std::uint64_t seed = 0;
};

std::vector<std::string> texture_class_names(TextureTask task);
TextureTask parse_texture_task(const std::string& text);

// Four classes, ids "<class>/<nnnn>.ppm". Every image draws its own frequency,
// phase, colours and noise, so the same seed always gives the same set.
Dataset make_texture_dataset(const SyntheticConfig& cfg);

}  // namespace rsisc
