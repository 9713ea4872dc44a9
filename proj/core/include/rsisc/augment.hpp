#pragma once

// Off-line rotation expansion and the on-line crop / erase / mixup chain
// applied to every training batch.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rsisc/dataset.hpp"
#include "rsisc/image.hpp"
#include "rsisc/rng.hpp"
#include "rsisc/tensor.hpp"

namespace rsisc {

// Clockwise rotation by 90, 180 or 270 degrees.
Image rotate(const Image& img, int angle);

// Every image followed by its 90/180/270 rotations, same label.
Dataset expand_rotations(const Dataset& data);

Image crop(const Image& img, std::size_t reduction, std::size_t offset_x, std::size_t offset_y);
Image center_crop(const Image& img, std::size_t reduction);
// (W - r) x (H - r) window at an offset drawn uniformly from [0, r]^2.
Image random_crop(const Image& img, std::size_t reduction, Rng& rng);
std::vector<Image> random_crop(std::span<const Image> batch, std::size_t reduction, Rng& rng);

Image erase(const Image& img, std::size_t size, std::size_t offset_x, std::size_t offset_y, double fill = 0.0);
Image random_erase(const Image& img, std::size_t size, double fill, Rng& rng);

struct MixupConfig {
  double uniform_low = 0.0;
  double uniform_high = 1.0;
  double beta_alpha = 0.2;
  double beta_beta = 0.2;
  std::uint64_t pairing_seed = 0;

  void validate() const;
};

struct LabeledBatch {
  std::vector<Image> images;
  Tensor labels;  // [B, C], rows are distributions

  std::size_t size() const { return images.size(); }
};

LabeledBatch make_batch(const Dataset& data, std::span<const std::size_t> indices);

Image mix_images(const Image& a, const Image& b, double ratio);

// Example i becomes ratio[i] * example i + (1 - ratio[i]) * example partner[i],
// images and label rows alike.
LabeledBatch mix_batch(const LabeledBatch& batch, std::span<const std::size_t> partner, std::span<const double> ratios);

double sample_beta(double alpha, double beta, Rng& rng);

// [originals] ++ [uniform-ratio mixes] ++ [beta-ratio mixes]. Each mix pairs
// image i with image perm(i) of an independent random permutation.
LabeledBatch mixup_expand(const LabeledBatch& batch, const MixupConfig& cfg, Rng& rng);

}  // namespace rsisc
