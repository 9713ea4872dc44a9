#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rsisc/autograd.hpp"
#include "rsisc/rng.hpp"

namespace rsisc {

struct InitOptions {
  double variance = 0.1;
  bool zero_bias = false;
};

// I.i.d. Gaussian with mean 0 and the given variance.
Tensor gaussian_tensor(Shape shape, double variance, Rng& rng);

struct ConvStage {
  std::size_t channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;

  bool operator==(const ConvStage&) const = default;
};

/// Stack of valid-padded conv + ReLU stages mapping [B, S, S, in_channels]
/// images to a [B, W, H, C] feature map.
struct BackboneConfig {
  std::vector<ConvStage> stages;
  std::size_t in_channels = 3;

  // 16/32/32 channels, turns a 32x32 input into a 4x4x32 map.
  static BackboneConfig desk();
  // 16/32/32 channels, turns a 14x14 input into a 3x3x32 map.
  static BackboneConfig compact();

  std::size_t feature_channels() const;
  // Spatial extent after all stages; throws if the map would shrink below 2.
  std::size_t output_extent(std::size_t input) const;

  bool operator==(const BackboneConfig&) const = default;
};

std::string stages_to_string(const std::vector<ConvStage>& stages);
std::vector<ConvStage> parse_stages(const std::string& text);

void init_backbone(ModelParams& params, const BackboneConfig& cfg, Rng& rng, const InitOptions& init = {});

Var backbone_forward(Tape& tape, const Var& images, ModelParams& params, const BackboneConfig& cfg);

}  // namespace rsisc
