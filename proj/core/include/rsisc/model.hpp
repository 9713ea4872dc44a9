#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "rsisc/attention.hpp"
#include "rsisc/backbone.hpp"
#include "rsisc/head.hpp"
#include "rsisc/image.hpp"

namespace rsisc {

struct Checkpoint;

enum class PoolKind { attention, average, max };
enum class Strategy { direct, transfer };

std::string to_string(PoolKind kind);
std::string to_string(PoolMode mode);
std::string to_string(Strategy strategy);
std::string to_string(ConcatAxis axis);
PoolKind parse_pool_kind(const std::string& text);
PoolMode parse_pool_mode(const std::string& text);
Strategy parse_strategy(const std::string& text);
ConcatAxis parse_concat_axis(const std::string& text);

/// Backbone -> pooling (attention or global) -> MLP head.
struct ModelConfig {
  std::size_t input_size = 14;  // square side of the images fed to the backbone
  BackboneConfig backbone = BackboneConfig::compact();
  PoolKind pool = PoolKind::attention;
  AttentionConfig attention = AttentionConfig::desk();
  HeadConfig head = HeadConfig::desk(4);

  // Width of the pooled feature vector the head consumes.
  std::size_t feature_width() const;
  // Rows of the probability matrix per input image (2 with batch concat).
  std::size_t rows_per_image() const;
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Direct: every parameter drawn i.i.d. N(0, init.variance). Transfer: the
/// backbone.* tensors are copied from `source`, everything else is drawn as
/// in direct.
ModelParams init_params(const ModelConfig& cfg, Strategy strategy, const Checkpoint* source, Rng& rng,
                        const InitOptions& init = {});

// Throws ShapeError naming the first tensor whose shape differs, or that is
// missing from `actual`.
void check_param_shapes(const ModelParams& expected, const ModelParams& actual, const std::string& prefix = "");

// images: [B, S, S, 3] -> probabilities [B * rows_per_image(), classes].
Var model_forward(Tape& tape, const Var& images, ModelParams& params, const ModelConfig& cfg, bool training,
                  Rng* dropout_rng);

// Inference probabilities per image [B, classes]; with batch-axis concat the
// two rows of an image are averaged.
Tensor predict_probs(std::span<const Image> images, ModelParams& params, const ModelConfig& cfg);

}  // namespace rsisc
