#pragma once

#include <cstddef>

#include "rsisc/autograd.hpp"
#include "rsisc/backbone.hpp"
#include "rsisc/rng.hpp"

namespace rsisc {

/// FC(hidden) - ReLU - Dropout - FC(classes) - Softmax.
struct HeadConfig {
  std::size_t hidden_width = 4096;
  double dropout_rate = 0.2;
  std::size_t num_classes = 45;

  static HeadConfig desk(std::size_t classes) { return {128, 0.2, classes}; }
  void validate() const;
  bool operator==(const HeadConfig&) const = default;
};

struct LossConfig {
  double lambda = 1e-4;
  double epsilon = 1e-12;

  void validate() const;
};

// head.fc1.{kernel [F, hidden], bias}, head.fc2.{kernel [hidden, C], bias}
void init_head(ModelParams& params, std::size_t in_features, const HeadConfig& cfg, Rng& rng,
               const InitOptions& init = {});

// Inverted dropout: kept units are scaled by 1/(1-rate) during training, so
// inference is the identity. `rng` is only read when training.
Var mlp_forward(Tape& tape, const Var& features, ModelParams& params, const HeadConfig& cfg, bool training, Rng* rng);

// Keep-mask scaled by 1/(1-rate), drawn from rng.
Tensor dropout_mask(const Shape& shape, double rate, Rng& rng);

/// Summed KL divergence over the batch plus (lambda/2) * ||theta||^2 over
/// every parameter in `params`. Rows of both probs and targets must be
/// distributions (tolerance 1e-6).
Var kl_loss(Tape& tape, const Var& probs, const Tensor& targets, ModelParams& params, const LossConfig& cfg);

// Same value without a tape.
double kl_loss_value(const Tensor& probs, const Tensor& targets, const ModelParams& params, const LossConfig& cfg);

}  // namespace rsisc
