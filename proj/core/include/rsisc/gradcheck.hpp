#pragma once

// Central finite-difference check of the analytic model gradient.

#include <cstddef>
#include <string>
#include <vector>

#include "rsisc/model.hpp"

namespace rsisc {

struct GradProbe {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradProbe> probes;
  double loss = 0.0;
  double max_relative_error = 0.0;
};

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Loss = kl_loss(model_forward(images), targets) with dropout off. Probes
/// `count` parameter entries drawn uniformly over all scalars and compares
/// the tape gradient with (L(t + h) - L(t - h)) / 2h.
GradCheckReport check_model_gradients(const ModelConfig& cfg, ModelParams& params, const Tensor& images,
                                      const Tensor& targets, const LossConfig& loss, std::size_t count, Rng& rng,
                                      double h = 1e-5);

}  // namespace rsisc
