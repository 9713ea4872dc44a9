#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rsisc/augment.hpp"
#include "rsisc/checkpoint.hpp"
#include "rsisc/dataset.hpp"
#include "rsisc/head.hpp"
#include "rsisc/model.hpp"

namespace rsisc {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::size_t step = 0;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
};

// One update from the gradients stored in `params`. Throws NumericError on
// non-finite gradients before touching any parameter.
void optimizer_step(ModelParams& params, OptimizerState& state, const OptimizerConfig& cfg, double learning_rate);

struct TrainConfig {
  Strategy strategy = Strategy::direct;
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;

  bool augment = true;
  std::size_t crop_reduction = 10;
  std::size_t erase_size = 20;
  double erase_fill = 0.0;
  MixupConfig mixup;

  LossConfig loss;
  InitOptions init;

  double validation_fraction = 0.1;
  // Stop after this many epochs without a validation-accuracy improvement (0 = off).
  std::size_t patience = 0;
  std::optional<double> stop_at_train_accuracy;
  std::optional<double> stop_at_val_accuracy;

  static double default_learning_rate(Strategy s) { return s == Strategy::direct ? 1e-4 : 1e-5; }
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  // Line-delimited table. Wall-clock seconds are left out unless asked for,
  // so the default table is reproducible byte for byte.
  void write(std::ostream& out, bool include_seconds = false) const;
  static TrainHistory read(std::istream& in);
  // First epoch (1-based) whose validation accuracy reaches `threshold`.
  std::optional<std::size_t> epochs_to_val_accuracy(double threshold) const;
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains on an already rotation-expanded dataset. Each epoch shuffles the
/// training part, cuts it into batches, applies crop -> erase -> mixup, and
/// takes one optimizer step per batch. Evaluation images are center-cropped
/// by the same reduction and never augmented otherwise.
TrainResult train(const Dataset& data, const ModelConfig& model, const TrainConfig& cfg,
                  const Checkpoint* source = nullptr, const EpochCallback& on_epoch = {});

// Accuracy in percent of the model on `data`, images center-cropped by `crop_reduction`.
double evaluate_accuracy(const Dataset& data, ModelParams& params, const ModelConfig& model,
                         std::size_t crop_reduction);
Tensor predict_dataset(const Dataset& data, ModelParams& params, const ModelConfig& model, std::size_t crop_reduction);

}  // namespace rsisc
