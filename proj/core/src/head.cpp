#include "rsisc/head.hpp"

#include <cmath>
#include <string>

#include "rsisc/error.hpp"

namespace rsisc {

void HeadConfig::validate() const {
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (num_classes < 2) throw ConfigError("head needs at least 2 classes");
  if (hidden_width == 0) throw ConfigError("head hidden width must be positive");
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("loss lambda must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("loss epsilon must be > 0");
}

void init_head(ModelParams& params, std::size_t in_features, const HeadConfig& cfg, Rng& rng, const InitOptions& init) {
  cfg.validate();
  auto bias = [&](std::size_t n) { return init.zero_bias ? Tensor({n}) : gaussian_tensor({n}, init.variance, rng); };
  params.add("head.fc1.kernel", gaussian_tensor({in_features, cfg.hidden_width}, init.variance, rng));
  params.add("head.fc1.bias", bias(cfg.hidden_width));
  params.add("head.fc2.kernel", gaussian_tensor({cfg.hidden_width, cfg.num_classes}, init.variance, rng));
  params.add("head.fc2.bias", bias(cfg.num_classes));
}

Tensor dropout_mask(const Shape& shape, double rate, Rng& rng) {
  Tensor mask(shape);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution keep(1.0 - rate);
  for (double& m : mask.data()) m = keep(rng) ? keep_scale : 0.0;
  return mask;
}

Var mlp_forward(Tape& tape, const Var& features, ModelParams& params, const HeadConfig& cfg, bool training, Rng* rng) {
  cfg.validate();
  const Param& fc1 = params.at("head.fc1.kernel");
  if (features.shape().size() != 2 || features.shape()[1] != fc1.value.extent(0))
    throw ShapeError("head expects [B, " + std::to_string(fc1.value.extent(0)) + "] features, got " +
                     shape_string(features.shape()));
  Var hidden = ag::relu(ag::add_bias(ag::matmul(features, tape.param(params.at("head.fc1.kernel"))),
                                     tape.param(params.at("head.fc1.bias"))));
  if (training && cfg.dropout_rate > 0.0) {
    if (!rng) throw ConfigError("training-mode dropout needs a random stream");
    hidden = ag::mul(hidden, tape.constant(dropout_mask(hidden.shape(), cfg.dropout_rate, *rng)));
  }
  Var logits = ag::add_bias(ag::matmul(hidden, tape.param(params.at("head.fc2.kernel"))),
                            tape.param(params.at("head.fc2.bias")));
  return ag::softmax_last(logits);
}

namespace {

void require_distributions(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + " must be [B, C], got " + shape_string(t.shape()));
  const std::size_t c = t.extent(1);
  for (std::size_t row = 0; row < t.extent(0); ++row) {
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += t[row * c + j];
    if (!(std::abs(total - 1.0) <= 1e-6))
      throw NumericError(std::string(what) + " row " + std::to_string(row) + " sums to " + std::to_string(total) +
                         ", expected 1");
  }
}

}  // namespace

Var kl_loss(Tape& tape, const Var& probs, const Tensor& targets, ModelParams& params, const LossConfig& cfg) {
  cfg.validate();
  require_distributions(probs.value(), "predicted probabilities");
  require_distributions(targets, "targets");
  Var loss = ag::kl_divergence(probs, targets, cfg.epsilon);
  if (cfg.lambda == 0.0) return loss;
  std::vector<Var> squares;
  for (auto& [name, p] : params) squares.push_back(ag::reshape(ag::sum_squares(tape.param(p)), {1}));
  Var l2 = ag::sum(ag::concat(squares, 0));
  return ag::add(loss, ag::scale(l2, 0.5 * cfg.lambda));
}

double kl_loss_value(const Tensor& probs, const Tensor& targets, const ModelParams& params, const LossConfig& cfg) {
  cfg.validate();
  require_distributions(probs, "predicted probabilities");
  require_distributions(targets, "targets");
  return ops::kl_divergence(probs, targets, cfg.epsilon) + 0.5 * cfg.lambda * params.sum_squares();
}

}  // namespace rsisc
