#include "rsisc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "rsisc/error.hpp"

namespace rsisc {

namespace {

double loss_at(const ModelConfig& cfg, ModelParams& params, const Tensor& images, const Tensor& targets,
               const LossConfig& loss) {
  Tape tape;
  Var probs = model_forward(tape, tape.constant(images), params, cfg, false, nullptr);
  return kl_loss(tape, probs, targets, params, loss).value().item();
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckReport check_model_gradients(const ModelConfig& cfg, ModelParams& params, const Tensor& images,
                                      const Tensor& targets, const LossConfig& loss, std::size_t count, Rng& rng,
                                      double h) {
  if (params.scalar_count() == 0) throw ConfigError("no parameters to probe");
  GradCheckReport report;
  params.zero_grad();
  {
    Tape tape;
    Var probs = model_forward(tape, tape.constant(images), params, cfg, false, nullptr);
    Var value = kl_loss(tape, probs, targets, params, loss);
    tape.backward(value);
    report.loss = value.value().item();
  }

  std::vector<std::pair<std::string, std::size_t>> sizes;
  for (const auto& [name, p] : params) sizes.emplace_back(name, p.value.size());

  for (std::size_t k = 0; k < count; ++k) {
    std::size_t flat = uniform_index(rng, params.scalar_count() - 1);
    std::size_t which = 0;
    while (flat >= sizes[which].second) flat -= sizes[which++].second;
    Param& p = params.at(sizes[which].first);
    const double saved = p.value[flat];
    p.value[flat] = saved + h;
    const double up = loss_at(cfg, params, images, targets, loss);
    p.value[flat] = saved - h;
    const double down = loss_at(cfg, params, images, targets, loss);
    p.value[flat] = saved;

    GradProbe probe;
    probe.param = sizes[which].first;
    probe.index = flat;
    probe.analytic = p.grad[flat];
    probe.numeric = (up - down) / (2.0 * h);
    probe.relative_error = relative_error(probe.analytic, probe.numeric);
    report.max_relative_error = std::max(report.max_relative_error, probe.relative_error);
    report.probes.push_back(probe);
  }
  return report;
}

}  // namespace rsisc
