#include "rsisc/model.hpp"

#include "rsisc/checkpoint.hpp"
#include "rsisc/error.hpp"

namespace rsisc {

std::string to_string(PoolKind kind) {
  switch (kind) {
    case PoolKind::attention:
      return "attention";
    case PoolKind::average:
      return "avg";
    case PoolKind::max:
      return "max";
  }
  return "?";
}

std::string to_string(PoolMode mode) { return mode == PoolMode::average ? "average" : "max"; }
std::string to_string(Strategy s) { return s == Strategy::direct ? "direct" : "transfer"; }
std::string to_string(ConcatAxis a) { return a == ConcatAxis::channel ? "channel" : "batch"; }

PoolKind parse_pool_kind(const std::string& text) {
  if (text == "attention") return PoolKind::attention;
  if (text == "avg" || text == "average") return PoolKind::average;
  if (text == "max") return PoolKind::max;
  throw ConfigError("unknown pooling '" + text + "' (attention|avg|max)");
}

PoolMode parse_pool_mode(const std::string& text) {
  if (text == "average" || text == "avg") return PoolMode::average;
  if (text == "max") return PoolMode::max;
  throw ConfigError("unknown pool mode '" + text + "' (average|max)");
}

Strategy parse_strategy(const std::string& text) {
  if (text == "direct") return Strategy::direct;
  if (text == "transfer") return Strategy::transfer;
  throw ConfigError("unknown strategy '" + text + "' (direct|transfer)");
}

ConcatAxis parse_concat_axis(const std::string& text) {
  if (text == "channel") return ConcatAxis::channel;
  if (text == "batch") return ConcatAxis::batch;
  throw ConfigError("unknown concat axis '" + text + "' (channel|batch)");
}

std::size_t ModelConfig::feature_width() const {
  const std::size_t c = backbone.feature_channels();
  if (pool == PoolKind::attention && attention.concat_axis == ConcatAxis::channel) return 2 * c;
  return c;
}

std::size_t ModelConfig::rows_per_image() const {
  return pool == PoolKind::attention && attention.concat_axis == ConcatAxis::batch ? 2 : 1;
}

void ModelConfig::validate() const {
  backbone.output_extent(input_size);
  if (pool == PoolKind::attention) attention.validate();
  head.validate();
}

void check_param_shapes(const ModelParams& expected, const ModelParams& actual, const std::string& prefix) {
  for (const auto& [name, p] : expected) {
    if (name.rfind(prefix, 0) != 0) continue;
    if (!actual.contains(name)) throw ShapeError("tensor '" + name + "' missing from checkpoint");
    const Shape& got = actual.at(name).value.shape();
    if (got != p.value.shape())
      throw ShapeError("tensor '" + name + "' has shape " + shape_string(got) + ", config expects " +
                       shape_string(p.value.shape()));
  }
}

ModelParams init_params(const ModelConfig& cfg, Strategy strategy, const Checkpoint* source, Rng& rng,
                        const InitOptions& init) {
  cfg.validate();
  ModelParams params;
  init_backbone(params, cfg.backbone, rng, init);
  if (cfg.pool == PoolKind::attention)
    init_attention_pool(params, "pool", cfg.backbone.feature_channels(), cfg.attention, rng, init);
  init_head(params, cfg.feature_width(), cfg.head, rng, init);

  if (strategy == Strategy::transfer) {
    if (!source) throw ConfigError("transfer strategy needs a source checkpoint");
    check_param_shapes(params, source->params, "backbone.");
    for (auto& [name, p] : params)
      if (name.rfind("backbone.", 0) == 0) p.value = source->params.at(name).value;
  }
  return params;
}

Var model_forward(Tape& tape, const Var& images, ModelParams& params, const ModelConfig& cfg, bool training,
                  Rng* dropout_rng) {
  if (images.shape().size() == 4 && images.shape()[1] != cfg.input_size)
    throw ShapeError("model expects " + std::to_string(cfg.input_size) + "x" + std::to_string(cfg.input_size) +
                     " inputs, got " + shape_string(images.shape()));
  Var fmap = backbone_forward(tape, images, params, cfg.backbone);
  Var features;
  switch (cfg.pool) {
    case PoolKind::attention:
      features = attention_pool(tape, fmap, params, "pool", cfg.attention);
      break;
    case PoolKind::average:
      features = global_pool(fmap, PoolMode::average);
      break;
    case PoolKind::max:
      features = global_pool(fmap, PoolMode::max);
      break;
  }
  return mlp_forward(tape, features, params, cfg.head, training, dropout_rng);
}

Tensor predict_probs(std::span<const Image> images, ModelParams& params, const ModelConfig& cfg) {
  const std::size_t classes = cfg.head.num_classes;
  Tensor out({images.size(), classes});
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, images.size() - start);
    Tape tape;
    Var probs = model_forward(tape, tape.constant(to_feature_map(images.subspan(start, n))), params, cfg, false, nullptr);
    const Tensor& p = probs.value();
    if (cfg.rows_per_image() == 1) {
      std::copy(p.data().begin(), p.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(start * classes));
    } else {
      // Rows [0, n) come from the width stream, [n, 2n) from the height stream.
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < classes; ++c)
          out.at({start + i, c}) = 0.5 * (p.at({i, c}) + p.at({n + i, c}));
    }
  }
  return out;
}

}  // namespace rsisc
