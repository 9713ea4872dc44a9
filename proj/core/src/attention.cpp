#include "rsisc/attention.hpp"

#include <cmath>

#include "rsisc/error.hpp"

namespace rsisc {

void AttentionConfig::validate() const {
  if (num_heads == 0 || key_dim == 0) throw ConfigError("attention needs num_heads >= 1 and key_dim >= 1");
}

void init_attention_stream(ModelParams& params, const std::string& prefix, std::size_t channels,
                           const AttentionConfig& cfg, Rng& rng, const InitOptions& init) {
  cfg.validate();
  const std::size_t inner = cfg.num_heads * cfg.key_dim;
  auto bias = [&](std::size_t n) { return init.zero_bias ? Tensor({n}) : gaussian_tensor({n}, init.variance, rng); };
  for (const char* proj : {"query", "key", "value"}) {
    params.add(prefix + "." + proj + ".kernel", gaussian_tensor({channels, inner}, init.variance, rng));
    params.add(prefix + "." + proj + ".bias", bias(inner));
  }
  params.add(prefix + ".output.kernel", gaussian_tensor({inner, channels}, init.variance, rng));
  params.add(prefix + ".output.bias", bias(channels));
}

void init_attention_pool(ModelParams& params, const std::string& prefix, std::size_t channels,
                         const AttentionConfig& cfg, Rng& rng, const InitOptions& init) {
  init_attention_stream(params, prefix + ".width", channels, cfg, rng, init);
  init_attention_stream(params, prefix + ".height", channels, cfg, rng, init);
}

namespace {

Var project(Tape& tape, const Var& x, ModelParams& params, const std::string& name) {
  return ag::add_bias(ag::matmul(x, tape.param(params.at(name + ".kernel"))), tape.param(params.at(name + ".bias")));
}

// [B, L, h*d] -> [B, h, L, d]
Var split_heads(const Var& x, std::size_t heads, std::size_t dim) {
  const std::size_t b = x.shape()[0], l = x.shape()[1];
  return ag::permute(ag::reshape(x, {b, l, heads, dim}), {0, 2, 1, 3});
}

}  // namespace

Var multihead_attention(Tape& tape, const Var& seq, ModelParams& params, const std::string& prefix,
                        const AttentionConfig& cfg, Tensor* weights_out) {
  cfg.validate();
  if (seq.shape().size() != 3) throw ShapeError("multihead_attention expects [B, L, C], got " + shape_string(seq.shape()));
  const std::size_t b = seq.shape()[0], l = seq.shape()[1];
  const std::size_t h = cfg.num_heads, d = cfg.key_dim;

  Var q = split_heads(project(tape, seq, params, prefix + ".query"), h, d);
  Var k = split_heads(project(tape, seq, params, prefix + ".key"), h, d);
  Var v = split_heads(project(tape, seq, params, prefix + ".value"), h, d);

  Var scores = ag::scale(ag::matmul(q, ag::transpose_last2(k)), 1.0 / std::sqrt(static_cast<double>(d)));
  Var weights = ag::softmax_last(scores);  // [B, h, L, L]
  if (weights_out) *weights_out = weights.value();

  Var context = ag::reshape(ag::permute(ag::matmul(weights, v), {0, 2, 1, 3}), {b, l, h * d});
  return project(tape, context, params, prefix + ".output");
}

Var attention_pool(Tape& tape, const Var& fmap, ModelParams& params, const std::string& prefix,
                   const AttentionConfig& cfg, AttentionTrace* trace) {
  if (fmap.shape().size() != 4) throw ShapeError("attention_pool expects [B, W, H, C], got " + shape_string(fmap.shape()));
  // Stream 1: collapse H, attend across W, collapse W.
  Var w_seq = ag::pool_axis(fmap, 2, cfg.mode);  // [B, W, C]
  Var w_att = multihead_attention(tape, w_seq, params, prefix + ".width", cfg, trace ? &trace->width_weights : nullptr);
  Var w_vec = ag::pool_axis(w_att, 1, cfg.mode);  // [B, C]
  // Stream 2: collapse W, attend across H, collapse H.
  Var h_seq = ag::pool_axis(fmap, 1, cfg.mode);  // [B, H, C]
  Var h_att = multihead_attention(tape, h_seq, params, prefix + ".height", cfg, trace ? &trace->height_weights : nullptr);
  Var h_vec = ag::pool_axis(h_att, 1, cfg.mode);
  return ag::concat({w_vec, h_vec}, cfg.concat_axis == ConcatAxis::channel ? 1 : 0);
}

Var global_pool(const Var& fmap, PoolMode mode) {
  if (fmap.shape().size() != 4) throw ShapeError("global_pool expects [B, W, H, C], got " + shape_string(fmap.shape()));
  return ag::pool_axis(ag::pool_axis(fmap, 2, mode), 1, mode);
}

}  // namespace rsisc
