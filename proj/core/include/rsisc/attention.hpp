#pragma once

// Dual-stream multihead attention pooling: one stream attends along the
// width axis, the other along the height axis, and the two pooled vectors
// are concatenated in place of a single global pooling step.

#include <cstddef>
#include <string>
#include <vector>

#include "rsisc/autograd.hpp"
#include "rsisc/backbone.hpp"

namespace rsisc {

using ops::PoolMode;

enum class ConcatAxis { channel, batch };

struct AttentionConfig {
  std::size_t num_heads = 16;
  std::size_t key_dim = 128;
  PoolMode mode = PoolMode::average;
  // channel -> [B, 2C]; batch -> [2B, C] (stream 1 rows first).
  ConcatAxis concat_axis = ConcatAxis::channel;

  static AttentionConfig desk() { return {4, 16, PoolMode::average, ConcatAxis::channel}; }
  void validate() const;
  bool operator==(const AttentionConfig&) const = default;
};

// Parameter names for a stream rooted at `prefix`:
//   <prefix>.{query,key,value}.{kernel [C, h*d], bias [h*d]}
//   <prefix>.output.{kernel [h*d, C], bias [C]}
void init_attention_stream(ModelParams& params, const std::string& prefix, std::size_t channels,
                           const AttentionConfig& cfg, Rng& rng, const InitOptions& init = {});
// Both streams: "<prefix>.width" and "<prefix>.height".
void init_attention_pool(ModelParams& params, const std::string& prefix, std::size_t channels,
                         const AttentionConfig& cfg, Rng& rng, const InitOptions& init = {});

/// Scaled dot-product self-attention over [B, L, C], no positional
/// encoding or mask. Returns [B, L, C]. If `weights_out` is given it receives
/// the softmax attention weights [B, heads, L, L].
Var multihead_attention(Tape& tape, const Var& seq, ModelParams& params, const std::string& prefix,
                        const AttentionConfig& cfg, Tensor* weights_out = nullptr);

struct AttentionTrace {
  Tensor width_weights;
  Tensor height_weights;
};

// [B, W, H, C] -> [B, 2C] (or [2B, C] with ConcatAxis::batch).
Var attention_pool(Tape& tape, const Var& fmap, ModelParams& params, const std::string& prefix,
                   const AttentionConfig& cfg, AttentionTrace* trace = nullptr);

// Mean or max over both spatial axes: [B, W, H, C] -> [B, C].
Var global_pool(const Var& fmap, PoolMode mode);

}  // namespace rsisc
