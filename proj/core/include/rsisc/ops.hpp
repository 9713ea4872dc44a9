#pragma once

// Forward kernels and their vector-Jacobian products. Everything here is a
// pure function of its arguments; the tape in autograd.hpp composes them.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rsisc/tensor.hpp"

namespace rsisc::ops {

enum class PoolMode { average, max };

// a: [..., M, K], b: [..., K, N]. Leading batch extents must agree, or one
// side may be a plain matrix shared across the other's batch.
Tensor matmul(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> matmul_backward(const Tensor& a, const Tensor& b, const Tensor& grad);

Tensor transpose_last2(const Tensor& x);
Tensor permute(const Tensor& x, std::span<const std::size_t> perm);
std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> perm);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);

// Adds bias [N] along the last axis of x [..., N].
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor bias_backward(const Tensor& grad, std::size_t bias_size);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad);

Tensor softmax_last(const Tensor& x);
// Takes the softmax *output* y.
Tensor softmax_last_backward(const Tensor& y, const Tensor& grad);

struct PoolResult {
  Tensor out;
  // For max mode: flat input offset of the selected element per output.
  std::vector<std::size_t> argmax;
};

// Reduces one axis by mean or maximum. Max ties select the first maximal
// element along the axis, which is also where the gradient is routed.
PoolResult pool_axis(const Tensor& x, std::size_t axis, PoolMode mode);
Tensor pool_axis_backward(const Shape& input_shape, std::size_t axis, PoolMode mode,
                          std::span<const std::size_t> argmax, const Tensor& grad);

Tensor concat(std::span<const Tensor> xs, std::size_t axis);
std::vector<Tensor> split(const Tensor& x, std::size_t axis, std::span<const std::size_t> sizes);

// x: [B, W, H, Cin], kernel: [K, K, Cin, Cout], bias: [Cout]. Valid padding.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride);

struct Conv2dGrads {
  Tensor input;
  Tensor kernel;
  Tensor bias;
};
Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& kernel, std::size_t stride, const Tensor& grad);

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride);

double sum(const Tensor& x);
double sum_squares(const Tensor& x);

// sum_{n,c} y ln(y / max(p, eps)) with 0 ln(0/.) = 0.
double kl_divergence(const Tensor& probs, const Tensor& targets, double eps);
// d/dprobs of the above; zero where p < eps (the clamp is flat there).
Tensor kl_divergence_backward(const Tensor& probs, const Tensor& targets, double eps);

}  // namespace rsisc::ops
