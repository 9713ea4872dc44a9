#include "rsisc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rsisc/error.hpp"

namespace rsisc::ops {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

struct MatmulPlan {
  Shape batch;
  std::size_t batches = 1;
  bool a_batched = false;
  bool b_batched = false;
  std::size_t m = 0, k = 0, n = 0;
};

MatmulPlan plan_matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2)
    throw ShapeError("matmul needs rank >= 2, got " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  MatmulPlan p;
  p.m = a.shape()[a.rank() - 2];
  p.k = a.shape()[a.rank() - 1];
  p.n = b.shape()[b.rank() - 1];
  if (b.shape()[b.rank() - 2] != p.k)
    throw ShapeError("matmul inner extents differ: " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  const Shape ab(a.shape().begin(), a.shape().end() - 2);
  const Shape bb(b.shape().begin(), b.shape().end() - 2);
  p.a_batched = !ab.empty();
  p.b_batched = !bb.empty();
  if (p.a_batched && p.b_batched && ab != bb)
    throw ShapeError("matmul batch extents differ: " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  p.batch = p.a_batched ? ab : bb;
  p.batches = shape_size(p.batch);
  return p;
}

// Splits a shape around `axis` into (outer, extent, inner) counts.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size())
    throw ShapeError("axis " + std::to_string(axis) + " invalid for shape " + shape_string(shape));
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (i != axis) out.push_back(shape[i]);
  if (out.empty()) out.push_back(1);
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const MatmulPlan p = plan_matmul(a, b);
  Shape shape = p.batch;
  shape.push_back(p.m);
  shape.push_back(p.n);
  Tensor out(shape);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* od = out.data().data();
  for (std::size_t s = 0; s < p.batches; ++s) {
    const double* as = ad + (p.a_batched ? s * p.m * p.k : 0);
    const double* bs = bd + (p.b_batched ? s * p.k * p.n : 0);
    double* os = od + s * p.m * p.n;
    for (std::size_t i = 0; i < p.m; ++i) {
      double* orow = os + i * p.n;
      for (std::size_t kk = 0; kk < p.k; ++kk) {
        const double aik = as[i * p.k + kk];
        const double* brow = bs + kk * p.n;
        for (std::size_t j = 0; j < p.n; ++j) orow[j] += aik * brow[j];
      }
    }
  }
  return out;
}

std::pair<Tensor, Tensor> matmul_backward(const Tensor& a, const Tensor& b, const Tensor& grad) {
  const MatmulPlan p = plan_matmul(a, b);
  Tensor ga(a.shape());
  Tensor gb(b.shape());
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  const double* gd = grad.data().data();
  if (grad.size() != p.batches * p.m * p.n) throw ShapeError("matmul_backward: gradient shape mismatch");
  for (std::size_t s = 0; s < p.batches; ++s) {
    const double* as = ad + (p.a_batched ? s * p.m * p.k : 0);
    const double* bs = bd + (p.b_batched ? s * p.k * p.n : 0);
    const double* gs = gd + s * p.m * p.n;
    double* gas = ga.data().data() + (p.a_batched ? s * p.m * p.k : 0);
    double* gbs = gb.data().data() + (p.b_batched ? s * p.k * p.n : 0);
    for (std::size_t i = 0; i < p.m; ++i) {
      const double* grow = gs + i * p.n;
      for (std::size_t kk = 0; kk < p.k; ++kk) {
        const double* brow = bs + kk * p.n;
        double acc = 0.0;
        for (std::size_t j = 0; j < p.n; ++j) acc += grow[j] * brow[j];
        gas[i * p.k + kk] += acc;
        const double aik = as[i * p.k + kk];
        double* gbrow = gbs + kk * p.n;
        for (std::size_t j = 0; j < p.n; ++j) gbrow[j] += aik * grow[j];
      }
    }
  }
  return {std::move(ga), std::move(gb)};
}

Tensor transpose_last2(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("transpose_last2 needs rank >= 2, got " + shape_string(x.shape()));
  std::vector<std::size_t> perm(x.rank());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
  return permute(x, perm);
}

std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

Tensor permute(const Tensor& x, std::span<const std::size_t> perm) {
  const std::size_t r = x.rank();
  if (perm.size() != r) throw ShapeError("permute: permutation rank mismatch for " + shape_string(x.shape()));
  std::vector<bool> seen(r, false);
  for (std::size_t p : perm) {
    if (p >= r || seen[p]) throw ShapeError("permute: invalid permutation");
    seen[p] = true;
  }
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r - 1; i > 0; --i) in_stride[i - 1] = in_stride[i] * x.shape()[i];
  Shape out_shape(r);
  std::vector<std::size_t> stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = x.shape()[perm[i]];
    stride[i] = in_stride[perm[i]];
  }
  Tensor out(out_shape);
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  const double* xd = x.data().data();
  for (double& dst : out.data()) {
    dst = xd[src];
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < out_shape[d]) {
        src += stride[d];
        break;
      }
      src -= stride[d] * (out_shape[d] - 1);
      idx[d] = 0;
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor scale(const Tensor& x, double s) {
  Tensor out = x;
  for (double& v : out.data()) v *= s;
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t n = x.shape().back();
  if (bias.rank() != 1 || bias.size() != n)
    throw ShapeError("add_bias: bias " + shape_string(bias.shape()) + " does not fit " + shape_string(x.shape()));
  Tensor out = x;
  double* od = out.data().data();
  for (std::size_t i = 0; i < out.size(); i += n)
    for (std::size_t j = 0; j < n; ++j) od[i + j] += bias[j];
  return out;
}

Tensor bias_backward(const Tensor& grad, std::size_t bias_size) {
  if (grad.shape().back() != bias_size) throw ShapeError("bias_backward: extent mismatch");
  Tensor gb({bias_size});
  const double* gd = grad.data().data();
  for (std::size_t i = 0; i < grad.size(); i += bias_size)
    for (std::size_t j = 0; j < bias_size; ++j) gb[j] += gd[i + j];
  return gb;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad) {
  require_same_shape(x, grad, "relu_backward");
  Tensor out = grad;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(x[i] > 0.0)) out[i] = 0.0;
  return out;
}

Tensor softmax_last(const Tensor& x) {
  if (!x.all_finite()) throw NumericError("softmax_last: non-finite input");
  const std::size_t n = x.shape().back();
  Tensor out = x;
  double* od = out.data().data();
  for (std::size_t row = 0; row < out.size(); row += n) {
    double* r = od + row;
    const double mx = *std::max_element(r, r + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      r[j] = std::exp(r[j] - mx);
      total += r[j];
    }
    for (std::size_t j = 0; j < n; ++j) r[j] /= total;
  }
  return out;
}

Tensor softmax_last_backward(const Tensor& y, const Tensor& grad) {
  require_same_shape(y, grad, "softmax_last_backward");
  const std::size_t n = y.shape().back();
  Tensor out(y.shape());
  for (std::size_t row = 0; row < y.size(); row += n) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += grad[row + j] * y[row + j];
    for (std::size_t j = 0; j < n; ++j) out[row + j] = y[row + j] * (grad[row + j] - dot);
  }
  return out;
}

PoolResult pool_axis(const Tensor& x, std::size_t axis, PoolMode mode) {
  const AxisView v = axis_view(x.shape(), axis);
  PoolResult r{Tensor(drop_axis(x.shape(), axis)), {}};
  if (mode == PoolMode::max) r.argmax.resize(v.outer * v.inner);
  const double* xd = x.data().data();
  double* od = r.out.data().data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      const std::size_t dst = o * v.inner + i;
      if (mode == PoolMode::average) {
        double acc = 0.0;
        for (std::size_t k = 0; k < v.extent; ++k) acc += xd[base + k * v.inner];
        od[dst] = acc / static_cast<double>(v.extent);
      } else {
        std::size_t best = base;
        for (std::size_t k = 1; k < v.extent; ++k) {
          const std::size_t at = base + k * v.inner;
          if (xd[at] > xd[best]) best = at;
        }
        od[dst] = xd[best];
        r.argmax[dst] = best;
      }
    }
  }
  return r;
}

Tensor pool_axis_backward(const Shape& input_shape, std::size_t axis, PoolMode mode,
                          std::span<const std::size_t> argmax, const Tensor& grad) {
  const AxisView v = axis_view(input_shape, axis);
  if (grad.size() != v.outer * v.inner) throw ShapeError("pool_axis_backward: gradient shape mismatch");
  Tensor gx(input_shape);
  double* gd = gx.data().data();
  if (mode == PoolMode::max) {
    for (std::size_t i = 0; i < argmax.size(); ++i) gd[argmax[i]] += grad[i];
    return gx;
  }
  const double inv = 1.0 / static_cast<double>(v.extent);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t k = 0; k < v.extent; ++k)
      for (std::size_t i = 0; i < v.inner; ++i)
        gd[(o * v.extent + k) * v.inner + i] = grad[o * v.inner + i] * inv;
  return gx;
}

Tensor concat(std::span<const Tensor> xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("concat of zero tensors");
  const Shape& ref = xs.front().shape();
  if (axis >= ref.size()) throw ShapeError("concat: axis out of range for " + shape_string(ref));
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const Tensor& t : xs) {
    if (t.rank() != ref.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t d = 0; d < ref.size(); ++d)
      if (d != axis && t.shape()[d] != ref[d])
        throw ShapeError("concat: off-axis extents differ: " + shape_string(ref) + " vs " +
                         shape_string(t.shape()));
    out_shape[axis] += t.shape()[axis];
  }
  Tensor out(out_shape);
  const AxisView ov = axis_view(out_shape, axis);
  double* od = out.data().data();
  std::size_t seam = 0;
  for (const Tensor& t : xs) {
    const std::size_t chunk = t.shape()[axis] * ov.inner;
    for (std::size_t o = 0; o < ov.outer; ++o)
      std::copy_n(t.data().data() + o * chunk, chunk, od + o * ov.extent * ov.inner + seam);
    seam += chunk;
  }
  return out;
}

std::vector<Tensor> split(const Tensor& x, std::size_t axis, std::span<const std::size_t> sizes) {
  const AxisView v = axis_view(x.shape(), axis);
  std::size_t total = 0;
  for (std::size_t s : sizes) total += s;
  if (total != v.extent) throw ShapeError("split: sizes do not sum to extent of " + shape_string(x.shape()));
  std::vector<Tensor> parts;
  std::size_t seam = 0;
  for (std::size_t s : sizes) {
    Shape shape = x.shape();
    shape[axis] = s;
    Tensor part(shape);
    const std::size_t chunk = s * v.inner;
    for (std::size_t o = 0; o < v.outer; ++o)
      std::copy_n(x.data().data() + o * v.extent * v.inner + seam, chunk, part.data().data() + o * chunk);
    seam += chunk;
    parts.push_back(std::move(part));
  }
  return parts;
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride) {
  if (stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  if (kernel > in)
    throw ShapeError("conv2d: kernel " + std::to_string(kernel) + " larger than input " + std::to_string(in));
  return (in - kernel) / stride + 1;
}

namespace {

struct ConvDims {
  std::size_t batch, w, h, cin, kw, kh, cout, ow, oh, stride;
};

ConvDims conv_dims(const Tensor& x, const Tensor& kernel, std::size_t stride) {
  if (x.rank() != 4 || kernel.rank() != 4)
    throw ShapeError("conv2d expects [B,W,H,C] input and [K,K,Cin,Cout] kernel, got " +
                     shape_string(x.shape()) + " and " + shape_string(kernel.shape()));
  ConvDims d{x.extent(0), x.extent(1), x.extent(2), x.extent(3), kernel.extent(0), kernel.extent(1),
             kernel.extent(3), 0, 0, stride};
  if (kernel.extent(2) != d.cin)
    throw ShapeError("conv2d: kernel channels " + std::to_string(kernel.extent(2)) + " != input channels " +
                     std::to_string(d.cin));
  d.ow = conv_output_extent(d.w, d.kw, stride);
  d.oh = conv_output_extent(d.h, d.kh, stride);
  return d;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride) {
  const ConvDims d = conv_dims(x, kernel, stride);
  if (bias.size() != d.cout) throw ShapeError("conv2d: bias size does not match output channels");
  Tensor out({d.batch, d.ow, d.oh, d.cout});
  const double* xd = x.data().data();
  const double* kd = kernel.data().data();
  double* od = out.data().data();
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t i = 0; i < d.ow; ++i)
      for (std::size_t j = 0; j < d.oh; ++j) {
        double* o = od + ((b * d.ow + i) * d.oh + j) * d.cout;
        for (std::size_t c = 0; c < d.cout; ++c) o[c] = bias[c];
        for (std::size_t u = 0; u < d.kw; ++u)
          for (std::size_t v = 0; v < d.kh; ++v) {
            const double* in = xd + ((b * d.w + i * d.stride + u) * d.h + j * d.stride + v) * d.cin;
            const double* k = kd + (u * d.kh + v) * d.cin * d.cout;
            for (std::size_t ci = 0; ci < d.cin; ++ci) {
              const double xv = in[ci];
              const double* krow = k + ci * d.cout;
              for (std::size_t c = 0; c < d.cout; ++c) o[c] += xv * krow[c];
            }
          }
      }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& kernel, std::size_t stride, const Tensor& grad) {
  const ConvDims d = conv_dims(x, kernel, stride);
  if (grad.shape() != Shape{d.batch, d.ow, d.oh, d.cout})
    throw ShapeError("conv2d_backward: gradient shape " + shape_string(grad.shape()) + " mismatch");
  Conv2dGrads g{Tensor(x.shape()), Tensor(kernel.shape()), bias_backward(grad, d.cout)};
  const double* xd = x.data().data();
  const double* kd = kernel.data().data();
  const double* gd = grad.data().data();
  double* gx = g.input.data().data();
  double* gk = g.kernel.data().data();
  // Kernel with the two channel axes swapped, so both updates below are
  // contiguous multiply-adds.
  std::vector<double> kt(kernel.size());
  for (std::size_t uv = 0; uv < d.kw * d.kh; ++uv)
    for (std::size_t ci = 0; ci < d.cin; ++ci)
      for (std::size_t c = 0; c < d.cout; ++c)
        kt[(uv * d.cout + c) * d.cin + ci] = kd[(uv * d.cin + ci) * d.cout + c];
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t i = 0; i < d.ow; ++i)
      for (std::size_t j = 0; j < d.oh; ++j) {
        const double* go = gd + ((b * d.ow + i) * d.oh + j) * d.cout;
        for (std::size_t u = 0; u < d.kw; ++u)
          for (std::size_t v = 0; v < d.kh; ++v) {
            const std::size_t in_off = ((b * d.w + i * d.stride + u) * d.h + j * d.stride + v) * d.cin;
            const std::size_t k_off = (u * d.kh + v) * d.cin * d.cout;
            double* gxrow = gx + in_off;
            for (std::size_t c = 0; c < d.cout; ++c) {
              const double gv = go[c];
              const double* ktrow = kt.data() + k_off + c * d.cin;
              for (std::size_t ci = 0; ci < d.cin; ++ci) gxrow[ci] += gv * ktrow[ci];
            }
            for (std::size_t ci = 0; ci < d.cin; ++ci) {
              const double xv = xd[in_off + ci];
              double* gkrow = gk + k_off + ci * d.cout;
              for (std::size_t c = 0; c < d.cout; ++c) gkrow[c] += xv * go[c];
            }
          }
      }
  return g;
}

double sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return acc;
}

double sum_squares(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v * v;
  return acc;
}

double kl_divergence(const Tensor& probs, const Tensor& targets, double eps) {
  require_same_shape(probs, targets, "kl_divergence");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double y = targets[i];
    if (y > 0.0) acc += y * std::log(y / std::max(probs[i], eps));
  }
  return acc;
}

Tensor kl_divergence_backward(const Tensor& probs, const Tensor& targets, double eps) {
  require_same_shape(probs, targets, "kl_divergence_backward");
  Tensor g(probs.shape());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double y = targets[i];
    if (y > 0.0 && probs[i] >= eps) g[i] = -y / probs[i];
  }
  return g;
}

}  // namespace rsisc::ops
