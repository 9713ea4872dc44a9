#include "rsisc/autograd.hpp"

#include "rsisc/error.hpp"

namespace rsisc {

Param& ModelParams::add(const std::string& name, Tensor value) {
  Tensor grad(value.shape());
  auto [it, inserted] = entries_.insert_or_assign(name, Param{std::move(value), std::move(grad)});
  return it->second;
}

Param& ModelParams::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("no parameter named '" + name + "'");
  return it->second;
}

const Param& ModelParams::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("no parameter named '" + name + "'");
  return it->second;
}

void ModelParams::zero_grad() {
  for (auto& [name, p] : entries_) p.grad.fill(0.0);
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : entries_) n += p.value.size();
  return n;
}

double ModelParams::sum_squares() const {
  double acc = 0.0;
  for (const auto& [name, p] : entries_) acc += ops::sum_squares(p.value);
  return acc;
}

std::vector<std::string> ModelParams::names() const {
  std::vector<std::string> out;
  for (const auto& [name, p] : entries_) out.push_back(name);
  return out;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  auto ib = b.entries_.begin();
  for (const auto& [name, p] : a.entries_) {
    if (name != ib->first || !(p.value == ib->second.value)) return false;
    ++ib;
  }
  return true;
}

const Tensor& Var::value() const {
  if (!tape_) throw Error("use of an unbound Var");
  return tape_->node(*this).value;
}

bool Var::requires_grad() const { return tape_ && tape_->node(*this).requires_grad; }

const Tape::Node& Tape::node(const Var& v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw Error("Var does not belong to this tape");
  return nodes_[v.id_];
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), false, false, nullptr, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Param& p) {
  nodes_.push_back(Node{p.value, Tensor(), false, true, nullptr, &p});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), false, true, nullptr, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  bool tracked = false;
  for (const Var& in : inputs) tracked = tracked || node(in).requires_grad;
  nodes_.push_back(Node{std::move(value), Tensor(), false, tracked, tracked ? std::move(fn) : nullptr, nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(const Var& v, const Tensor& g) {
  Node& n = nodes_.at(v.id_);
  if (!n.requires_grad) return;
  if (g.shape() != n.value.shape())
    throw ShapeError("gradient shape " + shape_string(g.shape()) + " does not match value shape " +
                     shape_string(n.value.shape()));
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

void Tape::backward(const Var& loss) {
  const Node& ln = node(loss);
  if (!ln.requires_grad) throw Error("backward() on a tensor that does not depend on any tracked parameter");
  if (ln.value.size() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_string(ln.value.shape()));
  for (Node& n : nodes_) n.has_grad = false;
  nodes_[loss.id_].grad = Tensor(ln.value.shape(), 1.0);
  nodes_[loss.id_].has_grad = true;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.backward) {
      // Inputs always sit at lower indices, so this reference stays valid.
      n.backward(*this, n.grad, n.value);
    }
    if (n.param) {
      for (std::size_t k = 0; k < n.grad.size(); ++k) n.param->grad[k] += n.grad[k];
    }
  }
}

const Tensor& Tape::grad(const Var& v) const {
  const Node& n = node(v);
  if (!n.has_grad) throw Error("no gradient recorded for this Var");
  return n.grad;
}

namespace ag {

Var matmul(const Var& a, const Var& b) {
  return a.tape()->record(ops::matmul(a.value(), b.value()), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor&) {
    auto [ga, gb] = ops::matmul_backward(a.value(), b.value(), g);
    t.accumulate(a, ga);
    t.accumulate(b, gb);
  });
}

Var transpose_last2(const Var& x) {
  return x.tape()->record(ops::transpose_last2(x.value()), {x},
                          [x](Tape& t, const Tensor& g, const Tensor&) { t.accumulate(x, ops::transpose_last2(g)); });
}

Var permute(const Var& x, std::vector<std::size_t> perm) {
  Tensor out = ops::permute(x.value(), perm);
  return x.tape()->record(std::move(out), {x}, [x, inv = ops::inverse_permutation(perm)](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(x, ops::permute(g, inv));
  });
}

Var reshape(const Var& x, Shape shape) {
  return x.tape()->record(x.value().reshaped(std::move(shape)), {x},
                          [x](Tape& t, const Tensor& g, const Tensor&) { t.accumulate(x, g.reshaped(x.shape())); });
}

Var add(const Var& a, const Var& b) {
  return a.tape()->record(ops::add(a.value(), b.value()), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var mul(const Var& a, const Var& b) {
  return a.tape()->record(ops::mul(a.value(), b.value()), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(a, ops::mul(g, b.value()));
    t.accumulate(b, ops::mul(g, a.value()));
  });
}

Var scale(const Var& x, double s) {
  return x.tape()->record(ops::scale(x.value(), s), {x},
                          [x, s](Tape& t, const Tensor& g, const Tensor&) { t.accumulate(x, ops::scale(g, s)); });
}

Var add_bias(const Var& x, const Var& bias) {
  return x.tape()->record(ops::add_bias(x.value(), bias.value()), {x, bias}, [x, bias](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(x, g);
    t.accumulate(bias, ops::bias_backward(g, bias.value().size()));
  });
}

Var relu(const Var& x) {
  return x.tape()->record(ops::relu(x.value()), {x},
                          [x](Tape& t, const Tensor& g, const Tensor&) { t.accumulate(x, ops::relu_backward(x.value(), g)); });
}

Var softmax_last(const Var& x) {
  return x.tape()->record(ops::softmax_last(x.value()), {x}, [x](Tape& t, const Tensor& g, const Tensor& y) {
    t.accumulate(x, ops::softmax_last_backward(y, g));
  });
}

Var pool_axis(const Var& x, std::size_t axis, ops::PoolMode mode) {
  ops::PoolResult r = ops::pool_axis(x.value(), axis, mode);
  return x.tape()->record(std::move(r.out), {x}, [x, axis, mode, arg = std::move(r.argmax)](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(x, ops::pool_axis_backward(x.shape(), axis, mode, arg, g));
  });
}

Var concat(const std::vector<Var>& xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("concat of zero tensors");
  std::vector<Tensor> values;
  std::vector<std::size_t> sizes;
  for (const Var& v : xs) {
    values.push_back(v.value());
    sizes.push_back(v.shape().at(axis));
  }
  return xs.front().tape()->record(ops::concat(values, axis), xs,
                                   [xs, axis, sizes](Tape& t, const Tensor& g, const Tensor&) {
                                     std::vector<Tensor> parts = ops::split(g, axis, sizes);
                                     for (std::size_t i = 0; i < xs.size(); ++i) t.accumulate(xs[i], parts[i]);
                                   });
}

Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t length) {
  const std::size_t extent = x.shape().at(axis);
  if (length == 0 || start + length > extent) throw ShapeError("slice out of range");
  std::vector<std::size_t> sizes;
  if (start > 0) sizes.push_back(start);
  sizes.push_back(length);
  if (start + length < extent) sizes.push_back(extent - start - length);
  const std::size_t pick = start > 0 ? 1 : 0;
  std::vector<Tensor> parts = ops::split(x.value(), axis, sizes);
  return x.tape()->record(std::move(parts[pick]), {x}, [x, axis, sizes, pick](Tape& t, const Tensor& g, const Tensor&) {
    std::vector<Tensor> pieces;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (i == pick) {
        pieces.push_back(g);
      } else {
        Shape s = x.shape();
        s[axis] = sizes[i];
        pieces.emplace_back(s);
      }
    }
    t.accumulate(x, ops::concat(pieces, axis));
  });
}

Var conv2d(const Var& x, const Var& kernel, const Var& bias, std::size_t stride) {
  return x.tape()->record(ops::conv2d(x.value(), kernel.value(), bias.value(), stride), {x, kernel, bias},
                          [x, kernel, bias, stride](Tape& t, const Tensor& g, const Tensor&) {
                            ops::Conv2dGrads gr = ops::conv2d_backward(x.value(), kernel.value(), stride, g);
                            t.accumulate(x, gr.input);
                            t.accumulate(kernel, gr.kernel);
                            t.accumulate(bias, gr.bias);
                          });
}

Var sum(const Var& x) {
  return x.tape()->record(Tensor::scalar(ops::sum(x.value())), {x},
                          [x](Tape& t, const Tensor& g, const Tensor&) { t.accumulate(x, Tensor(x.shape(), g.item())); });
}

Var sum_squares(const Var& x) {
  return x.tape()->record(Tensor::scalar(ops::sum_squares(x.value())), {x},
                          [x](Tape& t, const Tensor& g, const Tensor&) { t.accumulate(x, ops::scale(x.value(), 2.0 * g.item())); });
}

Var kl_divergence(const Var& probs, const Tensor& targets, double eps) {
  return probs.tape()->record(Tensor::scalar(ops::kl_divergence(probs.value(), targets, eps)), {probs},
                              [probs, targets, eps](Tape& t, const Tensor& g, const Tensor&) {
                                t.accumulate(probs, ops::scale(ops::kl_divergence_backward(probs.value(), targets, eps),
                                                               g.item()));
                              });
}

}  // namespace ag

}  // namespace rsisc
