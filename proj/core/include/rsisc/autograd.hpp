#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rsisc/ops.hpp"
#include "rsisc/tensor.hpp"

namespace rsisc {

struct Param {
  Tensor value;
  Tensor grad;
};

/// Named parameter tensors with paired gradients. Iteration order is
/// lexicographic by name, which fixes the serialization order as well.
class ModelParams {
 public:
  Param& add(const std::string& name, Tensor value);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  void zero_grad();
  std::size_t scalar_count() const;
  double sum_squares() const;
  std::vector<std::string> names() const;
  std::size_t size() const { return entries_.size(); }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Compares values only, bit-exact.
  friend bool operator==(const ModelParams& a, const ModelParams& b);

 private:
  std::map<std::string, Param> entries_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records the forward graph of one evaluation. Nodes are appended in
/// evaluation order, so walking them backwards is a reverse topological
/// order. A tape belongs to a single thread.
class Tape {
 public:
  // Receives the gradient w.r.t. the node's output and the output value.
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out, const Tensor& out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Tracked leaf whose gradient is added into p.grad by backward().
  Var param(Param& p);
  // Tracked leaf without a parameter binding; read its gradient with grad().
  Var leaf(Tensor value);

  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  void backward(const Var& loss);
  const Tensor& grad(const Var& v) const;
  void accumulate(const Var& v, const Tensor& g);

  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
    Param* param = nullptr;
  };
  const Node& node(const Var& v) const;
  std::deque<Node> nodes_;
};

// Differentiable wrappers over rsisc::ops. Each records one tape node.
namespace ag {

Var matmul(const Var& a, const Var& b);
Var transpose_last2(const Var& x);
Var permute(const Var& x, std::vector<std::size_t> perm);
Var reshape(const Var& x, Shape shape);
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double s);
Var add_bias(const Var& x, const Var& bias);
Var relu(const Var& x);
Var softmax_last(const Var& x);
Var pool_axis(const Var& x, std::size_t axis, ops::PoolMode mode);
Var concat(const std::vector<Var>& xs, std::size_t axis);
Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t length);
Var conv2d(const Var& x, const Var& kernel, const Var& bias, std::size_t stride);
Var sum(const Var& x);
Var sum_squares(const Var& x);
Var kl_divergence(const Var& probs, const Tensor& targets, double eps);

}  // namespace ag

}  // namespace rsisc
