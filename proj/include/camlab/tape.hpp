#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "camlab/tensor.hpp"

namespace camlab {

/// Handle to a node recorded on a Tape.
struct Var {
  std::size_t id = 0;
  friend bool operator==(Var, Var) = default;
};

enum class OpKind : std::uint8_t {
  Leaf,
  Conv2d,
  Dense,
  Matmul,
  Transpose,
  Relu,
  MaxPool2d,
  GlobalAvgPool,
  Softmax,
  LogSoftmax,
  Exp,
  Log,
  Add,
  Sub,
  Scale,
  Mul,
  SumOver,
  MaxOver,
  Reshape,
  BroadcastTo,
  Select,
  Scatter,
  MinMaxNormalize,
};

std::string_view op_name(OpKind kind);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

struct TapeNode {
  OpKind kind = OpKind::Leaf;
  std::vector<std::size_t> inputs;
  Tensor value;
  bool requires_grad = false;

  // Op attributes.
  Conv2dOptions conv;
  std::size_t window = 0;
  double factor = 1.0;
  std::vector<std::size_t> indices;  // axes, gather indices
  Shape shape_attr;

  // Locals cached by the forward pass for the backward rule.
  std::vector<std::size_t> arg_cache;  // pooling/max argmax, min-max extrema
  std::vector<double> cols;            // conv2d im2col buffer
};

/// Gradients of one scalar target, indexed by node.
class GradientBundle {
 public:
  GradientBundle() = default;
  GradientBundle(std::vector<std::optional<Tensor>> grads, Var target)
      : grads_(std::move(grads)), target_(target) {}

  bool has(Var v) const { return v.id < grads_.size() && grads_[v.id].has_value(); }
  const Tensor& of(Var v) const;
  Var target() const { return target_; }

 private:
  std::vector<std::optional<Tensor>> grads_;
  Var target_;
};

/// Records a forward computation for reverse-mode differentiation.
///
/// Every op evaluates eagerly and appends a node; node ids are topologically
/// ordered by construction. A tape belongs to one thread and is rebuilt for
/// every forward pass.
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var variable(Tensor value) { return leaf(std::move(value), true); }

  /// x[Cin,H,W] * w[Cout,Cin,kh,kw] + b[Cout], zero padding.
  Var conv2d(Var x, Var w, Var b, Conv2dOptions opt = {});
  /// W[m,n] x[n] + b[m].
  Var dense(Var x, Var w, Var b);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var relu(Var x);
  /// Non-overlapping window x window max pooling over x[C,H,W].
  Var max_pool2d(Var x, std::size_t window);
  /// x[C,H,W] -> [C].
  Var global_avg_pool(Var x);
  Var softmax(Var x);
  Var log_softmax(Var x);
  Var exp(Var x);
  Var log(Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var x, double factor);
  Var mul(Var a, Var b);
  /// Sums out the listed axes; reducing every axis yields shape [1].
  Var sum_over(Var x, std::vector<std::size_t> axes);
  Var sum(Var x);
  Var max_over(Var x, std::size_t axis);
  Var reshape(Var x, Shape shape);
  /// Repeats x over trailing dimensions; x's shape must prefix `shape` (or x is a scalar).
  Var broadcast_to(Var x, Shape shape);
  /// Gathers flat elements of x into a rank-1 tensor.
  Var select(Var x, std::vector<std::size_t> indices);
  /// Inverse of select: zeros of `shape` with x added at flat `indices`.
  Var scatter(Var x, std::vector<std::size_t> indices, Shape shape);
  /// (x - min) / (max - min); all zeros when x is constant.
  Var minmax_normalize(Var x);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const TapeNode& node(Var v) const { return nodes_.at(v.id); }
  std::size_t size() const { return nodes_.size(); }

  /// Gradients of a scalar target with respect to every ancestor that
  /// depends on a requires_grad leaf.
  GradientBundle backward(Var target) const;
  /// Gradients for nodes lying on a path from any of `wrt` to `target`;
  /// `wrt` may name interior nodes.
  GradientBundle backward(Var target, std::span<const Var> wrt) const;
  /// As backward, but the gradient computation is itself recorded on this
  /// tape, so its results can be differentiated again.
  std::vector<Var> grad_graph(Var target, std::span<const Var> wrt);

  /// Hash of every piecewise-branch decision taken (ReLU signs, argmax
  /// choices). Equal signatures mean evaluation stayed on one smooth piece.
  std::uint64_t branch_signature() const;

 private:
  Var push(TapeNode node);
  const TapeNode& at(Var v) const { return nodes_.at(v.id); }
  std::vector<char> path_mask(Var target, std::span<const Var> wrt) const;
  GradientBundle run_backward(Var target, const std::vector<char>& on_path) const;
  Var vjp_graph(std::size_t node_id, Var grad, std::size_t input_slot);

  std::vector<TapeNode> nodes_;
};

}  // namespace camlab
