#pragma once

#include <functional>
#include <span>
#include <vector>

#include "susl/array.hpp"

namespace susl {

/// Output length of a strided 1d convolution.
int conv1d_output_length(int length, int kernel, int stride, int padding);

/// Output length of a strided transposed 1d convolution.
int transposed_conv1d_output_length(int length, int kernel, int stride, int padding, int output_padding);

/// Record of a forward computation with exact reverse-mode gradients.
///
/// Nodes are appended in evaluation order, so node ids form a topological
/// order of the graph; backward() walks them once in reverse. Every forward
/// op verifies that its output is finite (overflow raises NumericError
/// instead of propagating NaN/inf). A tape is single-threaded; independent
/// tapes may run on independent threads.
class Tape {
 public:
  using NodeId = int32_t;

  /// Leaf holding an input or parameter value.
  NodeId leaf(Array value);
  NodeId leaf_scalar(double v) { return leaf(Array::scalar(v)); }

  // Elementwise arithmetic. add/sub also accept a row vector (d) or (1, d)
  // second operand against a (n, d) first operand, broadcast over rows;
  // this is the only broadcast form supported.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId add_const(NodeId a, double constant);

  NodeId matmul(NodeId a, NodeId b);  // (m,k) x (k,n) -> (m,n)

  // x: (batch, in_channels, length) or (in_channels, length);
  // w: (out_channels, in_channels, kernel); optional bias (out_channels).
  NodeId conv1d(NodeId x, NodeId w, int stride, int padding);
  NodeId conv1d(NodeId x, NodeId w, NodeId bias, int stride, int padding);

  // x: (batch, in_channels, length) or (in_channels, length);
  // w: (in_channels, out_channels, kernel); optional bias (out_channels).
  // The two overloads differ in arity so NodeId/int calls never collide.
  NodeId transposed_conv1d(NodeId x, NodeId w, int stride, int padding, int output_padding);
  NodeId transposed_conv1d(NodeId x, NodeId w, NodeId bias, int stride, int padding, int output_padding);

  NodeId relu(NodeId a);      // relu'(0) == 0
  NodeId softplus(NodeId a);  // log(1 + e^x), overflow-safe
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId softmax(NodeId a, int axis);      // max-subtracted
  NodeId log_softmax(NodeId a, int axis);  // logits - logsumexp(logits)

  NodeId sum(NodeId a);                 // all elements -> scalar
  NodeId mean(NodeId a);                // all elements -> scalar
  NodeId sum_axis(NodeId a, int axis);  // reduce one axis away
  NodeId concat(std::span<const NodeId> parts, int axis);
  NodeId reshape(NodeId a, std::vector<int> shape);

  const Array& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  size_t node_count() const { return nodes_.size(); }

  /// Reverse sweep from a scalar loss. Gradients of earlier sweeps are
  /// discarded. Raises ShapeError if the loss is not a scalar.
  void backward(NodeId loss);

  /// Gradient of the last backward() target w.r.t. node `id` (zeros if the
  /// node does not influence the loss).
  Array grad(NodeId id) const;

  /// backward() + grad() for a set of leaves, in order.
  std::vector<Array> gradients(NodeId loss, std::span<const NodeId> wrt);

 private:
  struct Node {
    Array value;
    std::function<void(Tape&, const Array&)> backprop;  // null for leaves
  };

  NodeId push(Array value, const char* op, std::function<void(Tape&, const Array&)> backprop);
  void add_grad(NodeId id, const Array& g);
  void add_grad_to(NodeId id, std::function<void(Array&)> fn);
  Array& grad_slot(NodeId id);

  std::vector<Node> nodes_;
  std::vector<Array> grads_;
  std::vector<char> has_grad_;
};

}  // namespace susl
