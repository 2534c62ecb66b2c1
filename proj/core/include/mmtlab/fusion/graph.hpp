#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mmtlab/fusion/tensor.hpp"

namespace mmtlab::fusion {

/// Handle to a node of a Graph.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Tape of tensor operations. Nodes are appended in evaluation order, so the
/// reverse of creation order is a valid topological order for backward().
class Graph {
 public:
  Var leaf(Tensor2 value);
  /// A node that never receives a gradient.
  Var constant(Tensor2 value);

  const Tensor2& value(Var v) const;
  std::size_t node_count() const noexcept { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double s);
  Var one_minus(Var a);
  Var add_row(Var a, Var row);  // broadcast a 1 x cols row over every row of a
  Var mul_row(Var a, Var row);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var softmax_rows(Var a);
  /// (x - mean) / sqrt(var + eps) per row, biased variance.
  Var normalize_rows(Var a, double eps);
  Var concat_rows(Var top, Var bottom);
  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);

  /// Seeds d(output) = upstream and propagates to every node.
  void backward(Var output, const Tensor2& upstream);
  bool has_gradients() const noexcept { return !grads_.empty(); }
  /// Gradient of the last backward() output with respect to `v`.
  const Tensor2& grad(Var v) const;

 private:
  using BackwardFn = std::function<void(Graph&, const Tensor2& dout)>;

  struct Node {
    Tensor2 value;
    BackwardFn backward;  // empty for leaves and constants
    bool needs_grad = true;
  };

  Var push(Tensor2 value, BackwardFn fn, bool needs_grad = true);
  const Node& node(Var v) const;
  Tensor2& grad_slot(Var v);
  void accumulate(Var v, const Tensor2& g);

  std::vector<Node> nodes_;
  std::vector<Tensor2> grads_;
};

}  // namespace mmtlab::fusion
