// Reverse-mode autodiff over Tensor values. A Graph is an append-only arena
// of nodes; inputs always precede their consumers, so forward evaluation is
// a single sweep and backward a reverse sweep. Shapes are checked at node
// creation time, never during forward.
//
// Conventions the rest of the toolkit depends on:
//   - everything is double precision,
//   - -inf is a legal log-space value: exp(-inf) = 0 with zero gradient,
//   - log-sum-exp gradients use the softmax identity, so -inf inputs are
//     safe on the backward path as well,
//   - reductions run in ascending index order, which makes batched and
//     per-sentence chart computations bit-identical.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "grind/tensor.hpp"

namespace grind {

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using NodeId = std::int32_t;

enum class Op {
  kLeaf,
  kAdd,
  kMul,
  kMatMul,
  kExp,
  kLog,
  kTanh,
  kRelu,
  kLogSumExp,
  kSoftmax,
  kLogSoftmax,
  kMaxReduce,
  kSlice,
  kConcat,
  kReshape,
};

const char* op_name(Op op);

struct Node {
  Op op = Op::kLeaf;
  std::vector<NodeId> inputs;
  Shape out_shape;
  Tensor value;
  Tensor grad;
  bool trainable = false;
  std::string name;          // leaves only
  int axis = -1;             // reductions / softmax / concat
  std::int64_t start = 0;    // slice
  std::int64_t stop = 0;     // slice
  double grad_scale = 1.0;   // test hook, see Graph::set_grad_scale_for_test
};

struct LeafCheck {
  NodeId id = -1;
  std::string name;
  double max_abs_dev = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<LeafCheck> leaves;
  bool pass = true;
  std::string str() const;
};

class Graph {
 public:
  NodeId leaf(Tensor value, bool trainable = false, std::string name = {});
  NodeId constant(Tensor value) { return leaf(std::move(value)); }
  NodeId constant_scalar(double v) { return leaf(Tensor::scalar(v)); }

  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId tanh(NodeId a);
  NodeId relu(NodeId a);
  NodeId logsumexp(NodeId a, int axis);
  NodeId softmax(NodeId a, int axis);
  NodeId log_softmax(NodeId a, int axis);
  NodeId max_reduce(NodeId a, int axis);
  NodeId slice(NodeId a, int axis, std::int64_t start, std::int64_t stop);
  NodeId concat(const std::vector<NodeId>& parts, int axis);
  NodeId reshape(NodeId a, Shape shape);

  // Replaces a leaf's value; the shape is fixed at leaf creation.
  void set_value(NodeId id, Tensor value);

  // Evaluates every node in topological (= insertion) order. Intermediate
  // values stay cached for backward.
  void forward();

  // Populates gradients of all nodes w.r.t. a size-1 output. Leaves not on
  // any path to the output get a zero gradient.
  void backward(NodeId output);

  const Tensor& value(NodeId id) const;
  const Tensor& grad(NodeId id) const;
  const Shape& shape_of(NodeId id) const { return node(id).out_shape; }

  std::size_t size() const { return nodes_.size(); }
  std::vector<NodeId> trainable_leaves() const;
  const std::string& name_of(NodeId id) const { return node(id).name; }

  // Central finite differences vs backward() for every trainable leaf.
  // A leaf fails when some element deviates by more than
  // max(abs_floor, tolerance * max(|analytic|, |numeric|)).
  GradCheckReport check_gradients(NodeId output, double epsilon, double tolerance,
                                  double abs_floor = 1e-7);

  // Multiplies the gradient this node propagates to its inputs. Exists only
  // as a negative control for check_gradients tests; never set in real code.
  void set_grad_scale_for_test(NodeId id, double scale) { node(id).grad_scale = scale; }

 private:
  Node& node(NodeId id);
  const Node& node(NodeId id) const;
  NodeId push(Node n);
  std::string describe(NodeId id) const;
  void eval_node(NodeId id);
  void backprop_node(NodeId id);

  std::vector<Node> nodes_;
  bool forward_done_ = false;
};

}  // namespace grind
