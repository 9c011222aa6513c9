#include "grind/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace grind {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kMul: return "mul";
    case Op::kMatMul: return "matmul";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kLogSumExp: return "logsumexp";
    case Op::kSoftmax: return "softmax";
    case Op::kLogSoftmax: return "log_softmax";
    case Op::kMaxReduce: return "max";
    case Op::kSlice: return "slice";
    case Op::kConcat: return "concat";
    case Op::kReshape: return "reshape";
  }
  return "?";
}

namespace {

Shape reduced_shape(const Shape& in, int axis) {
  Shape out;
  for (int i = 0; i < static_cast<int>(in.size()); ++i) {
    if (i != axis) out.push_back(in[i]);
  }
  return out;
}

Tensor transpose2d(const Tensor& t) {
  const std::int64_t m = t.shape()[0], n = t.shape()[1];
  Tensor out(Shape{n, m});
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) out[j * m + i] = t[i * n + j];
  }
  return out;
}

}  // namespace

Node& Graph::node(NodeId id) {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
    throw GraphError("node id " + std::to_string(id) + " out of range");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

const Node& Graph::node(NodeId id) const {
  return const_cast<Graph*>(this)->node(id);
}

NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  forward_done_ = false;
  return static_cast<NodeId>(nodes_.size() - 1);
}

std::string Graph::describe(NodeId id) const {
  return std::string(op_name(node(id).op)) + " node " + std::to_string(id);
}

NodeId Graph::leaf(Tensor value, bool trainable, std::string name) {
  Node n;
  n.op = Op::kLeaf;
  n.out_shape = value.shape();
  n.value = std::move(value);
  n.trainable = trainable;
  n.name = std::move(name);
  return push(std::move(n));
}

void Graph::set_value(NodeId id, Tensor value) {
  Node& n = node(id);
  if (n.op != Op::kLeaf) throw GraphError(describe(id) + ": set_value on non-leaf");
  if (value.shape() != n.out_shape) {
    throw GraphError(describe(id) + ": set_value shape " + shape_str(value.shape()) +
                     " != leaf shape " + shape_str(n.out_shape));
  }
  n.value = std::move(value);
  forward_done_ = false;
}

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kAdd;
  n.inputs = {a, b};
  try {
    n.out_shape = broadcast_shapes(node(a).out_shape, node(b).out_shape);
  } catch (const ShapeError& e) {
    throw GraphError("add node " + std::to_string(nodes_.size()) + ": " + e.what());
  }
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMul;
  n.inputs = {a, b};
  try {
    n.out_shape = broadcast_shapes(node(a).out_shape, node(b).out_shape);
  } catch (const ShapeError& e) {
    throw GraphError("mul node " + std::to_string(nodes_.size()) + ": " + e.what());
  }
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Shape& sa = node(a).out_shape;
  const Shape& sb = node(b).out_shape;
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw GraphError("matmul node " + std::to_string(nodes_.size()) + ": " +
                     shape_str(sa) + " x " + shape_str(sb));
  }
  Node n;
  n.op = Op::kMatMul;
  n.inputs = {a, b};
  n.out_shape = {sa[0], sb[1]};
  return push(std::move(n));
}

NodeId Graph::exp(NodeId a) {
  Node n;
  n.op = Op::kExp;
  n.inputs = {a};
  n.out_shape = node(a).out_shape;
  return push(std::move(n));
}

NodeId Graph::log(NodeId a) {
  Node n;
  n.op = Op::kLog;
  n.inputs = {a};
  n.out_shape = node(a).out_shape;
  return push(std::move(n));
}

NodeId Graph::tanh(NodeId a) {
  Node n;
  n.op = Op::kTanh;
  n.inputs = {a};
  n.out_shape = node(a).out_shape;
  return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
  Node n;
  n.op = Op::kRelu;
  n.inputs = {a};
  n.out_shape = node(a).out_shape;
  return push(std::move(n));
}

NodeId Graph::logsumexp(NodeId a, int axis) {
  Node n;
  n.op = Op::kLogSumExp;
  n.inputs = {a};
  n.axis = axis;
  split_at_axis(node(a).out_shape, axis);  // validates
  n.out_shape = reduced_shape(node(a).out_shape, axis);
  return push(std::move(n));
}

NodeId Graph::softmax(NodeId a, int axis) {
  Node n;
  n.op = Op::kSoftmax;
  n.inputs = {a};
  n.axis = axis;
  split_at_axis(node(a).out_shape, axis);
  n.out_shape = node(a).out_shape;
  return push(std::move(n));
}

NodeId Graph::log_softmax(NodeId a, int axis) {
  Node n;
  n.op = Op::kLogSoftmax;
  n.inputs = {a};
  n.axis = axis;
  split_at_axis(node(a).out_shape, axis);
  n.out_shape = node(a).out_shape;
  return push(std::move(n));
}

NodeId Graph::max_reduce(NodeId a, int axis) {
  Node n;
  n.op = Op::kMaxReduce;
  n.inputs = {a};
  n.axis = axis;
  split_at_axis(node(a).out_shape, axis);
  n.out_shape = reduced_shape(node(a).out_shape, axis);
  return push(std::move(n));
}

NodeId Graph::slice(NodeId a, int axis, std::int64_t start, std::int64_t stop) {
  const Shape& in = node(a).out_shape;
  const auto s = split_at_axis(in, axis);
  if (start < 0 || stop > s.n || start >= stop) {
    throw GraphError("slice node " + std::to_string(nodes_.size()) + ": [" +
                     std::to_string(start) + "," + std::to_string(stop) +
                     ") on axis " + std::to_string(axis) + " of " + shape_str(in));
  }
  Node n;
  n.op = Op::kSlice;
  n.inputs = {a};
  n.axis = axis;
  n.start = start;
  n.stop = stop;
  n.out_shape = in;
  n.out_shape[axis] = stop - start;
  return push(std::move(n));
}

NodeId Graph::concat(const std::vector<NodeId>& parts, int axis) {
  if (parts.empty()) {
    throw GraphError("concat node " + std::to_string(nodes_.size()) + ": no inputs");
  }
  Shape out = node(parts[0]).out_shape;
  if (axis < 0 || axis >= static_cast<int>(out.size())) {
    throw GraphError("concat node " + std::to_string(nodes_.size()) + ": bad axis");
  }
  std::int64_t total = 0;
  for (NodeId p : parts) {
    const Shape& sp = node(p).out_shape;
    if (sp.size() != out.size()) {
      throw GraphError("concat node " + std::to_string(nodes_.size()) + ": rank mismatch");
    }
    for (int i = 0; i < static_cast<int>(out.size()); ++i) {
      if (i != axis && sp[i] != out[i]) {
        throw GraphError("concat node " + std::to_string(nodes_.size()) + ": " +
                         shape_str(sp) + " vs " + shape_str(out));
      }
    }
    total += sp[axis];
  }
  Node n;
  n.op = Op::kConcat;
  n.inputs = parts;
  n.axis = axis;
  n.out_shape = out;
  n.out_shape[axis] = total;
  return push(std::move(n));
}

NodeId Graph::reshape(NodeId a, Shape shape) {
  if (shape_size(shape) != shape_size(node(a).out_shape)) {
    throw GraphError("reshape node " + std::to_string(nodes_.size()) + ": " +
                     shape_str(node(a).out_shape) + " to " + shape_str(shape));
  }
  Node n;
  n.op = Op::kReshape;
  n.inputs = {a};
  n.out_shape = std::move(shape);
  return push(std::move(n));
}

void Graph::eval_node(NodeId id) {
  Node& n = node(id);
  const auto in = [&](std::size_t i) -> const Tensor& {
    return node(n.inputs[i]).value;
  };
  switch (n.op) {
    case Op::kLeaf:
      if (n.value.shape() != n.out_shape) {
        throw GraphError(describe(id) + ": leaf value not set");
      }
      return;
    case Op::kAdd: n.value = grind::add(in(0), in(1)); return;
    case Op::kMul: n.value = grind::mul(in(0), in(1)); return;
    case Op::kMatMul: n.value = grind::matmul(in(0), in(1)); return;
    case Op::kExp: n.value = map_unary(in(0), [](double x) { return std::exp(x); }); return;
    case Op::kLog: n.value = map_unary(in(0), [](double x) { return std::log(x); }); return;
    case Op::kTanh: n.value = map_unary(in(0), [](double x) { return std::tanh(x); }); return;
    case Op::kRelu:
      n.value = map_unary(in(0), [](double x) { return x > 0.0 ? x : 0.0; });
      return;
    case Op::kLogSumExp: n.value = grind::logsumexp(in(0), n.axis); return;
    case Op::kSoftmax: n.value = grind::softmax(in(0), n.axis); return;
    case Op::kLogSoftmax: n.value = grind::log_softmax(in(0), n.axis); return;
    case Op::kMaxReduce: n.value = grind::max_reduce(in(0), n.axis); return;
    case Op::kSlice: n.value = grind::slice(in(0), n.axis, n.start, n.stop); return;
    case Op::kConcat: {
      std::vector<const Tensor*> parts;
      parts.reserve(n.inputs.size());
      for (NodeId p : n.inputs) parts.push_back(&node(p).value);
      n.value = grind::concat(parts, n.axis);
      return;
    }
    case Op::kReshape: n.value = grind::reshape(in(0), n.out_shape); return;
  }
}

void Graph::forward() {
  for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id) eval_node(id);
  forward_done_ = true;
}

const Tensor& Graph::value(NodeId id) const {
  const Node& n = node(id);
  if (n.value.shape() != n.out_shape) {
    throw GraphError(describe(id) + ": value not computed; call forward()");
  }
  return n.value;
}

const Tensor& Graph::grad(NodeId id) const { return node(id).grad; }

void Graph::backprop_node(NodeId id) {
  Node& n = node(id);
  if (n.op == Op::kLeaf) return;
  Tensor g = n.grad;
  if (n.grad_scale != 1.0) {
    g = grind::mul(g, Tensor::scalar(n.grad_scale));
  }
  const auto in_val = [&](std::size_t i) -> const Tensor& {
    return node(n.inputs[i]).value;
  };
  const auto accumulate = [&](std::size_t i, const Tensor& contribution) {
    Node& src = node(n.inputs[i]);
    src.grad = grind::add(src.grad, reduce_to_shape(contribution, src.out_shape));
  };
  switch (n.op) {
    case Op::kLeaf:
      return;
    case Op::kAdd:
      accumulate(0, g);
      accumulate(1, g);
      return;
    case Op::kMul:
      accumulate(0, grind::mul(g, in_val(1)));
      accumulate(1, grind::mul(g, in_val(0)));
      return;
    case Op::kMatMul:
      accumulate(0, grind::matmul(g, transpose2d(in_val(1))));
      accumulate(1, grind::matmul(transpose2d(in_val(0)), g));
      return;
    case Op::kExp:
      accumulate(0, grind::mul(g, n.value));
      return;
    case Op::kLog: {
      Tensor inv = map_unary(in_val(0), [](double x) { return 1.0 / x; });
      accumulate(0, grind::mul(g, inv));
      return;
    }
    case Op::kTanh: {
      Tensor d = map_unary(n.value, [](double y) { return 1.0 - y * y; });
      accumulate(0, grind::mul(g, d));
      return;
    }
    case Op::kRelu: {
      Tensor d = map_unary(in_val(0), [](double x) { return x > 0.0 ? 1.0 : 0.0; });
      accumulate(0, grind::mul(g, d));
      return;
    }
    case Op::kLogSumExp: {
      // Softmax identity: d/dx_k = exp(x_k - y). Cells with y = -inf carry
      // no probability mass and propagate nothing.
      const Tensor& x = in_val(0);
      const auto s = split_at_axis(x.shape(), n.axis);
      Tensor dx(x.shape());
      for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t j = 0; j < s.inner; ++j) {
          const double y = n.value[o * s.inner + j];
          const double gy = g[o * s.inner + j];
          if (y == kNegInf || gy == 0.0) continue;
          for (std::int64_t k = 0; k < s.n; ++k) {
            const std::int64_t at = (o * s.n + k) * s.inner + j;
            const double xv = x[at];
            dx[at] = xv == kNegInf ? 0.0 : gy * std::exp(xv - y);
          }
        }
      }
      accumulate(0, dx);
      return;
    }
    case Op::kSoftmax: {
      // dx = y * (g - sum(g*y) along axis)
      const auto s = split_at_axis(n.out_shape, n.axis);
      Tensor dx(n.out_shape);
      for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t j = 0; j < s.inner; ++j) {
          double dot = 0.0;
          for (std::int64_t k = 0; k < s.n; ++k) {
            const std::int64_t at = (o * s.n + k) * s.inner + j;
            dot += g[at] * n.value[at];
          }
          for (std::int64_t k = 0; k < s.n; ++k) {
            const std::int64_t at = (o * s.n + k) * s.inner + j;
            dx[at] = n.value[at] * (g[at] - dot);
          }
        }
      }
      accumulate(0, dx);
      return;
    }
    case Op::kLogSoftmax: {
      // dx = g - exp(y) * sum(g) along axis
      const auto s = split_at_axis(n.out_shape, n.axis);
      Tensor dx(n.out_shape);
      for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t j = 0; j < s.inner; ++j) {
          double gsum = 0.0;
          for (std::int64_t k = 0; k < s.n; ++k) {
            gsum += g[(o * s.n + k) * s.inner + j];
          }
          for (std::int64_t k = 0; k < s.n; ++k) {
            const std::int64_t at = (o * s.n + k) * s.inner + j;
            const double y = n.value[at];
            dx[at] = g[at] - (y == kNegInf ? 0.0 : std::exp(y) * gsum);
          }
        }
      }
      accumulate(0, dx);
      return;
    }
    case Op::kMaxReduce: {
      // Subgradient routed to the first attaining element.
      const Tensor& x = in_val(0);
      const auto s = split_at_axis(x.shape(), n.axis);
      Tensor dx(x.shape());
      for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t j = 0; j < s.inner; ++j) {
          const double m = n.value[o * s.inner + j];
          for (std::int64_t k = 0; k < s.n; ++k) {
            const std::int64_t at = (o * s.n + k) * s.inner + j;
            if (x[at] == m) {
              dx[at] = g[o * s.inner + j];
              break;
            }
          }
        }
      }
      accumulate(0, dx);
      return;
    }
    case Op::kSlice: {
      const Tensor& x = in_val(0);
      const auto s = split_at_axis(x.shape(), n.axis);
      Tensor dx(x.shape());
      const std::int64_t w = n.stop - n.start;
      for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t k = 0; k < w; ++k) {
          const double* src = g.data() + (o * w + k) * s.inner;
          double* dst = dx.data() + (o * s.n + n.start + k) * s.inner;
          std::copy(src, src + s.inner, dst);
        }
      }
      accumulate(0, dx);
      return;
    }
    case Op::kConcat: {
      const auto s = split_at_axis(n.out_shape, n.axis);
      std::int64_t at = 0;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        const Shape& sp = node(n.inputs[i]).out_shape;
        const std::int64_t w = sp[n.axis];
        Tensor part(sp);
        for (std::int64_t o = 0; o < s.outer; ++o) {
          const double* src = g.data() + (o * s.n + at) * s.inner;
          std::copy(src, src + w * s.inner, part.data() + o * w * s.inner);
        }
        accumulate(i, part);
        at += w;
      }
      return;
    }
    case Op::kReshape:
      accumulate(0, grind::reshape(g, node(n.inputs[0]).out_shape));
      return;
  }
}

void Graph::backward(NodeId output) {
  if (!forward_done_) forward();
  Node& out = node(output);
  if (shape_size(out.out_shape) != 1) {
    throw GraphError(describe(output) + ": backward needs a scalar output, got shape " +
                     shape_str(out.out_shape));
  }
  for (Node& n : nodes_) n.grad = Tensor(n.out_shape);
  out.grad = Tensor::full(out.out_shape, 1.0);
  for (NodeId id = output; id >= 0; --id) backprop_node(id);
}

std::vector<NodeId> Graph::trainable_leaves() const {
  std::vector<NodeId> out;
  for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id) {
    if (nodes_[static_cast<std::size_t>(id)].trainable) out.push_back(id);
  }
  return out;
}

GradCheckReport Graph::check_gradients(NodeId output, double epsilon, double tolerance,
                                       double abs_floor) {
  forward();
  backward(output);
  GradCheckReport report;
  for (NodeId id : trainable_leaves()) {
    Node& n = node(id);
    LeafCheck check;
    check.id = id;
    check.name = n.name.empty() ? describe(id) : n.name;
    const Tensor analytic = n.grad;
    for (std::int64_t i = 0; i < n.value.size(); ++i) {
      const double saved = n.value[i];
      n.value[i] = saved + epsilon;
      forward();
      const double hi = value(output)[0];
      n.value[i] = saved - epsilon;
      forward();
      const double lo = value(output)[0];
      n.value[i] = saved;
      const double numeric = (hi - lo) / (2.0 * epsilon);
      const double dev = std::abs(analytic[i] - numeric);
      if (dev > check.max_abs_dev) {
        check.max_abs_dev = dev;
        check.worst_analytic = analytic[i];
        check.worst_numeric = numeric;
      }
      const double scale = std::max(std::abs(analytic[i]), std::abs(numeric));
      if (dev > std::max(abs_floor, tolerance * scale)) check.pass = false;
    }
    report.pass = report.pass && check.pass;
    report.leaves.push_back(std::move(check));
  }
  forward();  // restore cached values
  return report;
}

std::string GradCheckReport::str() const {
  std::ostringstream os;
  for (const auto& leaf : leaves) {
    os << (leaf.pass ? "ok  " : "FAIL") << ' ' << leaf.name << " max_dev=" << leaf.max_abs_dev
       << " (analytic=" << leaf.worst_analytic << " numeric=" << leaf.worst_numeric << ")\n";
  }
  return os.str();
}

}  // namespace grind
