// Dense row-major tensors of 64-bit floats. The only value type the
// autodiff graph and the chart code operate on. -inf is a legal value in
// log-space tensors; NaN is always a bug.
#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace grind {

using Shape = std::vector<std::int64_t>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::int64_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)),
        data_(static_cast<std::size_t>(shape_size(shape_)), fill) {}

  static Tensor scalar(double v) {
    Tensor t(Shape{1});
    t.data_[0] = v;
    return t;
  }
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor full(Shape shape, double v) { return Tensor(std::move(shape), v); }

  const Shape& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  double& at(std::initializer_list<std::int64_t> idx) { return data_[offset(idx)]; }
  double at(std::initializer_list<std::int64_t> idx) const { return data_[offset(idx)]; }

  const std::vector<double>& values() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  // Finite or -inf everywhere; the invariant for log-space arrays.
  bool log_space_valid() const;

  std::string str() const;

 private:
  std::size_t offset(std::initializer_list<std::int64_t> idx) const;

  Shape shape_;
  std::vector<double> data_;
};

// Numpy-style broadcast of two shapes; throws ShapeError on mismatch.
Shape broadcast_shapes(const Shape& a, const Shape& b);

// Decomposition of a shape around one axis: extents before it, of it, after it.
struct AxisSplit {
  std::int64_t outer, n, inner;
};
AxisSplit split_at_axis(const Shape& shape, int axis);

// Elementwise with broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// Sums `t` down to `shape` (the reverse of broadcasting); used by gradients.
Tensor reduce_to_shape(const Tensor& t, const Shape& shape);

// Rank-2 only. Accumulation over the inner dimension runs in index order,
// which keeps batched and single-sentence paths bit-identical.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor map_unary(const Tensor& t, double (*f)(double));

// Reductions over one axis (the axis is removed from the shape). Reduction
// order is ascending along the axis.
Tensor logsumexp(const Tensor& t, int axis);
Tensor max_reduce(const Tensor& t, int axis);
Tensor softmax(const Tensor& t, int axis);
Tensor log_softmax(const Tensor& t, int axis);

Tensor slice(const Tensor& t, int axis, std::int64_t start, std::int64_t stop);
Tensor concat(const std::vector<const Tensor*>& parts, int axis);
Tensor reshape(const Tensor& t, Shape shape);

}  // namespace grind
