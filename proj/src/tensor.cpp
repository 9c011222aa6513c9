#include "grind/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace grind {

std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) {
    if (e < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (shape_size(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(values);
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

bool Tensor::log_space_valid() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) {
    return std::isfinite(v) || v == kNegInf;
  });
}

std::string Tensor::str() const {
  std::ostringstream os;
  os << shape_str(shape_) << '{';
  const std::int64_t n = std::min<std::int64_t>(size(), 16);
  for (std::int64_t i = 0; i < n; ++i) {
    if (i) os << ", ";
    os << data_[static_cast<std::size_t>(i)];
  }
  if (size() > n) os << ", ...";
  os << '}';
  return os.str();
}

std::size_t Tensor::offset(std::initializer_list<std::int64_t> idx) const {
  if (static_cast<std::int64_t>(idx.size()) != rank()) {
    throw ShapeError("index rank mismatch for shape " + shape_str(shape_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : idx) {
    off = off * static_cast<std::size_t>(shape_[axis]) + static_cast<std::size_t>(i);
    ++axis;
  }
  return off;
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t ra = a.size(), rb = b.size();
  const std::size_t r = std::max(ra, rb);
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::int64_t ea = i < r - ra ? 1 : a[i - (r - ra)];
    const std::int64_t eb = i < r - rb ? 1 : b[i - (r - rb)];
    if (ea != eb && ea != 1 && eb != 1) {
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[i] = std::max(ea, eb);
  }
  return out;
}

namespace {

// Row-major strides padded to `rank`, zeroed on broadcast axes.
std::vector<std::int64_t> broadcast_strides(const Shape& shape, const Shape& out) {
  const std::size_t r = out.size();
  const std::size_t pad = r - shape.size();
  std::vector<std::int64_t> strides(r, 0);
  std::int64_t s = 1;
  for (std::size_t i = shape.size(); i-- > 0;) {
    strides[pad + i] = shape[i] == 1 ? 0 : s;
    s *= shape[i];
  }
  return strides;
}

template <typename F>
void bcast_recurse(const Shape& out, const std::vector<std::int64_t>& sa,
                   const std::vector<std::int64_t>& sb, std::size_t axis,
                   const double* pa, const double* pb, double*& po, F f) {
  const std::int64_t n = out[axis];
  if (axis + 1 == out.size()) {
    const std::int64_t a = sa[axis], b = sb[axis];
    for (std::int64_t i = 0; i < n; ++i) *po++ = f(pa[i * a], pb[i * b]);
    return;
  }
  for (std::int64_t i = 0; i < n; ++i) {
    bcast_recurse(out, sa, sb, axis + 1, pa + i * sa[axis], pb + i * sb[axis], po, f);
  }
}

template <typename F>
Tensor bcast_binary(const Tensor& a, const Tensor& b, F f) {
  Shape out_shape = broadcast_shapes(a.shape(), b.shape());
  Tensor out(out_shape);
  if (out.size() == 0) return out;
  if (out_shape.empty()) {
    out[0] = f(a[0], b[0]);
    return out;
  }
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  double* po = out.data();
  bcast_recurse(out_shape, sa, sb, 0, a.data(), b.data(), po, f);
  return out;
}

Shape drop_axis(const Shape& shape, int axis) {
  Shape out;
  for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

}  // namespace

AxisSplit split_at_axis(const Shape& shape, int axis) {
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return bcast_binary(a, b, [](double x, double y) { return x + y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return bcast_binary(a, b, [](double x, double y) {
    // 0 * inf would give NaN; masked log-space cells rely on exp(-inf)=0
    // annihilating whatever multiplies it.
    if (x == 0.0 || y == 0.0) return 0.0;
    return x * y;
  });
}

Tensor reduce_to_shape(const Tensor& t, const Shape& shape) {
  if (t.shape() == shape) return t;
  const std::size_t r = t.shape().size();
  const std::size_t pad = r - shape.size();
  Tensor cur = t;
  for (std::size_t i = 0; i < r; ++i) {
    const std::int64_t target = i < pad ? 1 : shape[i - pad];
    if (cur.shape()[i] == target) continue;
    // Sum over axis i, keeping it with extent 1.
    const auto s = split_at_axis(cur.shape(), static_cast<int>(i));
    Shape kept = cur.shape();
    kept[i] = 1;
    Tensor next(kept);
    const double* src = cur.data();
    double* dst = next.data();
    for (std::int64_t o = 0; o < s.outer; ++o) {
      for (std::int64_t k = 0; k < s.n; ++k) {
        const double* row = src + (o * s.n + k) * s.inner;
        double* out_row = dst + o * s.inner;
        for (std::int64_t j = 0; j < s.inner; ++j) out_row[j] += row[j];
      }
    }
    cur = std::move(next);
  }
  return reshape(cur, shape);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul needs [m,k]x[k,n], got " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  }
  const std::int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor c(Shape{m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t kk = 0; kk < k; ++kk) {
      const double aik = pa[i * k + kk];
      if (aik == 0.0) continue;
      const double* brow = pb + kk * n;
      double* crow = pc + i * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Tensor map_unary(const Tensor& t, double (*f)(double)) {
  Tensor out(t.shape());
  const double* src = t.data();
  double* dst = out.data();
  for (std::int64_t i = 0; i < t.size(); ++i) dst[i] = f(src[i]);
  return out;
}

Tensor logsumexp(const Tensor& t, int axis) {
  const auto s = split_at_axis(t.shape(), axis);
  Tensor out(drop_axis(t.shape(), axis));
  const double* src = t.data();
  double* dst = out.data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t j = 0; j < s.inner; ++j) {
      double m = kNegInf;
      for (std::int64_t k = 0; k < s.n; ++k) {
        m = std::max(m, src[(o * s.n + k) * s.inner + j]);
      }
      double y;
      if (m == kNegInf) {
        y = kNegInf;
      } else {
        double sum = 0.0;
        for (std::int64_t k = 0; k < s.n; ++k) {
          sum += std::exp(src[(o * s.n + k) * s.inner + j] - m);
        }
        y = m + std::log(sum);
      }
      dst[o * s.inner + j] = y;
    }
  }
  return out;
}

Tensor max_reduce(const Tensor& t, int axis) {
  const auto s = split_at_axis(t.shape(), axis);
  Tensor out(drop_axis(t.shape(), axis));
  const double* src = t.data();
  double* dst = out.data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t j = 0; j < s.inner; ++j) {
      double m = kNegInf;
      for (std::int64_t k = 0; k < s.n; ++k) {
        m = std::max(m, src[(o * s.n + k) * s.inner + j]);
      }
      dst[o * s.inner + j] = m;
    }
  }
  return out;
}

Tensor softmax(const Tensor& t, int axis) {
  const auto s = split_at_axis(t.shape(), axis);
  Tensor lse = logsumexp(t, axis);
  Tensor out(t.shape());
  const double* src = t.data();
  const double* pl = lse.data();
  double* dst = out.data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t k = 0; k < s.n; ++k) {
      for (std::int64_t j = 0; j < s.inner; ++j) {
        const double z = pl[o * s.inner + j];
        const double x = src[(o * s.n + k) * s.inner + j];
        dst[(o * s.n + k) * s.inner + j] = z == kNegInf ? 0.0 : std::exp(x - z);
      }
    }
  }
  return out;
}

Tensor log_softmax(const Tensor& t, int axis) {
  const auto s = split_at_axis(t.shape(), axis);
  Tensor lse = logsumexp(t, axis);
  Tensor out(t.shape());
  const double* src = t.data();
  const double* pl = lse.data();
  double* dst = out.data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t k = 0; k < s.n; ++k) {
      for (std::int64_t j = 0; j < s.inner; ++j) {
        const double z = pl[o * s.inner + j];
        const double x = src[(o * s.n + k) * s.inner + j];
        dst[(o * s.n + k) * s.inner + j] = z == kNegInf ? kNegInf : x - z;
      }
    }
  }
  return out;
}

Tensor slice(const Tensor& t, int axis, std::int64_t start, std::int64_t stop) {
  const auto s = split_at_axis(t.shape(), axis);
  if (start < 0 || stop > s.n || start >= stop) {
    throw ShapeError("slice [" + std::to_string(start) + "," + std::to_string(stop) +
                     ") out of range on axis " + std::to_string(axis) + " of " +
                     shape_str(t.shape()));
  }
  Shape out_shape = t.shape();
  out_shape[axis] = stop - start;
  Tensor out(out_shape);
  const double* src = t.data();
  double* dst = out.data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t k = start; k < stop; ++k) {
      const double* row = src + (o * s.n + k) * s.inner;
      double* out_row = dst + (o * (stop - start) + (k - start)) * s.inner;
      std::copy(row, row + s.inner, out_row);
    }
  }
  return out;
}

Tensor concat(const std::vector<const Tensor*>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Shape out_shape = parts[0]->shape();
  if (axis < 0 || axis >= static_cast<int>(out_shape.size())) {
    throw ShapeError("concat axis " + std::to_string(axis) + " out of range");
  }
  std::int64_t total = 0;
  for (const Tensor* p : parts) {
    if (p->rank() != static_cast<std::int64_t>(out_shape.size())) {
      throw ShapeError("concat rank mismatch");
    }
    for (int i = 0; i < static_cast<int>(out_shape.size()); ++i) {
      if (i != axis && p->shape()[i] != out_shape[i]) {
        throw ShapeError("concat shape mismatch: " + shape_str(p->shape()) +
                         " vs " + shape_str(out_shape) + " on axis " + std::to_string(i));
      }
    }
    total += p->shape()[axis];
  }
  out_shape[axis] = total;
  Tensor out(out_shape);
  const auto s = split_at_axis(out_shape, axis);
  double* dst = out.data();
  std::int64_t at = 0;
  for (const Tensor* p : parts) {
    const std::int64_t pn = p->shape()[axis];
    const double* src = p->data();
    for (std::int64_t o = 0; o < s.outer; ++o) {
      std::copy(src + o * pn * s.inner, src + (o + 1) * pn * s.inner,
                dst + (o * s.n + at) * s.inner);
    }
    at += pn;
  }
  return out;
}

Tensor reshape(const Tensor& t, Shape shape) {
  if (shape_size(shape) != t.size()) {
    throw ShapeError("cannot reshape " + shape_str(t.shape()) + " to " + shape_str(shape));
  }
  return Tensor::from(std::move(shape), t.values());
}

}  // namespace grind
