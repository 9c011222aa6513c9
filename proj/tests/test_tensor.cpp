#include <doctest.h>

#include <cmath>
#include <vector>

#include "grind/tensor.hpp"

using namespace grind;

TEST_SUITE("tensor") {

TEST_CASE("broadcast shapes follow trailing-alignment rules") {
  CHECK(broadcast_shapes({2, 3}, {3}) == Shape{2, 3});
  CHECK(broadcast_shapes({2, 1, 4}, {3, 1}) == Shape{2, 3, 4});
  CHECK(broadcast_shapes({1}, {5}) == Shape{5});
  CHECK_THROWS_AS(broadcast_shapes({2, 3}, {4}), ShapeError);
}

TEST_CASE("add broadcasts a row across a matrix") {
  const Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b = Tensor::from({3}, {10, 20, 30});
  const Tensor c = add(a, b);
  CHECK(c.values() == std::vector<double>{11, 22, 33, 14, 25, 36});
}

TEST_CASE("mul treats zero times negative infinity as zero") {
  const Tensor a = Tensor::from({2}, {0.0, 2.0});
  const Tensor b = Tensor::from({2}, {kNegInf, kNegInf});
  const Tensor c = mul(a, b);
  CHECK(c[0] == 0.0);
  CHECK(c[1] == kNegInf);
}

TEST_CASE("matmul matches a hand computation") {
  const Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b = Tensor::from({3, 2}, {7, 8, 9, 10, 11, 12});
  const Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 2});
  CHECK(c.values() == std::vector<double>{58, 64, 139, 154});
}

TEST_CASE("matmul skips zero entries so one-hot rows never touch -inf") {
  const Tensor onehot = Tensor::from({1, 3}, {0, 1, 0});
  const Tensor table = Tensor::from({3, 2}, {kNegInf, 1, 2, 3, kNegInf, 5});
  const Tensor picked = matmul(onehot, table);
  CHECK(picked.values() == std::vector<double>{2, 3});
}

TEST_CASE("reduce_to_shape undoes broadcasting by summation") {
  const Tensor g = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor row = reduce_to_shape(g, {3});
  CHECK(row.values() == std::vector<double>{5, 7, 9});
  const Tensor col = reduce_to_shape(g, {2, 1});
  CHECK(col.values() == std::vector<double>{6, 15});
  const Tensor all = reduce_to_shape(g, {1});
  CHECK(all[0] == 21.0);
}

TEST_CASE("logsumexp reduces an axis stably") {
  const Tensor t = Tensor::from({2, 2}, {0.0, 0.0, 1000.0, 1000.0});
  const Tensor r = logsumexp(t, 1);
  CHECK(r[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(r[1] == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("logsumexp of an all -inf slice is -inf") {
  const Tensor t = Tensor::from({2, 2}, {kNegInf, kNegInf, kNegInf, 0.0});
  const Tensor r = logsumexp(t, 1);
  CHECK(r[0] == kNegInf);
  CHECK(r[1] == 0.0);
}

TEST_CASE("logsumexp with a one-hot additive mask returns the picked entry exactly") {
  // Gathering in log space must be bit-exact: max of the masked row is the
  // picked element itself, the exp-sum is exactly 1, and m + log(1) == m.
  const Tensor x = Tensor::from({4}, {0.1234567890123456, -3.5, 7.25, -0.125});
  for (int k = 0; k < 4; ++k) {
    Tensor mask({4}, kNegInf);
    mask[k] = 0.0;
    const Tensor picked = logsumexp(add(x, mask), 0);
    CHECK(picked[0] == x[k]);
  }
}

TEST_CASE("softmax normalizes and log_softmax agrees") {
  const Tensor t = Tensor::from({3}, {1.0, 2.0, 3.0});
  const Tensor p = softmax(t, 0);
  double total = 0.0;
  for (std::int64_t i = 0; i < 3; ++i) total += p[i];
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  const Tensor lp = log_softmax(t, 0);
  for (std::int64_t i = 0; i < 3; ++i) {
    CHECK(std::exp(lp[i]) == doctest::Approx(p[i]).epsilon(1e-12));
  }
}

TEST_CASE("max_reduce picks the axis maximum") {
  const Tensor t = Tensor::from({2, 3}, {5, 1, 2, 0, 7, 3});
  const Tensor m = max_reduce(t, 1);
  CHECK(m.values() == std::vector<double>{5, 7});
  const Tensor m0 = max_reduce(t, 0);
  CHECK(m0.values() == std::vector<double>{5, 7, 3});
}

TEST_CASE("slice then concat reconstructs the original") {
  const Tensor t = Tensor::from({2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor left = slice(t, 1, 0, 2);
  const Tensor right = slice(t, 1, 2, 4);
  CHECK(left.values() == std::vector<double>{1, 2, 5, 6});
  CHECK(right.values() == std::vector<double>{3, 4, 7, 8});
  const Tensor back = concat({&left, &right}, 1);
  CHECK(back.values() == t.values());
}

TEST_CASE("reshape keeps contents and demands matching sizes") {
  const Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor r = reshape(t, {3, 2});
  CHECK(r.shape() == Shape{3, 2});
  CHECK(r.values() == t.values());
  CHECK_THROWS_AS(reshape(t, {4, 2}), ShapeError);
}

TEST_CASE("shape errors carry readable text") {
  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from({3}, {1, 2, 3});
  try {
    matmul(a, b);
    FAIL("expected a ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
  }
}

}  // TEST_SUITE
