#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "grind/rng.hpp"

using grind::Rng;

TEST_SUITE("rng") {

TEST_CASE("same seed gives same stream, different seed differs") {
  Rng a(42), b(42), c(43);
  bool any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    if (x != c.uniform()) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("uniform stays in [0,1) and fills the range") {
  Rng rng(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double x = rng.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("below covers all residues without bias artifacts") {
  Rng rng(11);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) {
    const auto k = rng.below(5);
    REQUIRE(k < 5);
    ++counts[static_cast<int>(k)];
  }
  for (int c : counts) {
    CHECK(c > 9000);  // expected 10000
    CHECK(c < 11000);
  }
}

TEST_CASE("normal has the right first two moments") {
  Rng rng(3);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("gamma mean matches its shape parameter") {
  Rng rng(5);
  for (double shape : {0.3, 1.0, 4.0}) {
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.gamma(shape);
      REQUIRE(x > 0.0);
      sum += x;
    }
    CHECK(sum / n == doctest::Approx(shape).epsilon(0.03));
  }
}

TEST_CASE("dirichlet draws live on the simplex") {
  Rng rng(9);
  for (int rep = 0; rep < 100; ++rep) {
    const auto p = rng.dirichlet(6, 0.2);
    REQUIRE(p.size() == 6);
    double total = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("categorical tracks the given probabilities") {
  Rng rng(13);
  const std::vector<double> probs{0.5, 0.3, 0.2};
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[rng.categorical(probs)];
  for (int k = 0; k < 3; ++k) {
    CHECK(static_cast<double>(counts[k]) / n == doctest::Approx(probs[k]).epsilon(0.05));
  }
}

TEST_CASE("shuffle permutes and depends on the seed") {
  std::vector<int> items(100);
  std::iota(items.begin(), items.end(), 0);
  std::vector<int> copy = items;
  Rng rng(17);
  rng.shuffle(copy);
  CHECK(copy != items);
  std::vector<int> sorted = copy;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == items);

  std::vector<int> again(100);
  std::iota(again.begin(), again.end(), 0);
  Rng rng2(17);
  rng2.shuffle(again);
  CHECK(again == copy);
}

}  // TEST_SUITE
