#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "varnn/rng.hpp"

using namespace varnn;

TEST_CASE("equal seeds give identical streams") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(123), d(124);
  bool all_equal = true;
  for (int i = 0; i < 10; ++i) all_equal &= c.next_u64() == d.next_u64();
  CHECK_FALSE(all_equal);
}

TEST_CASE("next_double stays in [0,1)") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    double v = rng.next_double();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("sample_mask") {
  SUBCASE("p=0 keeps everything at exactly 1") {
    Rng rng(1);
    MaskVector m = sample_mask(64, 0.0, rng);
    for (double v : m.values) CHECK(v == 1.0);
  }
  SUBCASE("p=0.5 support is {0, 2}") {
    Rng rng(2);
    MaskVector m = sample_mask(1000, 0.5, rng);
    for (double v : m.values) CHECK((v == 0.0 || v == 2.0));
  }
  SUBCASE("sample mean near 1 for p=0.5, len 10000") {
    Rng rng(3);
    MaskVector m = sample_mask(10000, 0.5, rng);
    double mean = 0;
    for (double v : m.values) mean += v;
    mean /= 10000.0;
    CHECK(std::abs(mean - 1.0) < 0.05);
  }
  SUBCASE("consumes exactly len draws") {
    Rng a(9), b(9);
    sample_mask(17, 0.3, a);
    for (int i = 0; i < 17; ++i) b.next_double();
    CHECK(a.next_u64() == b.next_u64());
  }
  SUBCASE("invalid probability") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_mask(4, 1.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_mask(4, 1.5, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_mask(4, -0.1, rng), std::invalid_argument);
  }
  SUBCASE("equal seeds give bit-identical mask sequences") {
    Rng a(77), b(77);
    for (int i = 0; i < 5; ++i)
      CHECK(sample_mask(32, 0.4, a).values == sample_mask(32, 0.4, b).values);
  }
}

TEST_CASE("p=0 mask is the multiplicative identity") {
  Rng rng(21);
  MaskVector m = sample_mask(16, 0.0, rng);
  Vector x = testsupport::random_vector(16, rng, 3.0);
  CHECK(apply_mask(x, m) == x);
}

TEST_CASE("masked vectors are unbiased") {
  // mean over many masks of x ⊙ m should converge to x entrywise; the
  // tolerance is 3 sigma of the estimator, sigma² = x_i² p/((1-p)K)
  Rng rng(31);
  const double p = 0.3;
  const int k = 20000;
  Vector x = testsupport::random_vector(8, rng, 2.0);
  Vector mean(8, 0.0);
  for (int i = 0; i < k; ++i) {
    MaskVector m = sample_mask(8, p, rng);
    for (std::size_t j = 0; j < 8; ++j) mean[j] += x[j] * m.values[j];
  }
  for (std::size_t j = 0; j < 8; ++j) {
    mean[j] /= k;
    const double sigma = std::abs(x[j]) * std::sqrt(p / ((1.0 - p) * k));
    CHECK(std::abs(mean[j] - x[j]) <= 3.0 * sigma + 1e-12);
  }
}

TEST_CASE("shuffle is seed-deterministic and a permutation") {
  std::vector<int> a{1, 2, 3, 4, 5, 6, 7, 8}, b = a, sorted = a;
  Rng ra(55), rb(55);
  shuffle(a, ra);
  shuffle(b, rb);
  CHECK(a == b);
  std::sort(b.begin(), b.end());
  CHECK(b == sorted);
}
