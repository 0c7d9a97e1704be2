#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "varnn/matrix.hpp"
#include "varnn/rng.hpp"

using namespace varnn;

TEST_CASE("affine computes W x + b") {
  SUBCASE("identity matrix passes the vector through") {
    CHECK(affine(Matrix::identity(2), Vector{3.0, -1.0}) == Vector{3.0, -1.0});
  }
  SUBCASE("zero weights leave only the bias") {
    CHECK(affine(Matrix(2, 3), Vector{1, 2, 3}, Vector{5, 5}) == Vector{5, 5});
  }
  SUBCASE("hand-computed 2x2 case") {
    Matrix w(2, 2);
    w(0, 0) = 1; w(0, 1) = 2; w(1, 0) = 3; w(1, 1) = 4;
    CHECK(affine(w, Vector{1, 1}, Vector{0, 0}) == Vector{3, 7});
  }
  SUBCASE("dimension mismatch names both shapes") {
    try {
      affine(Matrix(2, 3), Vector{1, 2});
      FAIL("expected shape_error");
    } catch (const shape_error& e) {
      std::string msg = e.what();
      CHECK(msg.find("2x3") != std::string::npos);
      CHECK(msg.find("2") != std::string::npos);
    }
    CHECK_THROWS_AS(affine(Matrix(2, 2), Vector{1, 2}, Vector{1, 2, 3}), shape_error);
  }
}

TEST_CASE("affine is linear") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix w = testsupport::random_matrix(4, 6, rng);
    Vector x = testsupport::random_vector(6, rng);
    Vector y = testsupport::random_vector(6, rng);
    const double a = rng.uniform(-2, 2);
    Vector combo(6);
    for (std::size_t i = 0; i < 6; ++i) combo[i] = a * x[i] + y[i];
    Vector lhs = affine(w, combo);
    Vector wx = affine(w, x), wy = affine(w, y);
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(lhs[i] == doctest::Approx(a * wx[i] + wy[i]).epsilon(1e-10));
  }
}

TEST_CASE("elementwise kernels") {
  CHECK(sigm(Vector{0, 0}) == Vector{0.5, 0.5});
  CHECK(hadamard(Vector{2, 3}, Vector{4, 0}) == Vector{8, 0});
  CHECK(vtanh(Vector{0.5})[0] == doctest::Approx(0.46212).epsilon(1e-5));
  CHECK(one_minus(Vector{0.25, 1.0}) == Vector{0.75, 0.0});
  CHECK(add(Vector{1, 2}, Vector{3, 4}) == Vector{4, 6});
  CHECK_THROWS_AS(hadamard(Vector{1}, Vector{1, 2}), shape_error);
  CHECK_THROWS_AS(add(Vector{1}, Vector{1, 2}), shape_error);
}

TEST_CASE("matvec_transposed agrees with the explicit transpose") {
  Rng rng(7);
  Matrix w = testsupport::random_matrix(3, 5, rng);
  Vector y = testsupport::random_vector(3, rng);
  Matrix wt(5, 3);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 5; ++c) wt(c, r) = w(r, c);
  CHECK(matvec_transposed(w, y) == affine(wt, y));
  CHECK_THROWS_AS(matvec_transposed(w, Vector{1, 2}), shape_error);
}

TEST_CASE("add_outer accumulates y x^T") {
  Matrix acc(2, 3, 1.0);
  add_outer(acc, Vector{1, 2}, Vector{3, 4, 5});
  CHECK(acc(0, 0) == 4.0);
  CHECK(acc(1, 2) == 11.0);
  CHECK_THROWS_AS(add_outer(acc, Vector{1}, Vector{1, 2, 3}), shape_error);
}

TEST_CASE("softmax_xent") {
  SUBCASE("uniform logits over 4 classes") {
    auto r = softmax_xent(Vector{1.5, 1.5, 1.5, 1.5}, 0);
    for (double p : r.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("two-class hand case") {
    auto r = softmax_xent(Vector{0.0, std::log(2.0)}, 1);
    CHECK(r.probs[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(r.probs[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.loss == doctest::Approx(std::log(1.5)).epsilon(1e-12));
  }
  SUBCASE("shift invariance") {
    Rng rng(3);
    Vector logits = testsupport::random_vector(6, rng, 2.0);
    auto base = softmax_xent(logits, 2);
    Vector shifted = logits;
    for (double& v : shifted) v += 13.75;
    auto moved = softmax_xent(shifted, 2);
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(moved.probs[i] == doctest::Approx(base.probs[i]).epsilon(1e-12));
    CHECK(moved.loss == doctest::Approx(base.loss).epsilon(1e-12));
  }
  SUBCASE("probs form a distribution") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      Vector logits = testsupport::random_vector(8, rng, 20.0);
      auto r = softmax_xent(logits, rng.next_index(8));
      double sum = 0;
      for (double p : r.probs) {
        CHECK(p >= 0.0);
        sum += p;
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
      CHECK(all_finite(r.probs));
    }
  }
  SUBCASE("target out of range") {
    CHECK_THROWS_AS(softmax_xent(Vector{1, 2}, 2), std::out_of_range);
  }
}

TEST_CASE("sum_sq") {
  Matrix m(1, 2);
  m(0, 0) = 3;
  m(0, 1) = 4;
  CHECK(sum_sq(m) == 25.0);
  CHECK(sum_sq(Matrix(3, 3)) == 0.0);
  for (double& v : m.data()) v *= 2.0;
  CHECK(sum_sq(m) == 100.0);
}
