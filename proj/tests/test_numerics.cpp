#include <cmath>
#include <random>

#include "doctest.h"
#include "weightsmith/numerics.hpp"

using namespace weightsmith;

TEST_CASE("softmax of equal scores is uniform") {
  Matrix s(2, 1);
  s << 0, 0;
  for (double lam : {0.1, 1.0, 37.0}) {
    const Matrix p = temp_softmax(s, Temperature{lam});
    CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
  }
}

TEST_CASE("softmax closed form e^l / (e^l + 1)") {
  Matrix s(2, 1);
  s << 1, 0;
  const Matrix p = temp_softmax(s, Temperature{std::log(9999.0)});
  CHECK(std::abs(p(0, 0) - 0.9999) < 1e-14);
  CHECK(std::abs(p(1, 0) - 0.0001) < 1e-14);
}

TEST_CASE("softmax approaches argmax") {
  Matrix s(3, 1);
  s << 3, 1, 1;
  const Matrix p = temp_softmax(s, Temperature{1e4});
  CHECK(std::abs(p(0, 0) - 1.0) < 1e-9);
  CHECK(p(1, 0) < 1e-9);
  CHECK(p(2, 0) < 1e-9);
}

TEST_CASE("softmax normalizes columns, not rows") {
  Matrix s(2, 2);
  s << 0, 5, 1, 5;
  const Matrix p = temp_softmax(s, Temperature{1.0});
  CHECK(std::abs(p.col(0).sum() - 1.0) < 1e-15);
  CHECK(p(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("softmax rejects non-finite scores") {
  Matrix s(2, 1);
  s << 0, std::nan("");
  CHECK_THROWS_AS(temp_softmax(s, Temperature{1.0}), Error);
  s << 0, INFINITY;
  try {
    temp_softmax(s, Temperature{1.0});
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidInput);
  }
}

TEST_CASE("softmax survives huge scores") {
  Matrix s(2, 1);
  s << 1e5, 0;
  const Matrix p = temp_softmax(s, Temperature{100.0});
  CHECK(p.allFinite());
  CHECK(p(0, 0) == 1.0);
}

TEST_CASE("temperature must be positive and finite") {
  CHECK_THROWS_AS(Temperature{0.0}, Error);
  CHECK_THROWS_AS(Temperature{-1.0}, Error);
  CHECK_THROWS_AS(Temperature{INFINITY}, Error);
}

TEST_CASE("property: columns are probability vectors") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index r = 1 + trial % 9, c = 1 + trial % 5;
    Matrix s = Matrix::NullaryExpr(r, c, [&] { return u(rng); });
    const Matrix p = temp_softmax(s, Temperature{0.01 + trial * 0.5});
    CHECK((p.array() >= 0).all());
    for (Eigen::Index j = 0; j < c; ++j) CHECK(std::abs(p.col(j).sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("property: the max entry sharpens with lambda") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix s = Matrix::NullaryExpr(6, 1, [&] { return n(rng); });
    Eigen::Index arg;
    s.col(0).maxCoeff(&arg);
    double prev = 0;
    for (double lam : {1.0, 10.0, 100.0, 1000.0}) {
      const double top = temp_softmax(s, Temperature{lam})(arg, 0);
      CHECK(top >= prev);
      prev = top;
    }
  }
}

TEST_CASE("leaky relu and its inverse") {
  Matrix x(1, 2);
  x << 2, -2;
  const Matrix y = leaky_relu(x, LeakyAlpha{0.5});
  CHECK(y(0, 0) == 2.0);
  CHECK(y(0, 1) == -1.0);
  const Matrix back = leaky_relu_inverse(y, LeakyAlpha{0.5});
  CHECK(back(0, 0) == 2.0);
  CHECK(back(0, 1) == -2.0);
  Matrix z = Matrix::Zero(1, 1);
  CHECK(leaky_relu_inverse(z, LeakyAlpha{0.25})(0, 0) == 0.0);
}

TEST_CASE("relu clamps negatives") {
  Matrix x(1, 3);
  x << -1, 0, 3;
  const Matrix y = relu(x);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == 0.0);
  CHECK(y(0, 2) == 3.0);
}

TEST_CASE("alpha outside (0, 1] is rejected") {
  for (double a : {0.0, -0.5, 1.5, std::nan("")}) {
    try {
      LeakyAlpha bad{a};
      FAIL("expected a throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidAlpha);
    }
  }
}

TEST_CASE("property: leaky relu round trip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (double a : {0.1, 0.5, 1.0}) {
    const Matrix x = Matrix::NullaryExpr(20, 20, [&] { return u(rng); });
    const Matrix back = leaky_relu_inverse(leaky_relu(x, LeakyAlpha{a}), LeakyAlpha{a});
    CHECK(((back - x).array().abs() <= 1e-15 * x.array().abs()).all());
  }
}

TEST_CASE("leaky relu with slope one is the identity") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 10);
  const Matrix x = Matrix::NullaryExpr(8, 8, [&] { return n(rng); });
  CHECK(leaky_relu(x, LeakyAlpha{1.0}) == x);
}

TEST_CASE("matrix validation") {
  CHECK_NOTHROW(make_matrix(2, 2, {1, 2, 3, 4}));
  CHECK_THROWS_AS(make_matrix(2, 2, {1, 2, 3}), Error);
  CHECK_THROWS_AS(make_matrix(1, 1, {2e6}), Error);
  Matrix m = make_matrix(1, 2, {1, 2});
  CHECK(m(0, 1) == 2.0);
  set_magnitude_bound(1e7);
  CHECK_NOTHROW(make_matrix(1, 1, {2e6}));
  set_magnitude_bound(1e6);
}
