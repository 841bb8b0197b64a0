#include <cmath>
#include <random>

#include "doctest.h"
#include "weightsmith/encodings.hpp"

using namespace weightsmith;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// n chains of depth L with distinct, recognisable entries
CotPrompt toy_prompt(Eigen::Index n, Eigen::Index L, Eigen::Index ell, Eigen::Index d = 2) {
  CotPrompt p;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<Vector> chain;
    for (Eigen::Index s = 0; s <= L; ++s) chain.push_back(Vector::Constant(d, 10.0 * (i + 1) + s));
    p.chains.push_back(chain);
  }
  for (Eigen::Index s = 0; s < ell; ++s) p.test.push_back(Vector::Constant(d, -1.0 - s));
  return p;
}

}  // namespace

TEST_CASE("two positions") {
  const auto f = make_binary_encodings(2);
  REQUIRE(f.size() == 2);
  CHECK(f[0] == vec({-1}));
  CHECK(f[1] == vec({1}));
  CHECK(f[0].dot(f[0]) == 1.0);
  CHECK(f[0].dot(f[1]) == -1.0);
  CHECK(separation_margin(f) == 2.0);
}

TEST_CASE("four positions use every sign pattern") {
  const Matrix g = encoding_matrix(4).transpose() * encoding_matrix(4);
  // Gram matrix of {--, +-, -+, ++}
  Matrix expected(4, 4);
  expected << 2, 0, 0, -2, 0, 2, -2, 0, 0, -2, 2, 0, -2, 0, 0, 2;
  CHECK(g == expected);
}

TEST_CASE("five positions need three bits") {
  const Matrix e = encoding_matrix(5);
  CHECK(e.rows() == 3);
  const Matrix g = e.transpose() * e;
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) {
      if (i == j)
        CHECK(g(i, j) == 3.0);
      else
        CHECK(g(i, j) <= 1.0);
    }
}

TEST_CASE("zero positions is invalid") {
  try {
    make_binary_encodings(0);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidInput);
  }
}

TEST_CASE("property: separation margin is at least 2") {
  for (Eigen::Index n = 2; n <= 70; ++n) {
    const auto f = make_binary_encodings(n);
    CHECK(separation_margin(f) >= 2.0);
    for (const auto& r : f) CHECK(r.squaredNorm() == static_cast<double>(encoding_width(n)));
  }
}

TEST_CASE("minimal prompt matrix") {
  const CotPrompt p = toy_prompt(1, 1, 1);
  const PromptLayout l = layout_for(p, 1);
  const Matrix x = assemble_cot_input(p, 1);
  REQUIRE(x.cols() == 3);
  CHECK(x.row(l.cycle1()) == vec({1, 2, 1}).transpose());
  CHECK(x.row(l.cycle2()) == vec({1, 2, 1}).transpose());
  CHECK(x.row(l.indicator()) == vec({0, 0, 1}).transpose());
  CHECK(x.row(l.enumeration()) == vec({1, 2, 3}).transpose());
  CHECK(x.row(l.ones()) == vec({1, 1, 1}).transpose());
  CHECK(x.block(l.band2(), 0, 2, 3).isZero(0));
}

TEST_CASE("two chains of depth two") {
  const CotPrompt p = toy_prompt(2, 2, 1);
  const PromptLayout l = layout_for(p, 1);
  const Matrix x = assemble_cot_input(p, 1);
  REQUIRE(x.cols() == 7);
  CHECK(x.row(l.enumeration()) == vec({1, 2, 3, 4, 5, 6, 7}).transpose());
  CHECK(x.row(l.indicator()) == vec({0, 0, 0, 0, 0, 0, 1}).transpose());
  CHECK(x.row(l.cycle1()) == vec({1, 2, 3, 1, 2, 3, 1}).transpose());
  for (Eigen::Index t = 0; t < 7; ++t) CHECK(std::abs(x(l.ln(), t) - std::log(t + 1.0)) <= 1e-15);
}

TEST_CASE("malformed prompts") {
  CotPrompt empty;
  empty.test.push_back(Vector::Zero(2));
  auto kind = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Unsupported;
  };
  CHECK(kind([&] { assemble_cot_input(empty, 1); }) == ErrorKind::PromptStateError);
  const CotPrompt p = toy_prompt(2, 2, 1);
  CHECK(kind([&] { assemble_cot_input(p, 2); }) == ErrorKind::PromptStateError);
  CHECK(kind([&] { assemble_cot_input(p, 0); }) == ErrorKind::PromptStateError);
  CHECK(kind([&] { assemble_cot_input(p, 1, PromptLayout::make(2, 4)); }) == ErrorKind::CapacityError);
}

TEST_CASE("round trip: data tokens sit at their coordinates") {
  const CotPrompt p = toy_prompt(3, 2, 2, 3);
  const Matrix x = assemble_cot_input(p, 2, PromptLayout::make(4, 32));
  Eigen::Index t = 0;
  for (const auto& c : p.chains)
    for (const auto& v : c) CHECK(x.block(0, t++, 3, 1) == v);
  for (const auto& v : p.test) CHECK(x.block(0, t++, 3, 1) == v);
  CHECK(x.block(3, 0, 1, x.cols()).isZero(0));
}

TEST_CASE("property: encodings are oblivious to the step") {
  const PromptLayout l = PromptLayout::make(2, 64);
  for (Eigen::Index L = 1; L <= 3; ++L)
    for (Eigen::Index ell = 1; ell < L; ++ell) {
      const CotPrompt a = toy_prompt(3, L, ell);
      CotPrompt b = a;
      b.test.push_back(Vector::Constant(2, 5.0));
      const Matrix xa = assemble_cot_input(a, ell, l);
      const Matrix xb = assemble_cot_input(b, ell + 1, l);
      // every row but the data bands agrees on the shared tokens
      CHECK(xa.bottomRows(l.rows() - 2 * l.d_data) == xb.leftCols(xa.cols()).bottomRows(l.rows() - 2 * l.d_data));
    }
}

TEST_CASE("ideal filtered prompt, single step") {
  const CotPrompt p = toy_prompt(2, 1, 1);
  const Matrix f = ideal_filtered(p, 1);
  // tokens: x1 s1 x2 s2 xt
  REQUIRE(f.cols() == 5);
  CHECK(f.block(0, 0, 2, 1) == p.chains[0][0]);
  CHECK(f.block(0, 1, 2, 1).isZero(0));
  CHECK(f.block(0, 4, 2, 1) == p.test[0]);
  CHECK(f.block(2, 1, 2, 1) == p.chains[0][1]);
  CHECK(f.block(2, 3, 2, 1) == p.chains[1][1]);
  CHECK(f.block(2, 0, 2, 1).isZero(0));
}

TEST_CASE("ideal filtered prompt, last step leaves the test slot of band 2 empty") {
  const CotPrompt p = toy_prompt(2, 3, 3);
  const Matrix f = ideal_filtered(p, 3);
  CHECK(f.block(2, f.cols() - 1, 2, 1).isZero(0));
  CHECK(f.block(0, f.cols() - 1, 2, 1) == p.test[2]);
}

TEST_CASE("zero features filter to zero") {
  CotPrompt p = toy_prompt(2, 2, 2);
  for (auto& c : p.chains)
    for (auto& v : c) v.setZero();
  for (auto& v : p.test) v.setZero();
  CHECK(ideal_filtered(p, 2).isZero(0));
}
