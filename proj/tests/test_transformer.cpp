#include <cmath>
#include <random>

#include "doctest.h"
#include "weightsmith/encodings.hpp"
#include "weightsmith/transformer.hpp"

using namespace weightsmith;

namespace {

TransformerLayer empty_layer(Eigen::Index d, Eigen::Index heads = 1) {
  TransformerLayer l;
  for (Eigen::Index h = 0; h < heads; ++h)
    l.heads.push_back({Matrix::Zero(1, d), Matrix::Zero(1, d), Matrix::Zero(d, d)});
  l.w1 = Matrix::Zero(0, d);
  l.b1 = Vector::Zero(0);
  l.w2 = Matrix::Zero(d, 0);
  l.b2 = Vector::Zero(d);
  return l;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  return Matrix::NullaryExpr(r, c, [&] { return u(rng); });
}

}  // namespace

TEST_CASE("zero value head leaves the input untouched") {
  const Matrix x = random_matrix(4, 5, 1);
  TransformerLayer l = empty_layer(4);
  l.heads[0].w_k = random_matrix(2, 4, 2);
  l.heads[0].w_q = random_matrix(2, 4, 3);
  CHECK(attention_forward(l, x) == x);
}

TEST_CASE("minus-identity head cancels an identity-attending head") {
  // rows: payload (2) | position encoding (2); 4 tokens
  const Eigen::Index n = 4, b = 2, d = 2 + b;
  Matrix x = Matrix::Zero(d, n);
  x.topRows(2) = random_matrix(2, n, 4);
  x.bottomRows(b) = encoding_matrix(n);
  TransformerLayer l = empty_layer(d, 2);
  l.lambda = 30.0;
  for (auto& h : l.heads) {
    h.w_k = Matrix::Zero(b, d);
    h.w_k.rightCols(b).setIdentity();
    h.w_q = h.w_k;
  }
  l.heads[0].w_v.topLeftCorner(2, 2).setIdentity();
  l.heads[1].w_v = -l.heads[0].w_v;
  const Matrix out = attention_forward(l, x);
  // both heads see the same near-identity softmax, so they cancel up to rounding
  CHECK((out - x).cwiseAbs().maxCoeff() < 1e-14);
  // and each head alone is within the softmax leak of the identity
  TransformerLayer one = l;
  one.heads.pop_back();
  const Matrix single = attention_forward(one, x);
  CHECK((single.topRows(2) - 2.0 * x.topRows(2)).cwiseAbs().maxCoeff() <= 2.0 * 3.0 * std::exp(-2.0 * 30.0) + 1e-15);
}

TEST_CASE("zero input stays zero") {
  TransformerLayer l = empty_layer(3);
  l.heads[0].w_v = random_matrix(3, 3, 5);
  CHECK(attention_forward(l, Matrix::Zero(3, 4)).isZero(0));
}

TEST_CASE("embedding width mismatch is a shape error") {
  TransformerLayer l = empty_layer(3);
  try {
    attention_forward(l, Matrix::Zero(4, 2));
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeError);
  }
}

TEST_CASE("layer without MLP equals attention") {
  TransformerLayer l = empty_layer(3);
  l.heads[0].w_k = random_matrix(2, 3, 6);
  l.heads[0].w_q = random_matrix(2, 3, 7);
  l.heads[0].w_v = random_matrix(3, 3, 8);
  l.w1 = Matrix::Zero(2, 3);
  l.b1 = Vector::Zero(2);
  l.w2 = Matrix::Zero(3, 2);
  const Matrix x = random_matrix(3, 5, 9);
  CHECK(layer_forward(l, x) == attention_forward(l, x));
}

TEST_CASE("two-relu cancellation zeroes every row") {
  // x + (-x)_+ - (x)_+ = 0
  const Eigen::Index d = 3;
  TransformerLayer l = empty_layer(d);
  l.w1 = Matrix(2 * d, d);
  l.w1 << Matrix::Identity(d, d), -Matrix::Identity(d, d);
  l.b1 = Vector::Zero(2 * d);
  l.w2 = Matrix(d, 2 * d);
  l.w2 << -Matrix::Identity(d, d), Matrix::Identity(d, d);
  CHECK(layer_forward(l, random_matrix(d, 6, 10)).isZero(0));
}

TEST_CASE("output bias broadcasts over columns") {
  TransformerLayer l = empty_layer(2);
  l.b2 << 1.5, -2.0;
  const Matrix out = layer_forward(l, Matrix::Zero(2, 3));
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(out(0, j) == 1.5);
    CHECK(out(1, j) == -2.0);
  }
}

TEST_CASE("single precision forward pass") {
  BasicTransformerLayer<float> l;
  l.heads.push_back({MatrixX<float>::Zero(1, 2), MatrixX<float>::Zero(1, 2), MatrixX<float>::Identity(2, 2)});
  l.w1 = MatrixX<float>::Zero(0, 2);
  l.b1 = VectorX<float>::Zero(0);
  l.w2 = MatrixX<float>::Zero(2, 0);
  l.b2 = VectorX<float>::Zero(2);
  MatrixX<float> x(2, 2);
  x << 1, 3, 2, 4;
  // uniform attention adds the column mean
  const MatrixX<float> out = layer_forward(l, x);
  CHECK(out(0, 0) == doctest::Approx(3.0f));
  CHECK(out(1, 1) == doctest::Approx(7.0f));
}

TEST_CASE("block forward folds layers and checks the layout") {
  FunctionBlock blk;
  blk.name = "empty";
  blk.layout = {3, 0, 4};
  blk.mask = full_mask(3);
  blk.budget = 1e-9;
  const Matrix x = random_matrix(3, 4, 11);
  CHECK(block_forward(blk, x) == x);
  try {
    block_forward(blk, Matrix::Zero(2, 4));
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LayoutError);
  }
  CHECK_THROWS_AS(block_forward(blk, Matrix::Zero(3, 5)), Error);

  TransformerLayer l = empty_layer(3);
  l.b2 << 1, 0, 0;
  blk.layers = {l, l};
  const Matrix y = block_forward(blk, x);
  CHECK(y.rows() == x.rows());
  CHECK(y.cols() == x.cols());
  CHECK((y.row(0).array() - x.row(0).array() - 2.0).abs().maxCoeff() < 1e-15);
  CHECK(block_forward(blk, x) == y);
}

TEST_CASE("oracle comparison respects the mask and the budget") {
  FunctionBlock blk;
  blk.name = "id";
  blk.layout = {2, 2, 0};
  blk.mask.cells = BoolMatrix::Constant(2, 2, true);
  blk.mask.cells(1, 1) = false;
  blk.budget = 1e-3;
  const Matrix x = random_matrix(2, 2, 12);

  auto r = check_against_oracle(blk, x, x);
  CHECK(r.max_error == 0.0);
  CHECK(r.pass);

  Matrix e = x;
  e(0, 1) += 0.5e-3;
  r = check_against_oracle(blk, x, e);
  CHECK(r.pass);

  e = x;
  e(1, 0) += 2e-3;
  r = check_against_oracle(blk, x, e);
  CHECK_FALSE(r.pass);
  CHECK(r.worst_row == 1);
  CHECK(r.worst_col == 0);
  CHECK(r.max_error == doctest::Approx(2e-3));

  // unmasked entries are ignored
  e = x;
  e(1, 1) += 10.0;
  CHECK(check_against_oracle(blk, x, e).pass);

  // shape mismatch still yields a (failing) report
  r = check_against_oracle(blk, x, Matrix::Zero(3, 2));
  CHECK_FALSE(r.pass);
}

TEST_CASE("composition adds budgets and concatenates layers") {
  FunctionBlock a, b;
  a.name = "a";
  b.name = "b";
  a.layout = b.layout = {2, 0, 0};
  a.mask = b.mask = full_mask(2);
  a.budget = 1e-6;
  b.budget = 2e-6;
  a.layers = {empty_layer(2)};
  b.layers = {empty_layer(2), empty_layer(2)};
  const FunctionBlock c = compose(a, b, 4e-6);
  CHECK(c.layers.size() == 3);
  CHECK(c.budget == doctest::Approx(7e-6));
  CHECK_NOTHROW(validate_block(c));
}

TEST_CASE("report merge keeps the worst case") {
  VerificationReport a{"x", 1, 1e-3, 1e-2, true, 0, 0, 0.5};
  VerificationReport b{"x", 2, 5e-3, 1e-2, true, 1, 2, 0.25};
  a.merge(b);
  CHECK(a.cases == 3);
  CHECK(a.max_error == 5e-3);
  CHECK(a.worst_col == 2);
  CHECK(a.pass);
  a.merge(VerificationReport{"x", 1, 0, 1e-2, false});
  CHECK_FALSE(a.pass);
}
