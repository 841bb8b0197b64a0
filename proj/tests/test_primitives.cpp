#include <cmath>
#include <random>

#include "doctest.h"
#include "weightsmith/encodings.hpp"
#include "weightsmith/primitives.hpp"

using namespace weightsmith;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Matrix::NullaryExpr(r, c, [&] { return u(rng); });
}

// plain array copy
Matrix copy_oracle(const Matrix& data, const RegionSpec& src, const RegionSpec& dst) {
  Matrix out = data;
  for (Eigen::Index r = 0; r < src.row_len; ++r)
    for (Eigen::Index c = 0; c < src.col_len; ++c)
      out(dst.row_start + r, dst.col_start + c) = data(src.row_start + r, src.col_start + c);
  return out;
}

double copy_error(const CopyLayout& l, const Matrix& data, const RegionSpec& src, const RegionSpec& dst,
                  double lambda) {
  const FunctionBlock blk = build_copy_block(l, src, dst, lambda);
  const Matrix out = block_forward(blk, copy_input(l, data, src, dst));
  return (out.topRows(l.data_rows) - copy_oracle(data, src, dst)).cwiseAbs().maxCoeff();
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Unsupported;
}

}  // namespace

TEST_CASE("lambda helper") {
  // ln(16 * 1 / 1e-6) / 2
  CHECK(lambda_for(1e-6, 1.0, 16) == doctest::Approx(8.294049640102028).epsilon(1e-12));
  CHECK(attention_leak_bound(lambda_for(1e-6, 1.0, 16), 1.0, 16) <= 2e-6);
}

TEST_CASE("copy one token's band onto another") {
  std::mt19937_64 rng(1);
  const CopyLayout l = CopyLayout::make(4, 2, 5);
  const Matrix data = random_matrix(4, 5, rng);
  const RegionSpec src{2, 2, 1, 1}, dst{0, 2, 0, 1};
  const double lambda = lambda_for(1e-7, 1.0, 5);
  const FunctionBlock blk = build_copy_block(l, src, dst, lambda);
  const Matrix x = copy_input(l, data, src, dst);
  Matrix expected = x;
  expected.topRows(4) = copy_oracle(data, src, dst);
  const auto rep = check_against_oracle(blk, x, expected);
  CHECK(rep.pass);
  CHECK(rep.max_error <= 1e-6);
}

TEST_CASE("copy between two tokens") {
  std::mt19937_64 rng(2);
  const CopyLayout l = CopyLayout::make(2, 2, 2);
  const Matrix data = random_matrix(2, 2, rng);
  const RegionSpec src{0, 2, 0, 1}, dst{0, 2, 1, 1};
  const double lambda = lambda_for(1e-9, 1.0, 2);
  const FunctionBlock blk = build_copy_block(l, src, dst, lambda);
  const Matrix out = block_forward(blk, copy_input(l, data, src, dst));
  CHECK((out.topRows(2) - copy_oracle(data, src, dst)).cwiseAbs().maxCoeff() <= blk.budget);
}

TEST_CASE("self copy is the identity") {
  std::mt19937_64 rng(3);
  const CopyLayout l = CopyLayout::make(3, 3, 6);
  const Matrix data = random_matrix(3, 6, rng);
  const RegionSpec r{0, 3, 1, 4};
  const double lambda = lambda_for(1e-8, 1.0, 6);
  const FunctionBlock blk = build_copy_block(l, r, r, lambda);
  const Matrix x = copy_input(l, data, r, r);
  CHECK((block_forward(blk, x) - x).cwiseAbs().maxCoeff() <= 2.0 * blk.budget);
}

TEST_CASE("zero source writes zeros and keeps the rest") {
  std::mt19937_64 rng(4);
  const CopyLayout l = CopyLayout::make(2, 1, 4);
  Matrix data = random_matrix(2, 4, rng);
  data(1, 3) = 0.0;
  const RegionSpec src{1, 1, 3, 1}, dst{0, 1, 0, 1};
  const FunctionBlock blk = build_copy_block(l, src, dst, lambda_for(1e-9, 1.0, 4));
  const Matrix x = copy_input(l, data, src, dst);
  const Matrix out = block_forward(blk, x);
  CHECK(std::abs(out(0, 0)) <= blk.budget);
  Matrix rest = out - x;
  rest(0, 0) = 0;
  CHECK(rest.cwiseAbs().maxCoeff() <= blk.budget);
}

TEST_CASE("copy rejects mismatched regions") {
  const CopyLayout l = CopyLayout::make(4, 2, 4);
  CHECK(kind_of([&] { build_copy_block(l, {0, 2, 0, 1}, {0, 1, 1, 1}, 10.0); }) == ErrorKind::ShapeError);
  CHECK(kind_of([&] { build_copy_block(l, {0, 2, 0, 2}, {0, 2, 1, 1}, 10.0); }) == ErrorKind::ShapeError);
  CHECK(kind_of([&] { build_copy_block(l, {3, 2, 0, 1}, {0, 2, 1, 1}, 10.0); }) == ErrorKind::LayoutError);
}

TEST_CASE("property: copy error falls as lambda doubles") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 4 + trial, d = 2 + trial % 4;
    const CopyLayout l = CopyLayout::make(d, 1, n);
    const Matrix data = random_matrix(d, n, rng);
    const RegionSpec src{0, 1, n - 1, 1}, dst{d - 1, 1, 0, 1};
    double prev = INFINITY;
    for (double lambda : {2.5, 5.0, 10.0, 20.0}) {
      const double err = copy_error(l, data, src, dst, lambda);
      CHECK(err <= prev);
      prev = err;
    }
    CHECK(prev < 1e-8);
  }
}

TEST_CASE("adder small cases") {
  const FunctionBlock blk = build_adder_network(4);
  const Matrix out = block_forward(blk, adder_input({{3, 5}, {0, 0}, {15, 15}}, 4));
  CHECK(adder_read(out, 0, 4) == 8);
  CHECK(adder_read(out, 1, 4) == 0);
  CHECK(adder_read(out, 2, 4) == 30);
  // 0011 + 0101 -> 01000, bits exactly 0/1
  Vector bits = out.block(8, 0, 5, 1);
  Vector expected(5);
  expected << 0, 0, 0, 1, 0;
  CHECK(bits == expected);
}

TEST_CASE("adder fits the hidden budget") {
  for (Eigen::Index d = 1; d <= 8; ++d) CHECK(build_adder_network(d).layers[0].hidden() <= 8 * d);
}

TEST_CASE("property: adder is exact on every pair, d <= 6") {
  for (Eigen::Index d = 1; d <= 6; ++d) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
    for (std::uint64_t a = 0; a < (1u << d); ++a)
      for (std::uint64_t b = 0; b < (1u << d); ++b) pairs.push_back({a, b});
    const FunctionBlock blk = build_adder_network(d);
    const Matrix x = adder_input(pairs, d);
    const Matrix out = block_forward(blk, x);
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      const std::uint64_t sum = pairs[j].first + pairs[j].second;
      for (Eigen::Index i = 0; i <= d; ++i) CHECK(out(2 * d + i, col) == static_cast<double>((sum >> i) & 1));
      CHECK(out.topRows(2 * d).col(col) == x.topRows(2 * d).col(col));
    }
  }
}

TEST_CASE("signed bits convert to unit bits") {
  Matrix s(1, 2);
  s << -1, 1;
  CHECK(unit_bits(s) == Matrix((Matrix(1, 2) << 0, 1).finished()));
}

TEST_CASE("bit filter keeps columns with bit 1") {
  // rows: data (2) | band 2 (2) | b | b'
  const BitFilterLayout l{6, 0, 2, 2};
  const FunctionBlock blk = build_bit_filter_layer(l, {{4}, {5}}, default_filter_constant(1.0));
  Matrix x = Matrix::Zero(6, 3);
  x.topRows(2) << 0.3, -0.7, 0.9, -0.2, 0.5, 0.1;
  x.row(4) << 1, 0, 1;
  x.row(5) << 0, 1, 0;
  const Matrix out = block_forward(blk, x);
  CHECK(out.block(0, 0, 2, 1) == x.block(0, 0, 2, 1));
  CHECK(out.block(0, 1, 2, 1).isZero(0));
  CHECK(out.block(0, 2, 2, 1) == x.block(0, 2, 2, 1));
  // the gated copy rounds at the scale of C
  CHECK((out.block(2, 1, 2, 1) - x.block(0, 1, 2, 1)).cwiseAbs().maxCoeff() <= blk.budget);
  CHECK(out.block(2, 0, 2, 1).isZero(0));
  CHECK(out.bottomRows(2) == x.bottomRows(2));
}

TEST_CASE("bit filter with all bits set is the identity on data") {
  std::mt19937_64 rng(6);
  const BitFilterLayout l{3, 0, 2};
  const FunctionBlock blk = build_bit_filter_layer(l, {{2}}, 1e6);
  Matrix x(3, 5);
  x.topRows(2) = random_matrix(2, 5, rng, 10.0);
  x.row(2).setOnes();
  CHECK(block_forward(blk, x) == x);
}

TEST_CASE("nearly-one bits pass data unchanged") {
  const BitFilterLayout l{2, 0, 1};
  const FunctionBlock blk = build_bit_filter_layer(l, {{1}}, 1e3);
  Matrix x(2, 3);
  x << 1.0, -1.0, 0.25, 1 - 1e-9, 1 - 1e-9, 1 + 1e-9;
  CHECK(block_forward(blk, x).row(0) == x.row(0));
}

TEST_CASE("dirty zero bits leak at most C eps") {
  const double C = 1e3, eps = 1e-7, c = C * eps;
  const BitFilterLayout l{4, 0, 1, 1};
  const FunctionBlock blk = build_bit_filter_layer(l, {{2, eps}, {3, eps}}, C);
  Matrix x(4, 4);
  x << 0.5, -0.5, 1e-5, -3.0, 0, 0, 0, 0, eps, -eps, eps, eps, 1 - eps, 1 + eps, 1 - eps, 1 - eps;
  const Matrix out = block_forward(blk, x);
  CHECK(out.row(0).cwiseAbs().maxCoeff() <= blk.budget);
  CHECK((out.row(1) - x.row(0)).cwiseAbs().maxCoeff() <= blk.budget);
  CHECK(blk.budget >= c);
  CHECK(blk.budget <= c * (1 + 1e-6));
}

TEST_CASE("filter constant must be positive") {
  CHECK(kind_of([] { build_bit_filter_layer({2, 0, 1}, {{1}}, 0.0); }) == ErrorKind::InvalidConstant);
  CHECK(kind_of([] { build_bit_filter_layer({2, 0, 1}, {{1}}, -5.0); }) == ErrorKind::InvalidConstant);
}

TEST_CASE("bit creation on integers") {
  const FunctionBlock hat = build_bit_creation_layer(1, {0}, IndicatorShape::Hat);
  const FunctionBlock plateau = build_bit_creation_layer(1, {0}, IndicatorShape::Plateau);
  Matrix x(1, 15);
  for (int i = 0; i < 15; ++i) x(0, i) = i - 7;
  for (const auto* blk : {&hat, &plateau}) {
    const Matrix out = block_forward(*blk, x);
    for (int i = 0; i < 15; ++i) CHECK(out(0, i) == (i == 7 ? 1.0 : 0.0));
  }
}

TEST_CASE("hat formula values") {
  const FunctionBlock hat = build_bit_creation_layer(1, {0});
  Matrix x(1, 4);
  x << 0, 1, -1, 3;
  const Matrix out = block_forward(hat, x);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 1) == 0.0);
  CHECK(out(0, 2) == 0.0);
  CHECK(out(0, 3) == 0.0);
}

TEST_CASE("plateau absorbs drift") {
  const FunctionBlock plateau = build_bit_creation_layer(2, {1}, IndicatorShape::Plateau);
  Matrix x(2, 4);
  x << 7, 7, 7, 7, 0.2, -0.2, 0.9, -1.3;
  const Matrix out = block_forward(plateau, x);
  CHECK(out(1, 0) == 1.0);
  CHECK(out(1, 1) == 1.0);
  CHECK(std::abs(out(1, 2)) <= 1e-15);
  CHECK(std::abs(out(1, 3)) <= 1e-15);
  CHECK(out.row(0) == x.row(0));
}

TEST_CASE("subspace head weights") {
  // skills [1, 2, 1, 2]
  Matrix x = Matrix::Zero(3, 4);
  x.row(0) << 1, 2, 3, 4;
  x(1, 0) = x(1, 2) = 1;
  x(2, 1) = x(2, 3) = 1;
  const AttentionHead h = build_subspace_filter_head(1, 2, 1, 50.0);
  const Matrix w = attention_weights(h, x);
  CHECK(w(0, 0) == doctest::Approx(0.5));
  CHECK(w(2, 0) == doctest::Approx(0.5));
  CHECK(w(1, 0) < 1e-20);
  CHECK(w(3, 2) < 1e-20);
}

TEST_CASE("subspace head with one group or one member") {
  Matrix x = Matrix::Zero(3, 3);
  x.row(1).setOnes();
  const Matrix w = attention_weights(build_subspace_filter_head(1, 2, 1, 60.0), x);
  CHECK((w.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);

  Matrix y = Matrix::Zero(3, 3);
  y(1, 0) = 1;
  y(2, 1) = y(2, 2) = 1;
  const Matrix v = attention_weights(build_subspace_filter_head(1, 2, 1, 60.0), y);
  CHECK(v(0, 0) >= 1 - 1e-6);
}

TEST_CASE("skill index is bounded") {
  CHECK(kind_of([] { build_subspace_filter_head(2, 3, 4, 1.0); }) == ErrorKind::InvalidSkill);
  CHECK(kind_of([] { build_subspace_filter_head(2, 3, 0, 1.0); }) == ErrorKind::InvalidSkill);
}
