#include "weightsmith/primitives.hpp"

#include <cmath>
#include <limits>

#include "layer_builder.hpp"
#include "weightsmith/encodings.hpp"

namespace weightsmith {

using detail::LayerBuilder;
using detail::Terms;

namespace {

// exact blocks still need a positive budget
constexpr double kExactBudget = std::numeric_limits<double>::min();

// a few ulps of the largest magnitude a block handles
double roundoff(double c) { return 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, c); }

void check_region(const RegionSpec& r, Eigen::Index rows, const char* what) {
  require(r.row_len >= 1 && r.col_len >= 1, ErrorKind::ShapeError, std::string(what) + " region is empty");
  require(r.row_start >= 0 && r.row_start + r.row_len <= rows && r.col_start >= 0, ErrorKind::LayoutError,
          std::string(what) + " region is out of bounds");
}

}  // namespace

double lambda_for(double epsilon, double c, Eigen::Index n_max, double margin) {
  require(epsilon > 0 && c > 0 && n_max >= 1 && margin > 0, ErrorKind::InvalidInput, "lambda_for needs positive inputs");
  return std::max(std::log(static_cast<double>(n_max) * c / epsilon) / margin, 1.0);
}

double attention_leak_bound(double lambda, double c, Eigen::Index n_tokens, double margin) {
  if (n_tokens <= 1) return 0.0;
  return 2.0 * c * static_cast<double>(n_tokens - 1) * std::exp(-lambda * margin);
}

CopyLayout CopyLayout::make(Eigen::Index data_rows, Eigen::Index row_len, Eigen::Index n_max) {
  require(data_rows >= 1 && row_len >= 1 && n_max >= 1, ErrorKind::InvalidInput, "copy layout sizes must be positive");
  CopyLayout l;
  l.data_rows = data_rows;
  l.scratch_len = row_len;
  l.n_max = n_max;
  l.enc_width = encoding_width(n_max);
  return l;
}

FunctionBlock build_copy_block(const CopyLayout& layout, const RegionSpec& src, const RegionSpec& dst, double lambda,
                               double data_bound) {
  require(src.row_len == dst.row_len && src.col_len == dst.col_len, ErrorKind::ShapeError,
          "source and destination regions differ in shape");
  check_region(src, layout.data_rows, "source");
  check_region(dst, layout.data_rows, "destination");
  require(src.row_len == layout.scratch_len, ErrorKind::LayoutError, "scratch band does not match the region height");
  require(data_bound > 0, ErrorKind::InvalidInput, "data bound must be positive");

  LayerBuilder lb(layout.rows(), lambda);
  detail::CopyRows rows;
  rows.position = layout.position();
  rows.pointer = layout.pointer();
  rows.enc_width = layout.enc_width;
  rows.flag = layout.flag();
  rows.scratch = layout.scratch();
  rows.src = src.row_start;
  rows.dst = dst.row_start;
  rows.len = src.row_len;
  rows.big = 8.0 * data_bound;
  detail::add_copy_stage(lb, rows);

  FunctionBlock block;
  block.name = "copy";
  block.layers.push_back(lb.build());
  block.layout = {layout.rows(), 0, layout.n_max};
  block.mask = full_mask(layout.rows());
  block.budget = 2.0 * attention_leak_bound(lambda, data_bound, layout.n_max) + roundoff(data_bound);
  validate_block(block);
  return block;
}

Matrix copy_input(const CopyLayout& layout, const Matrix& data, const RegionSpec& src, const RegionSpec& dst) {
  require(data.rows() == layout.data_rows, ErrorKind::LayoutError, "payload rows do not match the copy layout");
  const Eigen::Index n = data.cols();
  require(n >= 1 && n <= layout.n_max, ErrorKind::CapacityError, "token count exceeds the copy layout capacity");
  require(src.col_start + src.col_len <= n && dst.col_start + dst.col_len <= n, ErrorKind::LayoutError,
          "region columns out of bounds");
  Matrix x = Matrix::Zero(layout.rows(), n);
  x.topRows(layout.data_rows) = data;
  for (Eigen::Index t = 0; t < n; ++t) {
    x.block(layout.position(), t, layout.enc_width, 1) = binary_encoding(t, layout.enc_width);
    x.block(layout.pointer(), t, layout.enc_width, 1) = binary_encoding(t, layout.enc_width);
  }
  for (Eigen::Index t = 0; t < dst.col_len; ++t) {
    x.block(layout.pointer(), dst.col_start + t, layout.enc_width, 1) =
        binary_encoding(src.col_start + t, layout.enc_width);
    x(layout.flag(), dst.col_start + t) = 1.0;
  }
  validate(x, "copy input");
  return x;
}

FunctionBlock build_adder_network(Eigen::Index d) {
  require(d >= 1 && d <= 30, ErrorKind::InvalidInput, "adder width must lie in 1..30");
  const Eigen::Index rows = 3 * d + 1;
  LayerBuilder lb(rows);
  // S_k = sum_{i<=k} (a_i + b_i) 2^i is an integer; [S >= t] = (S - t + 1)_+ - (S - t)_+
  auto prefix = [&](Eigen::Index k) {
    Terms s;
    for (Eigen::Index i = 0; i <= k; ++i) {
      const double w = std::ldexp(1.0, static_cast<int>(i));
      s.push_back({i, w});
      s.push_back({d + i, w});
    }
    return s;
  };
  auto step = [&](const Terms& s, double t, Eigen::Index out, double sign) {
    lb.emit(out, lb.unit(s, 1.0 - t), sign);
    lb.emit(out, lb.unit(s, -t), -sign);
  };
  for (Eigen::Index k = 0; k < d; ++k) {
    // bit k of S_k: S_k < 2^{k+2}, so it is [>= 2^k] - [>= 2^{k+1}] + [>= 3 2^k]
    const Terms s = prefix(k);
    const double p = std::ldexp(1.0, static_cast<int>(k));
    step(s, p, 2 * d + k, 1.0);
    step(s, 2.0 * p, 2 * d + k, -1.0);
    step(s, 3.0 * p, 2 * d + k, 1.0);
  }
  step(prefix(d - 1), std::ldexp(1.0, static_cast<int>(d)), 3 * d, 1.0);

  FunctionBlock block;
  block.name = "adder";
  block.layers.push_back(lb.build());
  block.layout = {rows, 0, 0};
  block.mask = full_mask(rows);
  block.budget = kExactBudget;
  validate_block(block);
  return block;
}

Matrix adder_input(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& pairs, Eigen::Index d) {
  require(!pairs.empty(), ErrorKind::InvalidInput, "no operand pairs");
  Matrix x = Matrix::Zero(3 * d + 1, static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const auto [a, b] = pairs[j];
    require(a >> d == 0 && b >> d == 0, ErrorKind::InvalidInput, "operand does not fit in d bits");
    for (Eigen::Index i = 0; i < d; ++i) {
      x(i, static_cast<Eigen::Index>(j)) = static_cast<double>((a >> i) & 1);
      x(d + i, static_cast<Eigen::Index>(j)) = static_cast<double>((b >> i) & 1);
    }
  }
  return x;
}

std::uint64_t adder_read(const Matrix& out, Eigen::Index col, Eigen::Index d) {
  std::uint64_t v = 0;
  for (Eigen::Index i = 0; i <= d; ++i)
    if (out(2 * d + i, col) > 0.5) v |= std::uint64_t{1} << i;
  return v;
}

Matrix unit_bits(const Matrix& signed_bits) { return ((signed_bits.array() + 1.0) * 0.5).matrix(); }

double default_filter_constant(double c_data) {
  require(c_data > 0, ErrorKind::InvalidInput, "data bound must be positive");
  return 1e6 * c_data;
}

FunctionBlock build_bit_filter_layer(const BitFilterLayout& layout, const std::vector<BitRow>& bits, double C) {
  require(std::isfinite(C) && C > 0, ErrorKind::InvalidConstant, "filter constant must be positive");
  require(bits.size() == 1 || bits.size() == 2, ErrorKind::InvalidInput, "one or two bit rows expected");
  require((bits.size() == 2) == (layout.band2_start >= 0), ErrorKind::LayoutError,
          "second bit row needs a second band and vice versa");
  require(layout.data_start >= 0 && layout.data_start + layout.data_len <= layout.rows, ErrorKind::LayoutError,
          "data band out of bounds");
  if (layout.band2_start >= 0)
    require(layout.band2_start + layout.data_len <= layout.rows, ErrorKind::LayoutError, "second band out of bounds");
  for (const auto& b : bits)
    require(b.row >= 0 && b.row < layout.rows && b.tolerance >= 0, ErrorKind::LayoutError, "bad bit row");

  LayerBuilder lb(layout.rows);
  double worst = 0;
  for (Eigen::Index r = 0; r < layout.data_len; ++r) {
    const Eigen::Index x = layout.data_start + r;
    // x + (-C b - x)_+ - (-C b + x)_+
    lb.emit(x, lb.unit({{bits[0].row, -C}, {x, -1.0}}), 1.0);
    lb.emit(x, lb.unit({{bits[0].row, -C}, {x, 1.0}}), -1.0);
    if (bits.size() == 2) lb.gated({{x, 1.0}}, {{bits[1].row, 1.0}}, C, layout.band2_start + r, 1.0);
  }
  for (const auto& b : bits) worst = std::max(worst, C * b.tolerance);

  FunctionBlock block;
  block.name = "bit_filter";
  block.layers.push_back(lb.build());
  block.layout = {layout.rows, 0, 0};
  block.mask = full_mask(layout.rows);
  block.budget = worst + roundoff(C);
  validate_block(block);
  return block;
}

namespace {

void indicator_units(LayerBuilder& lb, Eigen::Index row, IndicatorShape shape) {
  const Terms pos{{row, 1.0}}, neg{{row, -1.0}};
  lb.bias(row, 1.0);
  if (shape == IndicatorShape::Hat) {
    // 1 - (x)_+ - (-x)_+ + (x-1)_+ + (-x-1)_+ - ((x)_+ - (-x)_+)
    const auto p = lb.unit(pos), n = lb.unit(neg);
    lb.emit(row, p, -1.0);
    lb.emit(row, n, -1.0);
    lb.emit(row, lb.unit(pos, -1.0), 1.0);
    lb.emit(row, lb.unit(neg, -1.0), 1.0);
    lb.emit(row, p, -1.0);
    lb.emit(row, n, 1.0);
  } else {
    lb.emit(row, lb.unit(pos, -0.25), -4.0);
    lb.emit(row, lb.unit(neg, -0.25), -4.0);
    lb.emit(row, lb.unit(pos, -0.5), 4.0);
    lb.emit(row, lb.unit(neg, -0.5), 4.0);
    lb.clear(row);
  }
}

}  // namespace

FunctionBlock build_bit_creation_layer(Eigen::Index rows, const std::vector<Eigen::Index>& diff_rows,
                                       IndicatorShape shape) {
  require(!diff_rows.empty(), ErrorKind::InvalidInput, "no rows to convert");
  LayerBuilder lb(rows);
  for (auto r : diff_rows) {
    require(r >= 0 && r < rows, ErrorKind::LayoutError, "bit row out of bounds");
    indicator_units(lb, r, shape);
  }
  FunctionBlock block;
  block.name = "bit_creation";
  block.layers.push_back(lb.build());
  block.layout = {rows, 0, 0};
  block.mask = full_mask(rows);
  block.budget = kExactBudget;
  validate_block(block);
  return block;
}

AttentionHead build_subspace_filter_head(Eigen::Index d_data, Eigen::Index skill_count, Eigen::Index k, double C) {
  require(d_data >= 1 && skill_count >= 1, ErrorKind::InvalidInput, "dimensions must be positive");
  require(k >= 1 && k <= skill_count, ErrorKind::InvalidSkill,
          "skill " + std::to_string(k) + " outside 1.." + std::to_string(skill_count));
  require(std::isfinite(C) && C > 0, ErrorKind::InvalidConstant, "subspace constant must be positive");
  const Eigen::Index width = d_data + skill_count;
  AttentionHead h;
  h.w_k = Matrix::Zero(1, width);
  h.w_q = Matrix::Zero(1, width);
  h.w_k(0, d_data + k - 1) = 1.0;
  h.w_q(0, d_data + k - 1) = C;
  h.w_v = Matrix::Zero(width, width);
  h.w_v.topLeftCorner(d_data, d_data).setIdentity();
  return h;
}

Matrix attention_weights(const AttentionHead& head, const Matrix& x, double lambda) {
  require(x.rows() == head.width(), ErrorKind::ShapeError, "input width does not match the head");
  return temp_softmax((head.w_k * x).transpose() * (head.w_q * x), Temperature{lambda});
}

}  // namespace weightsmith
