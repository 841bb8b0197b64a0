#include "weightsmith/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "layer_builder.hpp"
#include "weightsmith/encodings.hpp"

namespace weightsmith {

using detail::LayerBuilder;
using detail::Terms;

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_config(const LinearizationConfig& cfg) {
  require(std::isfinite(cfg.score_scale) && cfg.score_scale > 0, ErrorKind::InvalidConstant,
          "score scale must be positive");
  require(cfg.denom_block >= 1, ErrorKind::InvalidConstant, "denominator block needs at least one column");
  require(cfg.rescale >= 0 && std::isfinite(cfg.rescale), ErrorKind::InvalidConstant, "rescale must be finite");
  require(cfg.operand_bound > 0 && cfg.copy_epsilon > 0, ErrorKind::InvalidConstant, "bounds must be positive");
}

double rescale_of(const LinearizationConfig& cfg, Eigen::Index n_tokens) {
  return cfg.rescale > 0 ? cfg.rescale : static_cast<double>(n_tokens) / (2.0 * cfg.score_scale);
}

// largest slot magnitude the copy stage can see
double copy_bound(const LinearizationConfig& cfg, Eigen::Index k) {
  const double c = cfg.operand_bound;
  return 2.0 * static_cast<double>(k) * c * c + c + 1.0;
}

double copy_lambda(const LinearizationConfig& cfg, const MatmulLayout& l) {
  return lambda_for(cfg.copy_epsilon / 4.0, copy_bound(cfg, l.k), l.cols());
}

}  // namespace

MatmulLayout MatmulLayout::make(Eigen::Index k, Eigen::Index m, Eigen::Index n, Eigen::Index pad) {
  require(k >= 1 && m >= 1 && n >= 1, ErrorKind::ShapeError, "matrix dimensions must be positive");
  require(pad >= 1, ErrorKind::InvalidConstant, "denominator block needs at least one column");
  MatmulLayout l;
  l.k = k;
  l.m = m;
  l.n = n;
  l.pad = pad;
  l.data_rows = std::max(k, m);
  l.enc_width = encoding_width(l.cols());
  return l;
}

double linearization_error_bound(const LinearizationConfig& cfg, Eigen::Index k, Eigen::Index m, Eigen::Index n) {
  return linearization_error_bound(cfg, MatmulLayout::make(k, m, n, cfg.denom_block));
}

double linearization_error_bound(const LinearizationConfig& cfg, const MatmulLayout& l) {
  check_config(cfg);
  const double s = cfg.score_scale;
  const double N = static_cast<double>(l.cols());
  const double K = static_cast<double>(l.m + l.n);
  const double c = cfg.operand_bound;
  // every score is s x_j.x_q with |x_j.x_q| <= k c^2
  const double mu = s * static_cast<double>(l.k) * c * c;

  // the two heads give R = (e^{su}-1)/Z+ - (e^{-su}-1)/Z-, Z+- = N + H+-
  const double z_min = N - K * (1.0 - std::exp(-mu));
  const double h_sum = 2.0 * K * (std::cosh(mu) - 1.0);
  const double h_abs = K * std::expm1(mu);
  const double h_diff = 2.0 * K * std::sinh(mu);
  const double rem = std::expm1(mu) - mu;
  const double odd = 2.0 * (std::sinh(mu) - mu);

  const double err_r = mu * (h_sum / (N * z_min) + h_abs * h_diff / (N * z_min * z_min)) + odd / z_min +
                       rem * h_diff / (z_min * z_min);
  const double r = rescale_of(cfg, l.cols());
  const double rounding = 64.0 * kEps * r * (1.0 + copy_bound(cfg, l.k));
  return r * err_r + cfg.copy_epsilon + rounding;
}

FunctionBlock build_matmul_block(Eigen::Index k, Eigen::Index m, Eigen::Index n, const LinearizationConfig& cfg) {
  return build_matmul_block(MatmulLayout::make(k, m, n, cfg.denom_block), cfg);
}

FunctionBlock build_matmul_block(const MatmulLayout& l, const LinearizationConfig& cfg) {
  check_config(cfg);
  const double s = cfg.score_scale;

  // layer 1: linearized attention into the slot rows, then rescale
  LayerBuilder lin(l.rows(), 1.0);
  for (const double sign : {1.0, -1.0}) {
    AttentionHead& h = lin.head(l.k);
    for (Eigen::Index i = 0; i < l.k; ++i) {
      h.w_k(i, i) = 1.0;
      h.w_q(i, i) = sign * s;
    }
    for (Eigen::Index p = 0; p < l.m; ++p) {
      h.w_v(l.slots() + p, l.identity() + p) = sign;
      h.w_v(l.slots() + p, l.pad_flag()) = -sign / static_cast<double>(l.pad);
    }
  }
  const double r = rescale_of(cfg, l.cols());
  for (Eigen::Index p = 0; p < l.m; ++p) lin.pass(l.slots() + p, l.slots() + p, r - 1.0);

  // layer 2: slots of B column j -> rows [0, m) of destination column j
  LayerBuilder mv(l.rows(), copy_lambda(cfg, l));
  detail::CopyRows rows;
  rows.position = l.position();
  rows.pointer = l.pointer();
  rows.enc_width = l.enc_width;
  rows.flag = l.write_flag();
  rows.scratch = l.copy_scratch();
  rows.src = l.slots();
  rows.dst = 0;
  rows.len = l.m;
  rows.big = 8.0 * copy_bound(cfg, l.k);
  detail::add_copy_stage(mv, rows);

  FunctionBlock block;
  block.name = "matmul";
  block.layers = {lin.build(), mv.build()};
  block.layout = {l.rows(), l.cols(), 0};
  block.mask.cells = BoolMatrix::Constant(l.rows(), l.cols(), false);
  block.mask.cells.block(0, l.dst_col(), l.m, l.n).setConstant(true);
  block.mask.cells.block(0, 0, l.k, l.m + l.n).setConstant(true);
  block.budget = linearization_error_bound(cfg, l);
  validate_block(block);
  return block;
}

Matrix matmul_input(const MatmulLayout& l, const Matrix& A, const Matrix& B, double operand_bound) {
  require(A.rows() == l.k && B.rows() == l.k && A.cols() == l.m && B.cols() == l.n, ErrorKind::ShapeError,
          "operands do not match the matmul layout");
  validate(A, "A");
  validate(B, "B");
  require(A.cwiseAbs().maxCoeff() <= operand_bound && B.cwiseAbs().maxCoeff() <= operand_bound,
          ErrorKind::InvalidInput, "operand entries exceed the declared bound");
  Matrix x = Matrix::Zero(l.rows(), l.cols());
  x.block(0, l.a_col(), l.k, l.m) = A;
  x.block(0, l.b_col(), l.k, l.n) = B;
  x.block(l.pad_flag(), l.pad_col(), 1, l.pad).setOnes();
  x.block(l.identity(), l.a_col(), l.m, l.m).setIdentity();
  for (Eigen::Index t = 0; t < l.cols(); ++t) {
    x.block(l.position(), t, l.enc_width, 1) = binary_encoding(t, l.enc_width);
    x.block(l.pointer(), t, l.enc_width, 1) = binary_encoding(t, l.enc_width);
  }
  for (Eigen::Index j = 0; j < l.n; ++j) {
    x.block(l.pointer(), l.dst_col() + j, l.enc_width, 1) = binary_encoding(l.b_col() + j, l.enc_width);
    x(l.write_flag(), l.dst_col() + j) = 1.0;
  }
  return x;
}

Matrix matmul_output(const MatmulLayout& l, const Matrix& out) {
  require(out.rows() == l.rows() && out.cols() == l.cols(), ErrorKind::LayoutError, "output does not match layout");
  return out.block(0, l.dst_col(), l.m, l.n);
}

Matrix matmul_target(const MatmulLayout& l, const Matrix& input, const Matrix& product) {
  require(product.rows() == l.m && product.cols() == l.n, ErrorKind::ShapeError, "product has the wrong shape");
  Matrix t = input;
  t.block(0, l.dst_col(), l.m, l.n) = product;
  return t;
}

MatmulProblem derived_product(Product which, const Matrix& A, const Matrix& B, const LinearizationConfig& cfg) {
  const Matrix* left = &A;
  const Matrix* right = &B;
  switch (which) {
    case Product::AtB: break;
    case Product::BtA: std::swap(left, right); break;
    case Product::AtA: right = &A; break;
    case Product::BtB: left = &B; break;
  }
  require(left->rows() == right->rows(), ErrorKind::ShapeError, "operands need the same number of rows");
  MatmulProblem p;
  p.layout = MatmulLayout::make(left->rows(), left->cols(), right->cols(), cfg.denom_block);
  p.block = build_matmul_block(p.layout, cfg);
  p.input = matmul_input(p.layout, *left, *right, cfg.operand_bound);
  return p;
}

TransposeLayout TransposeLayout::make(Eigen::Index d) {
  require(d >= 1, ErrorKind::ShapeError, "transpose needs d >= 1");
  TransposeLayout l;
  l.d = d;
  l.enc_width = encoding_width(d);
  return l;
}

namespace {

// gate terms equal to 1 when enc(t) (read from `rows`) equals enc(value), <= -1 otherwise
Terms match_gate(const TransposeLayout& l, Eigen::Index rows, Eigen::Index value) {
  const BinaryEncoding e = binary_encoding(value, l.enc_width);
  Terms g;
  for (Eigen::Index i = 0; i < l.enc_width; ++i) g.push_back({rows + i, e(i)});
  g.push_back({l.ones(), 1.0 - static_cast<double>(l.enc_width)});
  return g;
}

}  // namespace

FunctionBlock build_transpose_block(Eigen::Index d, const TransposeConfig& cfg) {
  require(cfg.operand_bound > 0 && cfg.epsilon > 0, ErrorKind::InvalidConstant, "bounds must be positive");
  const TransposeLayout l = TransposeLayout::make(d);
  const Eigen::Index b = l.enc_width;
  const Eigen::Index N = l.cols();
  const double c = cfg.operand_bound;
  const double spread = static_cast<double>(d + 5) * static_cast<double>(N) * (c + 1.0);
  const double lambda = cfg.lambda > 0 ? cfg.lambda : std::max(1.0, std::log(spread / cfg.epsilon) / 2.0);
  const double gate = c + 1.0;

  // column (g, t) reads A[:, g] from group 0 and keeps entry t
  LayerBuilder gather(l.rows(), lambda);
  {
    AttentionHead& h = gather.head(2 * b);
    for (Eigen::Index i = 0; i < b; ++i) {
      h.w_k(i, l.p_rows() + i) = 1.0;
      h.w_k(b + i, l.r_rows() + i) = 1.0;
      h.w_q(i, l.ones()) = -1.0;
      h.w_q(b + i, l.p_rows() + i) = 1.0;
    }
    for (Eigen::Index r = 0; r < d; ++r) h.w_v(l.z_band() + r, l.a_band() + r) = 1.0;
  }
  for (Eigen::Index r = 0; r < d; ++r) {
    gather.gated({{l.z_band() + r, 1.0}}, match_gate(l, l.r_rows(), r), gate, l.z_band(), 1.0);
    gather.clear(l.z_band() + r);
  }

  // column (g, t) takes entry 0 of column (t, g), then spreads it into Z row t
  LayerBuilder permute(l.rows(), lambda);
  {
    AttentionHead& h = permute.head(2 * b);
    for (Eigen::Index i = 0; i < b; ++i) {
      h.w_k(i, l.p_rows() + i) = 1.0;
      h.w_k(b + i, l.r_rows() + i) = 1.0;
      h.w_q(i, l.r_rows() + i) = 1.0;
      h.w_q(b + i, l.p_rows() + i) = 1.0;
    }
    h.w_v(l.z_band() + 1, l.z_band()) = 1.0;
  }
  for (Eigen::Index t = 0; t < d; ++t)
    permute.gated({{l.z_band() + 1, 1.0}}, match_gate(l, l.r_rows(), t), gate, l.z_band() + t, 1.0);
  permute.clear(l.z_band());
  permute.clear(l.z_band() + 1);
  for (Eigen::Index r = 0; r < d; ++r) permute.clear(l.a_band() + r);

  // column (g, t) averages group t: Z rows of (t, t') hold A[t, t'] at row t'
  LayerBuilder scatter(l.rows(), lambda);
  {
    AttentionHead& h = scatter.head(b);
    for (Eigen::Index i = 0; i < b; ++i) {
      h.w_k(i, l.p_rows() + i) = 1.0;
      h.w_q(i, l.r_rows() + i) = 1.0;
    }
    for (Eigen::Index r = 0; r < d; ++r) h.w_v(l.a_band() + r, l.z_band() + r) = static_cast<double>(d);
  }
  for (Eigen::Index r = 0; r < l.z_len(); ++r) scatter.clear(l.z_band() + r);

  FunctionBlock block;
  block.name = "transpose";
  block.layers = {gather.build(), permute.build(), scatter.build()};
  block.layout = {l.rows(), N, 0};
  block.mask = full_mask(l.rows());
  block.budget = spread * std::exp(-2.0 * lambda) + 64.0 * kEps * (c + 1.0) * static_cast<double>(d);
  validate_block(block);
  return block;
}

Matrix transpose_input(const TransposeLayout& l, const Matrix& A) {
  require(A.rows() == A.cols(), ErrorKind::ShapeError, "transpose needs a square matrix");
  require(A.rows() == l.d, ErrorKind::ShapeError, "matrix does not match the transpose layout");
  validate(A, "A");
  Matrix x = Matrix::Zero(l.rows(), l.cols());
  x.block(l.a_band(), 0, l.d, l.d) = A;
  for (Eigen::Index g = 0; g < l.d; ++g)
    for (Eigen::Index t = 0; t < l.d; ++t) {
      const Eigen::Index col = g * l.d + t;
      x.block(l.r_rows(), col, l.enc_width, 1) = binary_encoding(t, l.enc_width);
      x.block(l.p_rows(), col, l.enc_width, 1) = binary_encoding(g, l.enc_width);
      x(l.ones(), col) = 1.0;
    }
  return x;
}

Matrix transpose_output(const TransposeLayout& l, const Matrix& out, Eigen::Index group) {
  require(out.rows() == l.rows() && out.cols() == l.cols(), ErrorKind::LayoutError, "output does not match layout");
  require(group >= 0 && group < l.d, ErrorKind::LayoutError, "group out of range");
  return out.block(l.a_band(), group * l.d, l.d, l.d);
}

Matrix transpose_target(const TransposeLayout& l, const Matrix& input, const Matrix& At) {
  Matrix t = input;
  t.block(l.z_band(), 0, l.z_len(), l.cols()).setZero();
  for (Eigen::Index g = 0; g < l.d; ++g) t.block(l.a_band(), g * l.d, l.d, l.d) = At;
  return t;
}

}  // namespace weightsmith
