#pragma once

#include "weightsmith/primitives.hpp"

namespace weightsmith {

/// Softmax linearization settings. Scores stay within score_scale * k * c^2,
/// so exp(z) ~ 1 + z; denom_block all-zero padding columns hold the denominator
/// near the token count. rescale == 0 lets the builder pick N / (2 score_scale).
struct LinearizationConfig {
  double score_scale = 1e-3;
  Eigen::Index denom_block = 8;
  double rescale = 0.0;
  // entry bound of the operands
  double operand_bound = 1.0;
  // read/write error of the copy stage
  double copy_epsilon = 1e-12;
};

/// Columns: A (m) | B (n) | padding (M) | destination (n).
/// Rows: Q = [A B] (D = max(k, m) rows) | slots (m) | pad flag | identity (m) |
///       position enc | pointer enc | write flag | copy scratch (m).
/// The product A^T B lands in rows [0, m) of the destination columns.
struct MatmulLayout {
  Eigen::Index k = 1, m = 1, n = 1, pad = 1;
  Eigen::Index data_rows = 1;
  Eigen::Index enc_width = 1;

  static MatmulLayout make(Eigen::Index k, Eigen::Index m, Eigen::Index n, Eigen::Index pad);

  Eigen::Index cols() const { return m + n + pad + n; }
  Eigen::Index a_col() const { return 0; }
  Eigen::Index b_col() const { return m; }
  Eigen::Index pad_col() const { return m + n; }
  Eigen::Index dst_col() const { return m + n + pad; }

  Eigen::Index slots() const { return data_rows; }
  Eigen::Index pad_flag() const { return slots() + m; }
  Eigen::Index identity() const { return pad_flag() + 1; }
  Eigen::Index position() const { return identity() + m; }
  Eigen::Index pointer() const { return position() + enc_width; }
  Eigen::Index write_flag() const { return pointer() + enc_width; }
  Eigen::Index copy_scratch() const { return write_flag() + 1; }
  Eigen::Index rows() const { return copy_scratch() + m; }
};

/// Certified bound on |block output - A^T B| for operands bounded by
/// cfg.operand_bound with inner dimension k and m + n nonzero tokens out of N.
double linearization_error_bound(const LinearizationConfig& cfg, Eigen::Index k, Eigen::Index m, Eigen::Index n);
double linearization_error_bound(const LinearizationConfig& cfg, const MatmulLayout& layout);

/// Two layers: a +score / -score head pair whose difference is 2 s A^T B / N up
/// to third order, rescaled by the MLP, then the copy stage moving the slots of
/// each B column into the destination columns.
FunctionBlock build_matmul_block(Eigen::Index k, Eigen::Index m, Eigen::Index n, const LinearizationConfig& cfg);
FunctionBlock build_matmul_block(const MatmulLayout& layout, const LinearizationConfig& cfg);

Matrix matmul_input(const MatmulLayout& layout, const Matrix& A, const Matrix& B, double operand_bound = 1.0);
/// The m x n block the product is written to.
Matrix matmul_output(const MatmulLayout& layout, const Matrix& out);
/// `input` with `product` written at the destination, for use as an oracle target.
Matrix matmul_target(const MatmulLayout& layout, const Matrix& input, const Matrix& product);

enum class Product { AtB, BtA, AtA, BtB };

struct MatmulProblem {
  MatmulLayout layout;
  FunctionBlock block;
  Matrix input;
};

/// B^T A, A^T A, B^T B by operand placement on the same block.
MatmulProblem derived_product(Product which, const Matrix& A, const Matrix& B, const LinearizationConfig& cfg);

struct TransposeConfig {
  double epsilon = 1e-9;
  double operand_bound = 1.0;
  // 0 picks lambda from epsilon
  double lambda = 0.0;
};

/// Columns c = g d + t (d groups of d tokens). Rows: A band (d) | Z band (max(d, 2)) |
/// enc(t) | enc(g) | ones. A sits in group 0; the output holds A^T in every group.
struct TransposeLayout {
  Eigen::Index d = 1;
  Eigen::Index enc_width = 1;

  static TransposeLayout make(Eigen::Index d);

  Eigen::Index cols() const { return d * d; }
  Eigen::Index a_band() const { return 0; }
  Eigen::Index z_band() const { return d; }
  Eigen::Index z_len() const { return d < 2 ? 2 : d; }
  Eigen::Index r_rows() const { return d + z_len(); }
  Eigen::Index p_rows() const { return r_rows() + enc_width; }
  Eigen::Index ones() const { return p_rows() + enc_width; }
  Eigen::Index rows() const { return ones() + 1; }
};

/// Vectorize (gather column g of A and select entry t), permute (g,t) <-> (t,g),
/// devectorize (average group t back into the A band).
FunctionBlock build_transpose_block(Eigen::Index d, const TransposeConfig& cfg = {});

Matrix transpose_input(const TransposeLayout& layout, const Matrix& A);
/// Group g of the A band.
Matrix transpose_output(const TransposeLayout& layout, const Matrix& out, Eigen::Index group = 0);
Matrix transpose_target(const TransposeLayout& layout, const Matrix& input, const Matrix& At);

}  // namespace weightsmith
