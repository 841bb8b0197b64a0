#pragma once

#include <cstdint>
#include <vector>

#include "weightsmith/transformer.hpp"

namespace weightsmith {

/// Rectangle of rows x token columns.
struct RegionSpec {
  Eigen::Index row_start = 0;
  Eigen::Index row_len = 1;
  Eigen::Index col_start = 0;
  Eigen::Index col_len = 1;
};

/// Smallest lambda with n_max * c * exp(-lambda * margin) <= epsilon.
double lambda_for(double epsilon, double c, Eigen::Index n_max, double margin = 2.0);

/// Total softmax mass a query can put off its target, times the value spread 2c.
double attention_leak_bound(double lambda, double c, Eigen::Index n_tokens, double margin = 2.0);

// ---------------------------------------------------------------- copy

/// Rows: payload [0, data_rows) | scratch (row_len) | position enc | pointer enc | write flag.
struct CopyLayout {
  Eigen::Index data_rows = 1;
  Eigen::Index scratch_len = 1;
  Eigen::Index n_max = 2;
  Eigen::Index enc_width = 1;

  static CopyLayout make(Eigen::Index data_rows, Eigen::Index row_len, Eigen::Index n_max);

  Eigen::Index scratch() const { return data_rows; }
  Eigen::Index position() const { return data_rows + scratch_len; }
  Eigen::Index pointer() const { return position() + enc_width; }
  Eigen::Index flag() const { return pointer() + enc_width; }
  Eigen::Index rows() const { return flag() + 1; }
};

/// One layer, two heads: a pointer head reads src rows of the pointed-to token,
/// a minus-identity head cancels the token's own src rows, and the MLP writes
/// the difference into dst rows on flagged tokens. `data_bound` bounds the payload.
FunctionBlock build_copy_block(const CopyLayout& layout, const RegionSpec& src, const RegionSpec& dst, double lambda,
                               double data_bound = 1.0);

/// Appends position/pointer/flag rows to a payload (data_rows x N): destination
/// column dst.col_start + t points at src.col_start + t.
Matrix copy_input(const CopyLayout& layout, const Matrix& data, const RegionSpec& src, const RegionSpec& dst);

// ---------------------------------------------------------------- adder

/// Rows: a bits | b bits | out bits (d + 1), least significant first, 0/1 valued.
/// Each column is an independent addition.
FunctionBlock build_adder_network(Eigen::Index d);

Matrix adder_input(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& pairs, Eigen::Index d);
std::uint64_t adder_read(const Matrix& out, Eigen::Index col, Eigen::Index d);

/// +-1 bits to 0/1 bits.
Matrix unit_bits(const Matrix& signed_bits);

// ---------------------------------------------------------------- filtering

/// A 0/1 control row; `tolerance` is how far a dirty bit may sit from 0 or 1.
struct BitRow {
  Eigen::Index row = 0;
  double tolerance = 1e-9;
};

/// Data band [data_start, data_start + data_len) filtered in place by the first
/// bit row; the optional second bit row writes a filtered copy into band2_start.
struct BitFilterLayout {
  Eigen::Index rows = 0;
  Eigen::Index data_start = 0;
  Eigen::Index data_len = 1;
  Eigen::Index band2_start = -1;
};

double default_filter_constant(double c_data);

FunctionBlock build_bit_filter_layer(const BitFilterLayout& layout, const std::vector<BitRow>& bits, double C);

enum class IndicatorShape {
  // 1 - |x| on [-1, 1], 0 outside; exact on integers
  Hat,
  // 1 on |x| <= 1/4, 0 on |x| >= 1/2; absorbs small drift
  Plateau,
};

/// Replaces each listed row by the indicator of that row being zero.
FunctionBlock build_bit_creation_layer(Eigen::Index rows, const std::vector<Eigen::Index>& diff_rows,
                                       IndicatorShape shape = IndicatorShape::Hat);

/// Head over [data (d_data rows) ; one-hot skill (K rows)]. Queries of skill k
/// average the data of skill-k tokens. k is 1-based.
AttentionHead build_subspace_filter_head(Eigen::Index d_data, Eigen::Index skill_count, Eigen::Index k, double C);

/// The head's column-stochastic attention matrix on x (keys x queries).
Matrix attention_weights(const AttentionHead& head, const Matrix& x, double lambda = 1.0);

}  // namespace weightsmith
