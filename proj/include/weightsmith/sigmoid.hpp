#pragma once

#include <cstdint>
#include <vector>

#include "weightsmith/transformer.hpp"

namespace weightsmith {

double sigmoid(double z);

/// gamma * sigmoid(tau * (x^T a + b)).
struct SigmoidAtom {
  double gamma = 0.0;
  Vector a;
  double b = 0.0;
  double tau = 1.0;

  /// tau * [a; b], to be applied to [x; 1]
  Vector folded() const;
  double operator()(const Vector& x) const;
};

/// N functions of m atoms each over the box [-box, box]^dim.
/// f_j(x) = sum_i c_ji sigmoid([x; 1]^T folded a_ji), j 0-based.
struct FunctionTable {
  Eigen::Index dim = 1;
  double box = 1.0;
  double barron_C = 1.0;
  // atoms[j][i]
  std::vector<std::vector<SigmoidAtom>> atoms;

  Eigen::Index n_funcs() const { return static_cast<Eigen::Index>(atoms.size()); }
  Eigen::Index terms() const { return atoms.empty() ? 0 : static_cast<Eigen::Index>(atoms.front().size()); }

  /// N x m
  Matrix coefficients() const;
  /// (dim + 1) x N: column j is the folded direction of atom i of f_j
  Matrix folded(Eigen::Index i) const;
  /// max |x^T a| over the box plus |b|, times tau, over all atoms
  double max_score() const;
};

/// Throws InvalidInput on ragged tables or atoms outside the class bounds.
void validate_table(const FunctionTable& table);

/// Direct evaluation; j out of range -> InvalidIndicator.
double eval_reference(const FunctionTable& table, Eigen::Index j, const Vector& x);

/// Three column bands of `band` tokens. Rows: data band (max(N, dim + 1)) holding
/// e at column 0 and [x; 1] at column band | moved copy of the data band |
/// pointer enc (enc of the output column, at column band only) | own enc (zero
/// at column band) | selector (1 at column band) | indicator broadcast (N) |
/// gated indicator (N). The result lands in row 0 of column 2 band.
struct SigmoidLayout {
  Eigen::Index dim = 1;
  Eigen::Index n_funcs = 1;
  Eigen::Index band = 1;
  Eigen::Index data_rows = 2;
  Eigen::Index enc_width = 2;

  static SigmoidLayout make(Eigen::Index dim, Eigen::Index n_funcs, Eigen::Index band = 0);
  static SigmoidLayout make(const FunctionTable& table, Eigen::Index band = 0);

  Eigen::Index cols() const { return 3 * band; }
  Eigen::Index x_col() const { return band; }
  Eigen::Index out_col() const { return 2 * band; }

  Eigen::Index moved() const { return data_rows; }
  Eigen::Index pointer() const { return 2 * data_rows; }
  Eigen::Index own() const { return pointer() + enc_width; }
  Eigen::Index selector() const { return own() + enc_width; }
  Eigen::Index spread() const { return selector() + 1; }
  Eigen::Index gated() const { return spread() + n_funcs; }
  Eigen::Index rows() const { return gated() + n_funcs; }
};

struct SigmoidConfig {
  double epsilon = 1e-10;
};

/// Layer 1 moves [x; 1] into the second data band, layer 2 broadcasts e to every
/// token and keeps a copy at the x column, layer 3 has one head per term whose
/// softmax splits between the x column and the output column as sigmoid(score).
FunctionBlock build_sigmoid_block(const FunctionTable& table, const SigmoidLayout& layout,
                                  const SigmoidConfig& cfg = {});
FunctionBlock build_sigmoid_block(const FunctionTable& table, const SigmoidConfig& cfg = {});

/// All m terms in one head. Not available yet: throws Unsupported.
FunctionBlock build_sigmoid_block_single_head(const FunctionTable& table, const SigmoidLayout& layout);

/// e must be one-hot of length N (InvalidIndicator otherwise).
Matrix sigmoid_input(const SigmoidLayout& layout, const Vector& e, const Vector& x);
Matrix sigmoid_input(const SigmoidLayout& layout, Eigen::Index j, const Vector& x);
double sigmoid_output(const SigmoidLayout& layout, const Matrix& out);

// ---------------------------------------------------------------- fitting

struct FitOptions {
  double tau_floor = 1.0;
  // subtracted from the samples before fitting
  double offset = 0.0;
  int iterations = 200;
  int restarts = 8;
  std::uint64_t seed = 0;
};

struct FitResult {
  FunctionTable table;
  double tau = 1.0;
  double achieved_error = 0.0;
};

/// Least-squares fit of sum_i c_i sigmoid(tau (a_i^T x + b_i)) to samples
/// (X is dim x S), tau = max(tau_floor, sqrt(m) ln m). Returns a one-function table.
FitResult fit_sigmoid_combination(const Matrix& X, const Vector& y, Eigen::Index m, const FitOptions& opts = {});

/// Fits for each m in turn, warm-starting from the previous fit.
std::vector<FitResult> fit_sigmoid_sequence(const Matrix& X, const Vector& y, const std::vector<Eigen::Index>& ms,
                                            const FitOptions& opts = {});

}  // namespace weightsmith
