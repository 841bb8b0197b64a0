#pragma once

#include <vector>

#include "weightsmith/numerics.hpp"

namespace weightsmith {

/// +-1 bit vector of a position. Bit value 0 maps to -1.
using BinaryEncoding = Vector;

/// ceil(log2(n_max)), at least min_width.
Eigen::Index encoding_width(Eigen::Index n_max, Eigen::Index min_width = 1);

/// Encoding of 0-based position i with the given width (least significant bit first).
BinaryEncoding binary_encoding(Eigen::Index i, Eigen::Index width);

/// n_max distinct +-1 vectors; r_i.r_i = width and r_i.r_j <= width - 2 for i != j.
std::vector<BinaryEncoding> make_binary_encodings(Eigen::Index n_max, Eigen::Index min_width = 1);

/// Same family as columns of a width x n_max matrix.
Matrix encoding_matrix(Eigen::Index n_max, Eigen::Index min_width = 1);

/// min_i (r_i.r_i - max_{j != i} r_i.r_j); +inf for a single encoding.
double separation_margin(const std::vector<BinaryEncoding>& family);

/// Demonstration chains (x_i, s_i^1..s_i^L) plus the partial test chain
/// (x_test, s^1..s^{ell-1}) predicted so far.
struct CotPrompt {
  std::vector<std::vector<Vector>> chains;
  std::vector<Vector> test;

  Eigen::Index samples() const { return static_cast<Eigen::Index>(chains.size()); }
  /// L, from the first chain. Zero when there are no chains.
  Eigen::Index depth() const;
  /// Largest feature dimension in the prompt.
  Eigen::Index max_dim() const;
};

/// Row schema of the CoT input matrix. Columns are tokens, N = n(L+1) + ell.
///
///   [0, D)            band 1: token features
///   [D, 2D)           band 2: zeros
///   cycle1, cycle2    position inside the chain, 1..L+1
///   enumeration       1..N
///   ln                ln(1)..ln(N)
///   indicator         0 on demonstrations, 1 on the test chain
///   ones
///   own               binary encoding of the token position (width b)
///   dest              pointer encoding (width b), self by default
///   scratch           rows the filtering transformer computes into
struct PromptLayout {
  Eigen::Index d_data = 1;
  Eigen::Index n_max = 4;
  Eigen::Index enc_width = 2;

  static PromptLayout make(Eigen::Index d_data, Eigen::Index n_max);

  Eigen::Index band1() const { return 0; }
  Eigen::Index band2() const { return d_data; }
  Eigen::Index cycle1() const { return 2 * d_data; }
  Eigen::Index cycle2() const { return cycle1() + 1; }
  Eigen::Index enumeration() const { return cycle1() + 2; }
  Eigen::Index ln() const { return cycle1() + 3; }
  Eigen::Index indicator() const { return cycle1() + 4; }
  Eigen::Index ones() const { return cycle1() + 5; }
  Eigen::Index own() const { return cycle1() + 6; }
  Eigen::Index dest() const { return own() + enc_width; }
  Eigen::Index scratch() const { return dest() + enc_width; }

  // scratch rows
  Eigen::Index n_row() const { return scratch(); }
  Eigen::Index frac_row() const { return scratch() + 1; }
  Eigen::Index kf_row() const { return scratch() + 2; }
  Eigen::Index qf_row() const { return scratch() + 3; }
  Eigen::Index first_row() const { return scratch() + 4; }
  Eigen::Index prod_row() const { return scratch() + 5; }
  Eigen::Index ell_row() const { return scratch() + 6; }
  Eigen::Index ell_bcast_row() const { return scratch() + 7; }
  Eigen::Index ell1_row() const { return scratch() + 8; }

  Eigen::Index rows() const { return scratch() + 9; }
};

/// N = n(L+1) + ell.
Eigen::Index prompt_tokens(const CotPrompt& prompt, Eigen::Index ell);

/// Throws PromptStateError unless the prompt is well formed for step ell.
void check_prompt(const CotPrompt& prompt, Eigen::Index ell);

/// The layout sized to the prompt (D = max feature dim, n_max = N).
PromptLayout layout_for(const CotPrompt& prompt, Eigen::Index ell);

Matrix assemble_cot_input(const CotPrompt& prompt, Eigen::Index ell, const PromptLayout& layout);
Matrix assemble_cot_input(const CotPrompt& prompt, Eigen::Index ell);

/// 2D x N target: s^{ell-1} tokens in band 1, s^ell tokens in band 2, zeros elsewhere.
Matrix ideal_filtered(const CotPrompt& prompt, Eigen::Index ell, Eigen::Index d_data);
Matrix ideal_filtered(const CotPrompt& prompt, Eigen::Index ell);

/// The projection onto the two data bands.
Matrix project_bands(const Matrix& out, const PromptLayout& layout);

}  // namespace weightsmith
