#pragma once

#include <string>
#include <vector>

#include "weightsmith/numerics.hpp"

namespace weightsmith {

/// One attention head. Scores are (w_k X)^T (w_q X); the head adds
/// w_v X softmax(scores) to the residual stream.
template <typename Scalar>
struct BasicAttentionHead {
  MatrixX<Scalar> w_k;
  MatrixX<Scalar> w_q;
  MatrixX<Scalar> w_v;

  Eigen::Index width() const { return w_v.cols(); }
};

/// Encoder layer: summed attention heads with residual, then a one-hidden-layer
/// ReLU MLP with residual. An empty MLP (zero hidden units) is allowed.
template <typename Scalar>
struct BasicTransformerLayer {
  std::vector<BasicAttentionHead<Scalar>> heads;
  MatrixX<Scalar> w1;
  VectorX<Scalar> b1;
  MatrixX<Scalar> w2;
  VectorX<Scalar> b2;
  double lambda = 1.0;

  Eigen::Index width() const { return heads.empty() ? b2.size() : heads.front().width(); }
  Eigen::Index hidden() const { return w1.rows(); }
};

using AttentionHead = BasicAttentionHead<double>;
using TransformerLayer = BasicTransformerLayer<double>;

/// Throws ShapeError when the head/MLP dimensions disagree with each other.
template <typename Scalar>
void validate_layer(const BasicTransformerLayer<Scalar>& layer) {
  require(!layer.heads.empty(), ErrorKind::ShapeError, "a layer needs at least one head");
  const Eigen::Index d = layer.width();
  for (const auto& h : layer.heads) {
    require(h.w_k.rows() == h.w_q.rows(), ErrorKind::ShapeError, "key/query attention dims differ");
    require(h.w_k.cols() == d && h.w_q.cols() == d && h.w_v.cols() == d && h.w_v.rows() == d,
            ErrorKind::ShapeError, "head weights do not match the embedding width");
  }
  require(layer.w1.cols() == d && layer.w2.rows() == d && layer.w2.cols() == layer.w1.rows() &&
              layer.b1.size() == layer.w1.rows() && layer.b2.size() == d,
          ErrorKind::ShapeError, "MLP weights do not match the embedding width");
  Temperature{layer.lambda};
}

/// x + sum_h W_V^h x softmax((W_K^h x)^T (W_Q^h x), lambda).
template <typename Scalar, typename Derived>
MatrixX<Scalar> attention_forward(const BasicTransformerLayer<Scalar>& layer, const Eigen::MatrixBase<Derived>& x) {
  require(x.rows() == layer.width(), ErrorKind::ShapeError,
          "input has " + std::to_string(x.rows()) + " rows, layer expects " + std::to_string(layer.width()));
  MatrixX<Scalar> out = x;
  const Temperature t{layer.lambda};
  for (const auto& h : layer.heads) {
    // a zero value map contributes exactly nothing
    if (h.w_v.isZero(0)) continue;
    const MatrixX<Scalar> keys = h.w_k * x;
    const MatrixX<Scalar> queries = h.w_q * x;
    const MatrixX<Scalar> weights = temp_softmax(keys.transpose() * queries, t);
    out.noalias() += (h.w_v * x) * weights;
  }
  return out;
}

/// attn(x) + W2 relu(W1 attn(x) + b1 1^T) + b2 1^T.
template <typename Scalar, typename Derived>
MatrixX<Scalar> layer_forward(const BasicTransformerLayer<Scalar>& layer, const Eigen::MatrixBase<Derived>& x) {
  MatrixX<Scalar> a = attention_forward(layer, x);
  if (layer.hidden() > 0) {
    MatrixX<Scalar> pre = layer.w1 * a;
    pre.colwise() += layer.b1;
    a.noalias() += layer.w2 * relu(pre);
  }
  a.colwise() += layer.b2;
  return a;
}

/// Expected input geometry of a block. cols == 0 accepts any column count up to
/// max_cols (0 = unbounded).
struct BlockLayout {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index max_cols = 0;
};

/// Entries whose values a block guarantees. A single-column mask applies to
/// every column of a column-agnostic block.
struct ConsequentialMask {
  BoolMatrix cells;

  bool covers(Eigen::Index rows, Eigen::Index cols) const;
  bool at(Eigen::Index row, Eigen::Index col) const { return cells(row, cells.cols() == 1 ? 0 : col); }
};

struct FunctionBlock {
  std::string name;
  std::vector<TransformerLayer> layers;
  BlockLayout layout;
  ConsequentialMask mask;
  double budget = 0;
};

struct VerificationReport {
  std::string block;
  std::size_t cases = 0;
  double max_error = 0;
  double budget = 0;
  bool pass = true;
  Eigen::Index worst_row = -1;
  Eigen::Index worst_col = -1;
  double wall_time_s = 0;

  /// Fold another case into this report (worst error wins, pass is AND-ed).
  void merge(const VerificationReport& other);
};

void validate_block(const FunctionBlock& block);

/// Left fold of layer_forward over the block's layers. Throws LayoutError when
/// x does not match block.layout.
Matrix block_forward(const FunctionBlock& block, const Matrix& x);

/// Max |out - expected| over mask-true entries; pass iff that is <= budget.
VerificationReport check_against_oracle(const FunctionBlock& block, const Matrix& x, const Matrix& expected);

VerificationReport compare_masked(const std::string& name, const Matrix& out, const Matrix& expected,
                                  const ConsequentialMask& mask, double budget);

/// Runs `first` then `second`; budgets add, plus `cross_term` for each
/// multiplication stage whose operands carry upstream error.
FunctionBlock compose(const FunctionBlock& first, const FunctionBlock& second, double cross_term = 0.0);

ConsequentialMask full_mask(Eigen::Index rows, Eigen::Index cols = 1);

}  // namespace weightsmith
