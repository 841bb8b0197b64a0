#pragma once

#include <utility>
#include <vector>

#include "weightsmith/transformer.hpp"

namespace weightsmith::detail {

using Term = std::pair<Eigen::Index, double>;
using Terms = std::vector<Term>;

// Accumulates a layer row by row: hidden ReLU units are written as sparse
// combinations of the attention output, outputs as sparse combinations of units.
class LayerBuilder {
 public:
  explicit LayerBuilder(Eigen::Index width, double lambda = 1.0) : width_(width), lambda_(lambda) {}

  Eigen::Index width() const { return width_; }

  // zero head with attention dim r; fill w_k/w_q/w_v afterwards
  AttentionHead& head(Eigen::Index r = 1) {
    AttentionHead h;
    h.w_k = Matrix::Zero(r, width_);
    h.w_q = Matrix::Zero(r, width_);
    h.w_v = Matrix::Zero(width_, width_);
    heads_.push_back(std::move(h));
    return heads_.back();
  }

  // relu(sum w * a[row] + bias)
  Eigen::Index unit(const Terms& terms, double bias = 0.0) {
    units_.push_back({terms, bias});
    return static_cast<Eigen::Index>(units_.size()) - 1;
  }

  void emit(Eigen::Index row, Eigen::Index unit, double coeff) { outs_.push_back({row, unit, coeff}); }
  void bias(Eigen::Index row, double value) { b2_.push_back({row, value}); }

  // out[to] += coeff * (sum terms), exact for any sign
  void pass(const Terms& terms, Eigen::Index to, double coeff) {
    Terms neg;
    for (const auto& [r, w] : terms) neg.push_back({r, -w});
    emit(to, unit(terms), coeff);
    emit(to, unit(neg), -coeff);
  }
  void pass(Eigen::Index from, Eigen::Index to, double coeff) { pass(Terms{{from, 1.0}}, to, coeff); }
  void clear(Eigen::Index row) { pass(row, row, -1.0); }

  // out[to] += coeff * u when gate == 1, and 0 when gate == 0 (needs |u| <= big)
  void gated(const Terms& u, const Terms& gate, double big, Eigen::Index to, double coeff) {
    Terms plus = u, minus;
    for (const auto& [r, w] : u) minus.push_back({r, -w});
    for (const auto& [r, w] : gate) {
      plus.push_back({r, big * w});
      minus.push_back({r, big * w});
    }
    emit(to, unit(plus, -big), coeff);
    emit(to, unit(minus, -big), -coeff);
  }

  TransformerLayer build() const {
    TransformerLayer layer;
    layer.lambda = lambda_;
    layer.heads = heads_;
    if (layer.heads.empty()) {
      AttentionHead h;
      h.w_k = Matrix::Zero(1, width_);
      h.w_q = Matrix::Zero(1, width_);
      h.w_v = Matrix::Zero(width_, width_);
      layer.heads.push_back(std::move(h));
    }
    const auto hidden = static_cast<Eigen::Index>(units_.size());
    layer.w1 = Matrix::Zero(hidden, width_);
    layer.b1 = Vector::Zero(hidden);
    layer.w2 = Matrix::Zero(width_, hidden);
    layer.b2 = Vector::Zero(width_);
    for (Eigen::Index u = 0; u < hidden; ++u) {
      for (const auto& [r, w] : units_[u].terms) layer.w1(u, r) += w;
      layer.b1(u) = units_[u].bias;
    }
    for (const auto& o : outs_) layer.w2(o.row, o.unit) += o.coeff;
    for (const auto& [r, v] : b2_) layer.b2(r) += v;
    validate_layer(layer);
    return layer;
  }

 private:
  struct Unit {
    Terms terms;
    double bias;
  };
  struct Out {
    Eigen::Index row;
    Eigen::Index unit;
    double coeff;
  };

  Eigen::Index width_;
  double lambda_;
  std::vector<AttentionHead> heads_;
  std::vector<Unit> units_;
  std::vector<Out> outs_;
  std::vector<std::pair<Eigen::Index, double>> b2_;
};

// Row coordinates of a pointer-driven copy: every token with flag 1 replaces
// its dst rows by the src rows of the token its pointer encodes.
struct CopyRows {
  Eigen::Index position = 0;
  Eigen::Index pointer = 0;
  Eigen::Index enc_width = 1;
  Eigen::Index flag = 0;
  Eigen::Index scratch = 0;
  Eigen::Index src = 0;
  Eigen::Index dst = 0;
  Eigen::Index len = 1;
  // bound on |scratch + src - dst| at unflagged tokens
  double big = 8.0;
};

inline void add_copy_stage(LayerBuilder& lb, const CopyRows& c) {
  AttentionHead& read = lb.head(c.enc_width);
  for (Eigen::Index i = 0; i < c.enc_width; ++i) {
    read.w_k(i, c.position + i) = 1.0;
    read.w_q(i, c.pointer + i) = 1.0;
  }
  for (Eigen::Index r = 0; r < c.len; ++r) read.w_v(c.scratch + r, c.src + r) = 1.0;

  // minus-identity head: cancels the token's own src rows
  AttentionHead& self = lb.head(c.enc_width);
  for (Eigen::Index i = 0; i < c.enc_width; ++i) {
    self.w_k(i, c.position + i) = 1.0;
    self.w_q(i, c.position + i) = 1.0;
  }
  for (Eigen::Index r = 0; r < c.len; ++r) self.w_v(c.scratch + r, c.src + r) = -1.0;

  // scratch = src(pointer) - src(self), so scratch + src - dst is the update
  for (Eigen::Index r = 0; r < c.len; ++r) {
    const Terms u{{c.scratch + r, 1.0}, {c.src + r, 1.0}, {c.dst + r, -1.0}};
    lb.gated(u, {{c.flag, 1.0}}, c.big, c.dst + r, 1.0);
    lb.clear(c.scratch + r);
  }
}

}  // namespace weightsmith::detail
