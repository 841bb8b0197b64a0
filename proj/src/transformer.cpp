#include "weightsmith/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace weightsmith {

bool ConsequentialMask::covers(Eigen::Index rows, Eigen::Index cols) const {
  return cells.rows() == rows && (cells.cols() == 1 || cells.cols() == cols);
}

void VerificationReport::merge(const VerificationReport& other) {
  cases += other.cases;
  if (other.max_error > max_error || std::isnan(other.max_error)) {
    max_error = other.max_error;
    worst_row = other.worst_row;
    worst_col = other.worst_col;
  }
  budget = std::max(budget, other.budget);
  pass = pass && other.pass;
  wall_time_s += other.wall_time_s;
}

void validate_block(const FunctionBlock& block) {
  require(block.budget > 0, ErrorKind::InvalidInput, block.name + ": budget must be positive");
  require(block.mask.cells.rows() == block.layout.rows, ErrorKind::ShapeError, block.name + ": mask rows mismatch");
  require(block.mask.cells.cols() == 1 || block.mask.cells.cols() == block.layout.cols, ErrorKind::ShapeError,
          block.name + ": mask cols mismatch");
  require(block.mask.cells.any(), ErrorKind::InvalidInput, block.name + ": mask has no consequential entry");
  for (const auto& layer : block.layers) {
    validate_layer(layer);
    require(layer.width() == block.layout.rows, ErrorKind::ShapeError, block.name + ": layer width mismatch");
  }
}

Matrix block_forward(const FunctionBlock& block, const Matrix& x) {
  const auto& lay = block.layout;
  require(x.rows() == lay.rows, ErrorKind::LayoutError,
          block.name + ": expected " + std::to_string(lay.rows) + " rows, got " + std::to_string(x.rows()));
  require(lay.cols == 0 || x.cols() == lay.cols, ErrorKind::LayoutError,
          block.name + ": expected " + std::to_string(lay.cols) + " columns, got " + std::to_string(x.cols()));
  require(lay.max_cols == 0 || x.cols() <= lay.max_cols, ErrorKind::CapacityError,
          block.name + ": " + std::to_string(x.cols()) + " tokens exceed capacity " + std::to_string(lay.max_cols));
  Matrix y = x;
  for (const auto& layer : block.layers) y = layer_forward(layer, y);
  return y;
}

VerificationReport compare_masked(const std::string& name, const Matrix& out, const Matrix& expected,
                                  const ConsequentialMask& mask, double budget) {
  VerificationReport r;
  r.block = name;
  r.cases = 1;
  r.budget = budget;
  if (out.rows() != expected.rows() || out.cols() != expected.cols() || !mask.covers(out.rows(), out.cols())) {
    r.max_error = std::numeric_limits<double>::infinity();
    r.pass = false;
    return r;
  }
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      if (!mask.at(i, j)) continue;
      const double err = std::abs(out(i, j) - expected(i, j));
      if (err > r.max_error || std::isnan(err)) {
        r.max_error = std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
        r.worst_row = i;
        r.worst_col = j;
      }
    }
  }
  r.pass = r.max_error <= budget;
  return r;
}

VerificationReport check_against_oracle(const FunctionBlock& block, const Matrix& x, const Matrix& expected) {
  return compare_masked(block.name, block_forward(block, x), expected, block.mask, block.budget);
}

FunctionBlock compose(const FunctionBlock& first, const FunctionBlock& second, double cross_term) {
  require(first.layout.rows == second.layout.rows, ErrorKind::LayoutError, "composed blocks must share the row layout");
  FunctionBlock out = second;
  out.name = first.name + "+" + second.name;
  out.layers = first.layers;
  out.layers.insert(out.layers.end(), second.layers.begin(), second.layers.end());
  out.layout = first.layout;
  out.budget = first.budget + second.budget + cross_term;
  return out;
}

ConsequentialMask full_mask(Eigen::Index rows, Eigen::Index cols) {
  ConsequentialMask m;
  m.cells = BoolMatrix::Constant(rows, cols, true);
  return m;
}

}  // namespace weightsmith
