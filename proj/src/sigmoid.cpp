#include "weightsmith/sigmoid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "layer_builder.hpp"
#include "weightsmith/encodings.hpp"

namespace weightsmith {

using detail::LayerBuilder;

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Euclidean projection onto {a : |a|_1 <= radius}
Vector project_l1(const Vector& a, double radius) {
  if (a.lpNorm<1>() <= radius) return a;
  std::vector<double> u(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) u[i] = std::abs(a(i));
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0, theta = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double t = (cum - radius) / static_cast<double>(k + 1);
    if (u[k] > t) theta = t;
  }
  Vector out(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out(i) = std::copysign(std::max(std::abs(a(i)) - theta, 0.0), a(i));
  return out;
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Vector SigmoidAtom::folded() const {
  Vector f(a.size() + 1);
  f << tau * a, tau * b;
  return f;
}

double SigmoidAtom::operator()(const Vector& x) const { return gamma * sigmoid(tau * (x.dot(a) + b)); }

Matrix FunctionTable::coefficients() const {
  Matrix c(n_funcs(), terms());
  for (Eigen::Index j = 0; j < n_funcs(); ++j)
    for (Eigen::Index i = 0; i < terms(); ++i) c(j, i) = atoms[j][i].gamma;
  return c;
}

Matrix FunctionTable::folded(Eigen::Index i) const {
  Matrix m(dim + 1, n_funcs());
  for (Eigen::Index j = 0; j < n_funcs(); ++j) m.col(j) = atoms[j][i].folded();
  return m;
}

double FunctionTable::max_score() const {
  double z = 0;
  for (const auto& row : atoms)
    for (const auto& at : row) z = std::max(z, at.tau * (box * at.a.lpNorm<1>() + std::abs(at.b)));
  return z;
}

void validate_table(const FunctionTable& t) {
  require(t.dim >= 1, ErrorKind::InvalidInput, "table dimension must be positive");
  require(t.n_funcs() >= 1 && t.terms() >= 1, ErrorKind::InvalidInput, "table needs at least one function and term");
  require(std::isfinite(t.box) && t.box > 0, ErrorKind::InvalidInput, "domain box must be positive");
  require(std::isfinite(t.barron_C) && t.barron_C >= 0, ErrorKind::InvalidInput, "class constant must be >= 0");
  const double slack = 1e-12;
  for (const auto& row : t.atoms) {
    require(static_cast<Eigen::Index>(row.size()) == t.terms(), ErrorKind::InvalidInput, "ragged function table");
    for (const auto& at : row) {
      require(at.a.size() == t.dim, ErrorKind::InvalidInput, "atom direction has the wrong dimension");
      require(std::isfinite(at.gamma) && at.a.allFinite() && std::isfinite(at.b) && std::isfinite(at.tau) &&
                  at.tau > 0,
              ErrorKind::InvalidInput, "atom parameters must be finite with tau > 0");
      require(std::abs(at.gamma) <= 2 * t.barron_C * (1 + slack), ErrorKind::InvalidInput,
              "atom weight exceeds 2C");
      require(t.box * at.a.lpNorm<1>() <= 1 + slack, ErrorKind::InvalidInput, "atom direction exceeds the box norm");
      require(std::abs(at.b) <= 1 + slack, ErrorKind::InvalidInput, "atom offset exceeds 1");
    }
  }
}

double eval_reference(const FunctionTable& table, Eigen::Index j, const Vector& x) {
  require(j >= 0 && j < table.n_funcs(), ErrorKind::InvalidIndicator, "function index out of range");
  require(x.size() == table.dim, ErrorKind::ShapeError, "point has the wrong dimension");
  double sum = 0;
  for (const auto& at : table.atoms[j]) sum += at(x);
  return sum;
}

// ---------------------------------------------------------------- block

SigmoidLayout SigmoidLayout::make(Eigen::Index dim, Eigen::Index n_funcs, Eigen::Index band) {
  require(dim >= 1 && n_funcs >= 1, ErrorKind::InvalidInput, "dimension and function count must be positive");
  if (band == 0) band = std::max(dim, n_funcs);
  require(n_funcs <= band, ErrorKind::LayoutError, "indicator longer than the column band");
  SigmoidLayout l;
  l.dim = dim;
  l.n_funcs = n_funcs;
  l.band = band;
  l.data_rows = std::max(n_funcs, dim + 1);
  l.enc_width = encoding_width(3 * band, 2);
  return l;
}

SigmoidLayout SigmoidLayout::make(const FunctionTable& table, Eigen::Index band) {
  return make(table.dim, table.n_funcs(), band);
}

FunctionBlock build_sigmoid_block(const FunctionTable& table, const SigmoidLayout& l, const SigmoidConfig& cfg) {
  validate_table(table);
  require(l.dim == table.dim && l.n_funcs == table.n_funcs(), ErrorKind::LayoutError,
          "layout does not match the table");
  require(cfg.epsilon > 0, ErrorKind::InvalidInput, "epsilon must be positive");
  const Eigen::Index n = l.cols(), b = l.enc_width, xd = l.dim + 1;
  const double big = std::max(1.0, table.box) + 1.0;

  // 1: move [x; 1] into the second band at the selector column
  LayerBuilder l1(l.rows());
  for (Eigen::Index r = 0; r < xd; ++r) {
    l1.gated({{r, 1.0}}, {{l.selector(), 1.0}}, big, l.moved() + r, 1.0);
    l1.gated({{r, 1.0}}, {{l.selector(), 1.0}}, big, r, -1.0);
  }

  // 2: uniform attention sums the data band, which now holds only e
  LayerBuilder l2(l.rows());
  {
    AttentionHead& h = l2.head();
    for (Eigen::Index k = 0; k < l.n_funcs; ++k) h.w_v(l.spread() + k, k) = static_cast<double>(n);
  }
  for (Eigen::Index k = 0; k < l.n_funcs; ++k) l2.gated({{l.spread() + k, 1.0}}, {{l.selector(), 1.0}}, 2.0, l.gated() + k, 1.0);

  // 3: head i scores P b + [x;1]^T a_ji at the x column and P b at the output column
  const Matrix c = table.coefficients();
  double csum = 0;
  for (Eigen::Index j = 0; j < c.rows(); ++j) csum = std::max(csum, c.row(j).cwiseAbs().sum());
  // off-target mass R costs at most R / 4 per unit coefficient
  const double P = std::max(1.0, 0.5 * std::log(std::max(csum, 1.0) * static_cast<double>(n) / (4.0 * cfg.epsilon)));
  LayerBuilder l3(l.rows(), 1.0);
  for (Eigen::Index i = 0; i < table.terms(); ++i) {
    const Matrix M = table.folded(i);
    AttentionHead& h = l3.head(b + xd);
    for (Eigen::Index e = 0; e < b; ++e) {
      h.w_k(e, l.pointer() + e) = P;
      h.w_k(e, l.own() + e) = P;
      h.w_q(e, l.own() + e) = 1.0;
    }
    for (Eigen::Index r = 0; r < xd; ++r) {
      h.w_k(b + r, l.moved() + r) = 1.0;
      for (Eigen::Index k = 0; k < l.n_funcs; ++k) h.w_q(b + r, l.spread() + k) = M(r, k);
    }
    for (Eigen::Index k = 0; k < l.n_funcs; ++k) h.w_v(0, l.gated() + k) = c(k, i);
  }

  FunctionBlock block;
  block.name = "sigmoid";
  block.layers = {l1.build(), l2.build(), l3.build()};
  block.layout = {l.rows(), n, 0};
  block.mask.cells = BoolMatrix::Constant(l.rows(), n, false);
  block.mask.cells(0, l.out_col()) = true;
  block.mask.cells.middleRows(l.moved(), xd).setConstant(true);
  block.mask.cells.middleRows(l.pointer(), 2 * b + 1).setConstant(true);
  const double zmax = table.max_score();
  const double leak = csum * static_cast<double>(n - 2) * std::exp(-2.0 * P) / 4.0;
  const double round = 64.0 * kEps * std::max(csum, 1.0) * (1.0 + zmax) * static_cast<double>(l.n_funcs + xd) * big;
  block.budget = leak + round;
  validate_block(block);
  return block;
}

FunctionBlock build_sigmoid_block(const FunctionTable& table, const SigmoidConfig& cfg) {
  return build_sigmoid_block(table, SigmoidLayout::make(table), cfg);
}

FunctionBlock build_sigmoid_block_single_head(const FunctionTable&, const SigmoidLayout&) {
  throw Error(ErrorKind::Unsupported, "single-head sigmoid block is not implemented");
}

Matrix sigmoid_input(const SigmoidLayout& l, const Vector& e, const Vector& x) {
  require(e.size() == l.n_funcs, ErrorKind::InvalidIndicator, "indicator has the wrong length");
  Eigen::Index ones = 0;
  for (Eigen::Index k = 0; k < e.size(); ++k) {
    require(e(k) == 0.0 || e(k) == 1.0, ErrorKind::InvalidIndicator, "indicator entries must be 0 or 1");
    ones += e(k) == 1.0;
  }
  require(ones == 1, ErrorKind::InvalidIndicator, "indicator must be one-hot");
  require(x.size() == l.dim, ErrorKind::ShapeError, "point has the wrong dimension");

  const Eigen::Index n = l.cols();
  Matrix X = Matrix::Zero(l.rows(), n);
  X.block(0, 0, l.n_funcs, 1) = e;
  X.block(0, l.x_col(), l.dim, 1) = x;
  X(l.dim, l.x_col()) = 1.0;
  const Matrix enc = encoding_matrix(n, 2);
  require(enc.rows() == l.enc_width, ErrorKind::LayoutError, "encoding width mismatch");
  X.block(l.pointer(), l.x_col(), l.enc_width, 1) = enc.col(l.out_col());
  X.middleRows(l.own(), l.enc_width) = enc;
  X.block(l.own(), l.x_col(), l.enc_width, 1).setZero();
  X(l.selector(), l.x_col()) = 1.0;
  return X;
}

Matrix sigmoid_input(const SigmoidLayout& l, Eigen::Index j, const Vector& x) {
  require(j >= 0 && j < l.n_funcs, ErrorKind::InvalidIndicator, "function index out of range");
  return sigmoid_input(l, Vector::Unit(l.n_funcs, j), x);
}

double sigmoid_output(const SigmoidLayout& l, const Matrix& out) { return out(0, l.out_col()); }

// ---------------------------------------------------------------- fitting

namespace {

struct Fit {
  Vector c;
  Matrix a;  // dim x m
  Vector b;
};

class Fitter {
 public:
  Fitter(const Matrix& X, const Vector& y, double tau, double radius)
      : X_(X), y_(y), tau_(tau), radius_(radius) {}

  Matrix features(const Fit& f) const {
    Matrix phi(X_.cols(), f.c.size());
    for (Eigen::Index i = 0; i < f.c.size(); ++i)
      for (Eigen::Index s = 0; s < X_.cols(); ++s) phi(s, i) = sigmoid(tau_ * (X_.col(s).dot(f.a.col(i)) + f.b(i)));
    return phi;
  }

  Vector residual(const Fit& f) const { return y_ - features(f) * f.c; }
  double max_error(const Fit& f) const { return f.c.size() ? residual(f).cwiseAbs().maxCoeff() : y_.cwiseAbs().maxCoeff(); }

  void refit_coefficients(Fit& f) const {
    const Matrix phi = features(f);
    f.c = phi.completeOrthogonalDecomposition().solve(y_);
  }

  void project(Fit& f) const {
    for (Eigen::Index i = 0; i < f.c.size(); ++i) f.a.col(i) = project_l1(f.a.col(i), radius_);
    f.b = f.b.cwiseMax(-1.0).cwiseMin(1.0);
  }

  // projected Levenberg-Marquardt; returns the iterate with the smallest max error seen
  Fit run(Fit f, int iterations) const {
    const Eigen::Index m = f.c.size(), dim = X_.rows(), S = X_.cols(), p = m * (dim + 2);
    Fit best = f;
    double best_max = max_error(f);
    refit_coefficients(f);
    double sse = residual(f).squaredNorm();
    double mu = 1e-3;
    for (int it = 0; it < iterations && sse > 1e-30 && mu < 1e12; ++it) {
      const double cur_max = max_error(f);
      if (cur_max < best_max) best_max = cur_max, best = f;
      Matrix J(S, p);
      for (Eigen::Index s = 0; s < S; ++s)
        for (Eigen::Index i = 0; i < m; ++i) {
          const double sg = sigmoid(tau_ * (X_.col(s).dot(f.a.col(i)) + f.b(i)));
          const double d = f.c(i) * sg * (1 - sg) * tau_;
          const Eigen::Index o = i * (dim + 2);
          J(s, o) = sg;
          J.block(s, o + 1, 1, dim) = d * X_.col(s).transpose();
          J(s, o + 1 + dim) = d;
        }
      const Vector r = residual(f);
      const Matrix JtJ = J.transpose() * J;
      const Vector g = J.transpose() * r;
      bool accepted = false;
      while (!accepted && mu < 1e12) {
        Matrix A = JtJ;
        A.diagonal() += mu * (JtJ.diagonal().array() + 1e-12).matrix();
        const Vector delta = A.ldlt().solve(g);
        Fit cand = f;
        for (Eigen::Index i = 0; i < m; ++i) {
          const Eigen::Index o = i * (dim + 2);
          cand.c(i) += delta(o);
          cand.a.col(i) += delta.segment(o + 1, dim);
          cand.b(i) += delta(o + 1 + dim);
        }
        project(cand);
        refit_coefficients(cand);
        const double cand_sse = residual(cand).squaredNorm();
        if (std::isfinite(cand_sse) && cand_sse < sse) {
          f = cand;
          sse = cand_sse;
          mu = std::max(mu / 3.0, 1e-12);
          accepted = true;
        } else {
          mu *= 4.0;
        }
      }
    }
    if (max_error(f) < best_max) best = f;
    return best;
  }

  Fit random_atoms(Eigen::Index m, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Fit f{Vector::Zero(m), Matrix::Zero(X_.rows(), m), Vector::Zero(m)};
    for (Eigen::Index i = 0; i < m; ++i) {
      Vector a = Vector::NullaryExpr(X_.rows(), [&] { return u(rng); });
      if (a.lpNorm<1>() > 0) a *= radius_ * std::abs(u(rng)) / a.lpNorm<1>();
      f.a.col(i) = a;
      f.b(i) = u(rng);
    }
    return f;
  }

 private:
  const Matrix& X_;
  const Vector& y_;
  double tau_;
  double radius_;
};

double tau_for(Eigen::Index m, double floor) {
  const double md = static_cast<double>(m);
  return std::max(floor, std::sqrt(md) * std::log(md));
}

FitResult to_result(const Fit& f, double tau, double box, double err) {
  FitResult out;
  out.tau = tau;
  out.achieved_error = err;
  out.table.dim = f.a.rows();
  out.table.box = box;
  out.table.atoms.resize(1);
  double cmax = 0;
  for (Eigen::Index i = 0; i < f.c.size(); ++i) {
    out.table.atoms[0].push_back({f.c(i), f.a.col(i), f.b(i), tau});
    cmax = std::max(cmax, std::abs(f.c(i)));
  }
  out.table.barron_C = cmax / 2.0;
  return out;
}

void check_samples(const Matrix& X, const Vector& y, const FitOptions& opts) {
  require(X.cols() >= 1 && X.rows() >= 1 && X.cols() == y.size(), ErrorKind::ShapeError,
          "need one target per sample column");
  require(X.allFinite() && y.allFinite(), ErrorKind::InvalidInput, "samples must be finite");
  require(opts.tau_floor > 0 && opts.iterations >= 0 && opts.restarts >= 1, ErrorKind::InvalidInput,
          "bad fit options");
}

double box_of(const Matrix& X) {
  const double b = X.cwiseAbs().maxCoeff();
  return b > 0 ? b : 1.0;
}

}  // namespace

std::vector<FitResult> fit_sigmoid_sequence(const Matrix& X, const Vector& y0, const std::vector<Eigen::Index>& ms,
                                            const FitOptions& opts) {
  check_samples(X, y0, opts);
  for (Eigen::Index m : ms) require(m >= 1, ErrorKind::InvalidInput, "need at least one term");
  const Vector y = (y0.array() - opts.offset).matrix();
  const double box = box_of(X), radius = 1.0 / box;
  std::mt19937_64 rng(opts.seed);
  std::vector<FitResult> results;
  Fit prev;
  double prev_tau = 0;
  for (Eigen::Index m : ms) {
    const double tau = tau_for(m, opts.tau_floor);
    Fitter fitter(X, y, tau, radius);
    Fit best;
    double best_err = INFINITY;
    if (results.empty()) {
      for (int r = 0; r < opts.restarts; ++r) {
        Fit f = fitter.run(fitter.random_atoms(m, rng), opts.iterations);
        const double err = fitter.max_error(f);
        if (err < best_err) best_err = err, best = f;
      }
    } else {
      // same function at the new tau, fresh atoms start with zero weight
      Fit start = fitter.random_atoms(m, rng);
      const Eigen::Index keep = std::min(m, prev.c.size());
      const double s = prev_tau / tau;
      start.c.head(keep) = prev.c.head(keep);
      start.a.leftCols(keep) = s * prev.a.leftCols(keep);
      start.b.head(keep) = s * prev.b.head(keep);
      fitter.project(start);
      best = fitter.run(start, opts.iterations);
      best_err = fitter.max_error(best);
    }
    results.push_back(to_result(best, tau, box, best_err));
    prev = best;
    prev_tau = tau;
  }
  return results;
}

FitResult fit_sigmoid_combination(const Matrix& X, const Vector& y, Eigen::Index m, const FitOptions& opts) {
  require(m >= 1, ErrorKind::InvalidInput, "need at least one term");
  return fit_sigmoid_sequence(X, y, {m}, opts).front();
}

}  // namespace weightsmith
