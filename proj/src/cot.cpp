#include "weightsmith/cot.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "layer_builder.hpp"

namespace weightsmith {

using detail::LayerBuilder;

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_filter_config(const FilterConfig& cfg) {
  require(std::isfinite(cfg.lambda) && cfg.lambda >= 1.0, ErrorKind::InvalidConstant, "lambda must be >= 1");
  require(std::isfinite(cfg.C) && cfg.C > 0, ErrorKind::InvalidConstant, "filter constant must be positive");
  require(cfg.product_scale > 0 && cfg.product_scale <= 0.1, ErrorKind::InvalidConstant,
          "product scale must lie in (0, 0.1]");
  require(cfg.delta > 0, ErrorKind::InvalidConstant, "delta must be positive");
}

}  // namespace

// ---------------------------------------------------------------- filtering

double filter_drift_bound(Eigen::Index L, Eigen::Index n_max, const FilterConfig& cfg) {
  check_filter_config(cfg);
  const double s = cfg.product_scale, P = cfg.lambda, Ld = static_cast<double>(L), n = static_cast<double>(n_max);
  // cubic term of sigmoid(z) - 1/2 - z/4 at z = s ell
  const double taylor = s * s * Ld * Ld * Ld / 12.0;
  // product layer: keys other than the first two sit 4 below
  const double product_leak = (4.0 / s) * n * std::exp(-4.0 * P + s * Ld);
  // broadcast layer: other keys carry |ell row| <= L + 2 / s + 1
  const double bcast_leak = n * std::exp(-2.0 * P) * (Ld + 2.0 / s + 1.0);
  return taylor + product_leak + bcast_leak + 64.0 * kEps * (cfg.C + n) / s;
}

FunctionBlock build_filtering_transformer(Eigen::Index L, Eigen::Index d, Eigen::Index n_max,
                                          const FilterConfig& cfg) {
  require(L >= 1 && d >= 1 && n_max >= 2, ErrorKind::InvalidInput, "need L >= 1, d >= 1, n_max >= 2");
  check_filter_config(cfg);
  require(cfg.C >= static_cast<double>(n_max), ErrorKind::InvalidConstant, "filter constant must be >= n_max");
  const double drift = filter_drift_bound(L, n_max, cfg);
  if (cfg.indicator == IndicatorShape::Plateau)
    require(drift < 0.25, ErrorKind::InvalidConstant,
            "recovered step drifts by up to " + std::to_string(drift) + ", the indicator needs < 1/4");
  else
    require(cfg.C * drift <= cfg.delta, ErrorKind::InvalidConstant,
            "hat indicator leaks C * drift = " + std::to_string(cfg.C * drift) + " > delta");

  const PromptLayout p = PromptLayout::make(d, n_max);
  const Eigen::Index rows = p.rows(), b = p.enc_width;
  const double s = cfg.product_scale, P = cfg.lambda, C = cfg.C;
  const Vector r1 = binary_encoding(0, b), r2 = binary_encoding(1, b);

  // 1: sum_t t * t / sum_t t, then N = 3/2 x - 1/2; flag the first token
  LayerBuilder l1(rows, 1.0);
  {
    AttentionHead& h = l1.head();
    h.w_k(0, p.ln()) = 1.0;
    h.w_q(0, p.ones()) = 1.0;
    h.w_v(p.n_row(), p.enumeration()) = 1.0;
  }
  l1.emit(p.n_row(), l1.unit({{p.n_row(), 1.0}}), 0.5);
  l1.bias(p.n_row(), -0.5);
  {
    detail::Terms t;
    for (Eigen::Index i = 0; i < b; ++i) t.push_back({p.own() + i, r1(i)});
    l1.emit(p.first_row(), l1.unit(t, 1.0 - static_cast<double>(b)), 1.0);
  }

  // 2: ell / N everywhere; N and ell / N kept on the first token only
  LayerBuilder l2(rows, 1.0);
  l2.head().w_v(p.frac_row(), p.indicator()) = 1.0;
  l2.emit(p.kf_row(), l2.unit({{p.n_row(), 1.0}, {p.first_row(), C}}, -C), 1.0);
  l2.emit(p.qf_row(), l2.unit({{p.frac_row(), 1.0}, {p.first_row(), 1.0}}, -1.0), 1.0);

  // 3: the first two tokens tie up to s N (ell / N) on the first query
  LayerBuilder l3(rows, P);
  {
    AttentionHead& h = l3.head(b + 1);
    for (Eigen::Index i = 0; i < b; ++i) {
      h.w_k(i, p.own() + i) = 1.0;
      h.w_q(i, p.ones()) = r1(i) + r2(i);
    }
    h.w_k(b, p.kf_row()) = 1.0;
    h.w_q(b, p.qf_row()) = s / P;
    h.w_v(p.prod_row(), p.first_row()) = 1.0;
  }
  l3.emit(p.ell_row(), l3.unit({{p.prod_row(), 1.0}}), 4.0 / s);
  l3.bias(p.ell_row(), -2.0 / s);

  // 4: every token reads ell from the first token
  LayerBuilder l4(rows, P);
  {
    AttentionHead& h = l4.head(b);
    for (Eigen::Index i = 0; i < b; ++i) {
      h.w_k(i, p.own() + i) = 1.0;
      h.w_q(i, p.ones()) = r1(i);
    }
    h.w_v(p.ell_bcast_row(), p.ell_row()) = 1.0;
  }
  l4.emit(p.ell1_row(), l4.unit({{p.ell_bcast_row(), 1.0}}), 1.0);
  l4.bias(p.ell1_row(), 1.0);

  // 5: cycle - ell, cycle - (ell + 1)
  LayerBuilder l5(rows, 1.0);
  l5.emit(p.cycle1(), l5.unit({{p.ell_bcast_row(), 1.0}}), -1.0);
  l5.emit(p.cycle2(), l5.unit({{p.ell1_row(), 1.0}}), -1.0);

  FunctionBlock block;
  block.name = "filtering";
  block.layers = {l1.build(), l2.build(), l3.build(), l4.build(), l5.build()};
  // 6, 7
  const FunctionBlock bits = build_bit_creation_layer(rows, {p.cycle1(), p.cycle2()}, cfg.indicator);
  const double tol = cfg.indicator == IndicatorShape::Plateau ? 0.0 : drift;
  const FunctionBlock filter =
      build_bit_filter_layer({rows, p.band1(), d, p.band2()}, {{p.cycle1(), tol}, {p.cycle2(), tol}}, C);
  block.layers.push_back(bits.layers.front());
  block.layers.push_back(filter.layers.front());
  block.layout = {rows, 0, n_max};
  block.mask.cells = BoolMatrix::Constant(rows, 1, false);
  block.mask.cells.topRows(2 * d).setConstant(true);
  block.budget = cfg.delta;
  validate_block(block);
  return block;
}

Matrix filter_prompt(const CotPrompt& prompt, Eigen::Index ell, FilterMode mode, const FilterConfig& cfg) {
  if (mode == FilterMode::Ideal) return ideal_filtered(prompt, ell);
  const PromptLayout layout = layout_for(prompt, ell);
  const FunctionBlock block = build_filtering_transformer(prompt.depth(), layout.d_data, layout.n_max, cfg);
  return project_bands(block_forward(block, assemble_cot_input(prompt, ell, layout)), layout);
}

// ---------------------------------------------------------------- tasks

std::vector<Eigen::Index> MlpTask::dims() const {
  std::vector<Eigen::Index> d;
  if (weights.empty()) return d;
  d.push_back(weights.front().cols());
  for (const auto& w : weights) d.push_back(w.rows());
  return d;
}

std::vector<Vector> MlpTask::forward(const Vector& x) const {
  std::vector<Vector> s{x};
  for (const auto& w : weights) s.push_back(leaky_relu(Matrix(w * s.back()), alpha));
  return s;
}

void validate_task(const MlpTask& task) {
  require(!task.weights.empty(), ErrorKind::ShapeError, "task has no layers");
  for (std::size_t l = 0; l < task.weights.size(); ++l) {
    validate(task.weights[l], "layer weight");
    if (l > 0)
      require(task.weights[l].cols() == task.weights[l - 1].rows(), ErrorKind::ShapeError,
              "layer dimensions do not chain");
  }
}

std::vector<Eigen::Index> mlp_dims(Eigen::Index L, Eigen::Index d, Eigen::Index k) {
  require(L >= 1 && d >= 1 && k >= 1, ErrorKind::InvalidInput, "dimensions must be positive");
  std::vector<Eigen::Index> dims{d};
  for (Eigen::Index l = 1; l < L; ++l) dims.push_back(k);
  dims.push_back(1);
  return dims;
}

MlpTask random_mlp_task(const std::vector<Eigen::Index>& dims, LeakyAlpha alpha, std::mt19937_64& rng) {
  require(dims.size() >= 2, ErrorKind::InvalidInput, "need at least one layer");
  std::normal_distribution<double> g(0.0, 1.0);
  MlpTask task;
  task.alpha = alpha;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    require(dims[l] >= 1 && dims[l - 1] >= 1, ErrorKind::InvalidInput, "dimensions must be positive");
    Matrix w = Matrix::NullaryExpr(dims[l], dims[l - 1], [&] { return g(rng); });
    w /= Eigen::JacobiSVD<Matrix>(w).singularValues()(0);
    task.weights.push_back(std::move(w));
  }
  return task;
}

MlpTask orthogonal_task(Eigen::Index L, Eigen::Index d, std::mt19937_64& rng) {
  require(L >= 1 && d >= 1, ErrorKind::InvalidInput, "dimensions must be positive");
  std::normal_distribution<double> g(0.0, 1.0);
  MlpTask task;
  for (Eigen::Index l = 0; l < L; ++l) {
    const Matrix a = Matrix::NullaryExpr(d, d, [&] { return g(rng); });
    task.weights.push_back(Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(d, d));
  }
  return task;
}

CotInstance generate_instance(const MlpTask& task, Eigen::Index n, std::mt19937_64& rng) {
  validate_task(task);
  require(n >= 1, ErrorKind::InvalidInput, "need at least one demonstration");
  std::normal_distribution<double> g(0.0, 1.0);
  const Eigen::Index d0 = task.dims().front();
  CotInstance inst;
  for (Eigen::Index i = 0; i < n; ++i) inst.prompt.chains.push_back(task.forward(Vector::NullaryExpr(d0, [&] { return g(rng); })));
  inst.truth = task.forward(Vector::NullaryExpr(d0, [&] { return g(rng); }));
  inst.prompt.test = {inst.truth.front()};
  return inst;
}

// ---------------------------------------------------------------- regression oracle

double condition_number(const Matrix& T) {
  if (T.rows() < T.cols() || T.size() == 0) return INFINITY;
  const Vector sv = Eigen::JacobiSVD<Matrix>(T).singularValues();
  const double hi = sv(0), lo = sv(sv.size() - 1);
  if (!(hi > 0) || lo < 1e-12 * hi) return INFINITY;
  return hi / lo;
}

ConditionProfile condition_profile(const CotPrompt& prompt) {
  require(prompt.samples() >= 1, ErrorKind::InvalidInput, "need at least one demonstration");
  ConditionProfile prof;
  prof.kappa_max = 1.0;
  for (Eigen::Index l = 0; l < prompt.depth(); ++l) {
    Matrix T(prompt.samples(), prompt.chains[0][l].size());
    for (Eigen::Index i = 0; i < prompt.samples(); ++i) T.row(i) = prompt.chains[i][l].transpose();
    prof.kappa.push_back(condition_number(T));
    prof.kappa_max = std::max(prof.kappa_max, prof.kappa.back());
  }
  return prof;
}

ConditionProfile condition_profile(const MlpTask&, const CotPrompt& prompt) { return condition_profile(prompt); }

Vector gd_linear_regression(const Matrix& X, const Vector& y, const GdConfig& cfg) {
  require(X.rows() == y.size(), ErrorKind::ShapeError, "one target per row of X");
  require(X.allFinite() && y.allFinite(), ErrorKind::InvalidInput, "regression data must be finite");
  require(cfg.iterations >= 1, ErrorKind::InvalidStep, "need at least one iteration");
  Vector w = Vector::Zero(X.cols());
  const double smax = X.size() ? Eigen::JacobiSVD<Matrix>(X).singularValues()(0) : 0.0;
  if (smax == 0.0) return w;
  const double eta = cfg.eta == 0.0 ? 1.0 / (2.0 * smax * smax) : cfg.eta;
  require(std::isfinite(eta) && eta > 0 && eta <= 1.0 / (smax * smax) * (1 + 1e-12), ErrorKind::InvalidStep,
          "step size must lie in (0, 1 / sigma_max^2]");
  for (Eigen::Index t = 0; t < cfg.iterations; ++t) w += 2.0 * eta * (X.transpose() * (y - X * w));
  return w;
}

Eigen::Index iterations_for(double epsilon, double kappa, double c0) {
  require(std::isfinite(epsilon) && epsilon > 0 && epsilon < 1, ErrorKind::InvalidInput, "epsilon must lie in (0, 1)");
  if (!std::isfinite(kappa)) throw Error(ErrorKind::UnboundedIterations, "condition number is infinite");
  require(kappa >= 1 && c0 > 0, ErrorKind::InvalidInput, "kappa must be >= 1");
  return static_cast<Eigen::Index>(std::ceil(c0 * kappa * kappa * std::log(1.0 / epsilon)));
}

// ---------------------------------------------------------------- CoT loop

LayerPairs layer_pairs(const Matrix& filtered, const CotPrompt& prompt, Eigen::Index ell, LeakyAlpha alpha) {
  check_prompt(prompt, ell);
  const Eigen::Index D = filtered.rows() / 2, L = prompt.depth(), n = prompt.samples();
  const Eigen::Index din = prompt.chains[0][ell - 1].size(), dout = prompt.chains[0][ell].size();
  require(filtered.rows() == 2 * D && din <= D && dout <= D && filtered.cols() == prompt_tokens(prompt, ell),
          ErrorKind::ShapeError, "filtered bands do not match the prompt");
  LayerPairs out{Matrix(n, din), Matrix(n, dout)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index t = i * (L + 1) + ell - 1;
    out.features.row(i) = filtered.block(0, t, din, 1).transpose();
    out.targets.row(i) = filtered.block(D, t + 1, dout, 1).transpose();
  }
  out.targets = leaky_relu_inverse(out.targets, alpha);
  return out;
}

StepResult cot_step(const MlpTask& task, const CotPrompt& prompt, Eigen::Index ell, const CotConfig& cfg) {
  check_prompt(prompt, ell);
  require(cfg.epsilon > 0 && cfg.epsilon < 1, ErrorKind::InvalidInput, "epsilon must lie in (0, 1)");
  const Matrix filtered = filter_prompt(prompt, ell, cfg.filter, cfg.filter_cfg);
  const LayerPairs pairs = layer_pairs(filtered, prompt, ell, task.alpha);

  StepResult r;
  r.kappa = condition_number(pairs.features);
  if (!std::isfinite(r.kappa))
    throw Error(ErrorKind::UnderdeterminedLayer, "layer " + std::to_string(ell) + " features have infinite condition number (n = " +
                                                     std::to_string(pairs.features.rows()) + ", d = " +
                                                     std::to_string(pairs.features.cols()) + ")");
  const double kmax = std::max(r.kappa, condition_profile(prompt).kappa_max);
  r.iterations = cfg.iterations > 0
                     ? cfg.iterations
                     : iterations_for(cfg.epsilon / static_cast<double>(prompt.depth()), std::isfinite(kmax) ? kmax : r.kappa);
  r.weights = Matrix(pairs.targets.cols(), pairs.features.cols());
  for (Eigen::Index j = 0; j < pairs.targets.cols(); ++j)
    r.weights.row(j) = gd_linear_regression(pairs.features, pairs.targets.col(j), {cfg.eta, r.iterations}).transpose();

  const Eigen::Index D = filtered.rows() / 2;
  const Vector last = filtered.block(0, filtered.cols() - 1, pairs.features.cols(), 1);
  require(D >= last.size(), ErrorKind::ShapeError, "band too narrow");
  r.prediction = leaky_relu(Matrix(r.weights * last), task.alpha);
  return r;
}

CotResult run_cot(const MlpTask& task, const CotInstance& inst, const CotConfig& cfg) {
  validate_task(task);
  const Eigen::Index L = task.depth();
  require(inst.prompt.depth() == L && static_cast<Eigen::Index>(inst.truth.size()) == L + 1, ErrorKind::PromptStateError,
          "instance depth does not match the task");
  CotPrompt prompt = inst.prompt;
  prompt.test = {inst.truth.front()};
  CotResult res;
  res.pass = true;
  double cumulative = 0;
  for (Eigen::Index ell = 1; ell <= L; ++ell) {
    const StepResult step = cot_step(task, prompt, ell, cfg);
    TraceEntry e;
    e.ell = ell;
    e.step_error = (step.prediction - inst.truth[ell]).norm();
    const Vector exact = leaky_relu(Matrix(task.weights[ell - 1] * prompt.test.back()), task.alpha);
    e.local_error = (step.prediction - exact).norm();
    cumulative += e.local_error;
    e.cumulative_error = cumulative;
    e.bound = static_cast<double>(ell) * cfg.epsilon / static_cast<double>(L) * (1.0 + cfg.slack);
    e.pass = e.step_error <= e.bound;
    res.pass = res.pass && e.pass;
    res.trace.push_back(e);
    prompt.test.push_back(step.prediction);
    res.prediction = step.prediction;
  }
  res.final_error = res.trace.back().step_error;
  res.pass = res.pass && res.final_error <= cfg.epsilon;
  return res;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceEntry>& trace) {
  os << "ell,step_error,cumulative_bound,pass\n";
  char buf[128];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%d\n", static_cast<long>(e.ell), e.step_error, e.bound,
                  e.pass ? 1 : 0);
    os << buf;
  }
}

}  // namespace weightsmith
