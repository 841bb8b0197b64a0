#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "weightsmith/encodings.hpp"
#include "weightsmith/primitives.hpp"

namespace weightsmith {

// ---------------------------------------------------------------- filtering

struct FilterConfig {
  // temperature of the two pointer layers
  double lambda = 20.0;
  // bit filter constant, also the gate used to pin N to the first token
  double C = 1e6;
  // s: the sigmoid in the product layer is evaluated at s * ell
  double product_scale = 1e-3;
  // declared error on the data bands
  double delta = 1e-4;
  IndicatorShape indicator = IndicatorShape::Plateau;
};

/// Worst-case distance of the recovered ell (and ell + 1) from an integer.
double filter_drift_bound(Eigen::Index L, Eigen::Index n_max, const FilterConfig& cfg);

/// Seven layers on the prompt layout of assemble_cot_input:
///   1  N from the ln row: sum t^2 / sum t = (2N + 1) / 3, then 3/2 x - 1/2
///   2  ell / N from the indicator row; N and ell / N pinned to the first token
///   3  sigmoid(s N (ell / N)) between the first two tokens, read back as ell
///   4  ell broadcast to every token, ell + 1 by bias
///   5  cycle rows minus ell and ell + 1
///   6  indicator of zero on both cycle rows
///   7  bit filter: band 1 keeps cycle == ell, band 2 gets band 1 where cycle == ell + 1
/// Throws InvalidConstant when the drift bound breaks the indicator.
FunctionBlock build_filtering_transformer(Eigen::Index L, Eigen::Index d, Eigen::Index n_max,
                                          const FilterConfig& cfg = {});

enum class FilterMode { Transformer, Ideal };

/// 2D x N filtered bands of the prompt at step ell.
Matrix filter_prompt(const CotPrompt& prompt, Eigen::Index ell, FilterMode mode, const FilterConfig& cfg = {});

// ---------------------------------------------------------------- tasks

/// s^l = phi(W_l s^{l-1}), phi leaky ReLU.
struct MlpTask {
  std::vector<Matrix> weights;
  LeakyAlpha alpha{1.0};

  Eigen::Index depth() const { return static_cast<Eigen::Index>(weights.size()); }
  /// d_0 .. d_L
  std::vector<Eigen::Index> dims() const;
  /// s^0 = x, s^1, .., s^L
  std::vector<Vector> forward(const Vector& x) const;
};

/// Throws ShapeError unless the layer dimensions chain.
void validate_task(const MlpTask& task);

/// Gaussian layers rescaled to spectral norm 1.
MlpTask random_mlp_task(const std::vector<Eigen::Index>& dims, LeakyAlpha alpha, std::mt19937_64& rng);
/// dims [d, k, .., k, 1] with L layers.
std::vector<Eigen::Index> mlp_dims(Eigen::Index L, Eigen::Index d, Eigen::Index k);
/// L orthogonal d x d layers, alpha = 1.
MlpTask orthogonal_task(Eigen::Index L, Eigen::Index d, std::mt19937_64& rng);

struct CotInstance {
  // test holds only x_test
  CotPrompt prompt;
  // x_test, s^1, .., s^L
  std::vector<Vector> truth;
};

/// n demonstration chains and a test input, all with x ~ N(0, I).
CotInstance generate_instance(const MlpTask& task, Eigen::Index n, std::mt19937_64& rng);

// ---------------------------------------------------------------- regression oracle

struct ConditionProfile {
  // kappa of T_l = [s_1^l .. s_n^l]^T for l = 0 .. L-1; +inf when fat or rank deficient
  std::vector<double> kappa;
  double kappa_max = 1.0;

  bool finite() const { return std::isfinite(kappa_max); }
};

double condition_number(const Matrix& T);
ConditionProfile condition_profile(const CotPrompt& prompt);
ConditionProfile condition_profile(const MlpTask& task, const CotPrompt& prompt);

struct GdConfig {
  // 0 picks 1 / (2 sigma_max^2)
  double eta = 0.0;
  Eigen::Index iterations = 1;
};

/// T steps of w <- w + 2 eta X^T (y - X w) from w = 0.
Vector gd_linear_regression(const Matrix& X, const Vector& y, const GdConfig& cfg);

/// ceil(c0 kappa^2 ln(1 / epsilon)).
Eigen::Index iterations_for(double epsilon, double kappa, double c0 = 2.0);

// ---------------------------------------------------------------- CoT loop

struct CotConfig {
  double epsilon = 1e-3;
  FilterMode filter = FilterMode::Transformer;
  FilterConfig filter_cfg;
  double eta = 0.0;
  // 0 picks iterations_for(epsilon / L, kappa_max)
  Eigen::Index iterations = 0;
  double slack = 0.5;
};

/// Features (n x d_{l-1}) and pre-activation targets (n x d_l) read off the filtered bands.
struct LayerPairs {
  Matrix features;
  Matrix targets;
};

LayerPairs layer_pairs(const Matrix& filtered, const CotPrompt& prompt, Eigen::Index ell, LeakyAlpha alpha);

struct StepResult {
  Vector prediction;
  Matrix weights;
  double kappa = 1.0;
  Eigen::Index iterations = 0;
};

/// Filter, invert the activation on the targets, regress each output neuron by GD
/// and apply the recovered layer to the last test token. prompt.test must hold ell tokens.
StepResult cot_step(const MlpTask& task, const CotPrompt& prompt, Eigen::Index ell, const CotConfig& cfg);

struct TraceEntry {
  Eigen::Index ell = 0;
  // |s_hat^l - s^l|
  double step_error = 0.0;
  // |s_hat^l - phi(W_l s_hat^{l-1})|
  double local_error = 0.0;
  double cumulative_error = 0.0;
  // l epsilon / L (1 + slack)
  double bound = 0.0;
  bool pass = false;
};

struct CotResult {
  Vector prediction;
  std::vector<TraceEntry> trace;
  double final_error = 0.0;
  bool pass = false;
};

/// Runs cot_step for l = 1..L, appending each prediction to the test chain.
CotResult run_cot(const MlpTask& task, const CotInstance& instance, const CotConfig& cfg);

/// ell,step_error,cumulative_bound,pass
void write_trace_csv(std::ostream& os, const std::vector<TraceEntry>& trace);

}  // namespace weightsmith
