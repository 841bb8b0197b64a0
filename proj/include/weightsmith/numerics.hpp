#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <string>

#include "weightsmith/errors.hpp"

namespace weightsmith {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {
inline std::atomic<double>& magnitude_bound_storage() {
  static std::atomic<double> bound{1e6};
  return bound;
}
}  // namespace detail

/// Largest entry magnitude accepted by validate(). Process-wide, default 1e6.
inline double magnitude_bound() { return detail::magnitude_bound_storage().load(); }

inline void set_magnitude_bound(double c_max) {
  require(std::isfinite(c_max) && c_max > 0, ErrorKind::InvalidInput, "magnitude bound must be positive");
  detail::magnitude_bound_storage().store(c_max);
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Throws InvalidInput unless every entry is finite and within magnitude_bound().
template <typename Derived>
void validate(const Eigen::MatrixBase<Derived>& m, const std::string& what = "matrix") {
  require(m.allFinite(), ErrorKind::InvalidInput, what + " has non-finite entries");
  if (m.size() > 0) {
    const double peak = static_cast<double>(m.cwiseAbs().maxCoeff());
    require(peak <= magnitude_bound(), ErrorKind::InvalidInput,
            what + " exceeds the magnitude bound (" + std::to_string(peak) + ")");
  }
}

/// Softmax inverse temperature.
class Temperature {
 public:
  explicit Temperature(double lambda) : lambda_(lambda) {
    require(std::isfinite(lambda) && lambda > 0, ErrorKind::InvalidInput, "temperature must be positive and finite");
  }
  double value() const noexcept { return lambda_; }

 private:
  double lambda_;
};

/// Leaky-ReLU slope, 0 < alpha <= 1.
class LeakyAlpha {
 public:
  explicit LeakyAlpha(double alpha) : alpha_(alpha) {
    require(std::isfinite(alpha) && alpha > 0 && alpha <= 1, ErrorKind::InvalidAlpha,
            "leaky-ReLU slope must lie in (0, 1], got " + std::to_string(alpha));
  }
  double value() const noexcept { return alpha_; }

 private:
  double alpha_;
};

/// Column-wise softmax of lambda * scores. Each column of the result is a
/// probability vector. The per-column max is subtracted before exponentiation.
template <typename Derived>
typename Derived::PlainObject temp_softmax(const Eigen::MatrixBase<Derived>& scores, Temperature t) {
  require(scores.allFinite(), ErrorKind::InvalidInput, "softmax scores must be finite");
  using Scalar = typename Derived::Scalar;
  typename Derived::PlainObject out(scores.rows(), scores.cols());
  const Scalar lambda = static_cast<Scalar>(t.value());
  for (Eigen::Index j = 0; j < scores.cols(); ++j) {
    const Scalar peak = scores.col(j).maxCoeff();
    out.col(j) = ((scores.col(j).array() - peak) * lambda).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

template <typename Derived>
typename Derived::PlainObject relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

template <typename Derived>
typename Derived::PlainObject leaky_relu(const Eigen::MatrixBase<Derived>& x, LeakyAlpha a) {
  // max(alpha x, x) since alpha <= 1
  return x.cwiseMax(x * static_cast<typename Derived::Scalar>(a.value()));
}

/// y >= 0 -> y, y < 0 -> y / alpha.
template <typename Derived>
typename Derived::PlainObject leaky_relu_inverse(const Eigen::MatrixBase<Derived>& y, LeakyAlpha a) {
  return y.cwiseMin(y / static_cast<typename Derived::Scalar>(a.value()));
}

/// Row-major construction helper: entries are validated.
inline Matrix make_matrix(Eigen::Index rows, Eigen::Index cols, std::initializer_list<double> values) {
  require(rows > 0 && cols > 0, ErrorKind::ShapeError, "matrix dimensions must be positive");
  require(static_cast<Eigen::Index>(values.size()) == rows * cols, ErrorKind::ShapeError,
          "entry count does not match rows x cols");
  Matrix m(rows, cols);
  auto it = values.begin();
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = *it++;
  validate(m);
  return m;
}

}  // namespace weightsmith
