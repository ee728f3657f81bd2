#pragma once

#include <cmath>
#include <optional>

#include "drmatch/types.hpp"

namespace drmatch {

struct OlsFit {
  Vector coefficients;
  Vector residuals;
  Matrix xtx_inverse;
  double rss = 0.0;
  Index n = 0;
  Index k = 0;

  /// Classical variance of coefficient j using the residual mean square.
  double classical_variance(Index j) const;
  /// HC1 heteroskedasticity-robust variance of coefficient j.
  double robust_variance(const Matrix& design, Index j) const;
};

/// Least squares; nullopt when the design is rank deficient.
std::optional<OlsFit> ols(const Matrix& design, const Vector& y);

struct LogisticFit {
  Vector coefficients;
  int iterations = 0;
};

/// Unpenalized logistic regression by Newton-Raphson. Returns nullopt for a
/// singular information matrix or when the iterations diverge (separation).
std::optional<LogisticFit> logistic_regression(const Matrix& design, const Treatment& w,
                                               int max_iterations = 50, double tolerance = 1e-10);

/// Design matrix [1, extra columns..., X[:, support]].
Matrix design_with_intercept(const Matrix& x, std::span<const Index> support,
                             std::span<const Vector> leading_columns = {});

inline double inverse_logit(double eta) {
  if (eta >= 0.0) {
    const double e = std::exp(-eta);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace drmatch
