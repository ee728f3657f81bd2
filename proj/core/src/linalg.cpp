#include "drmatch/linalg.hpp"

#include <cmath>

namespace drmatch {

double OlsFit::classical_variance(Index j) const {
  const double dof = static_cast<double>(n - k);
  if (dof <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return rss / dof * xtx_inverse(j, j);
}

double OlsFit::robust_variance(const Matrix& design, Index j) const {
  // (X'X)^-1 X' diag(e^2) X (X'X)^-1, scaled by n / (n - k).
  const Vector row = xtx_inverse.row(j);
  const Vector a = design * row;
  double meat = (a.array().square() * residuals.array().square()).sum();
  const double dof = static_cast<double>(n - k);
  if (dof <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return meat * static_cast<double>(n) / dof;
}

std::optional<OlsFit> ols(const Matrix& design, const Vector& y) {
  const Index n = design.rows();
  const Index k = design.cols();
  if (n < k || k == 0) return std::nullopt;

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) return std::nullopt;

  OlsFit fit;
  fit.coefficients = qr.solve(y);
  fit.residuals = y - design * fit.coefficients;
  fit.rss = fit.residuals.squaredNorm();
  fit.n = n;
  fit.k = k;

  const Matrix xtx = design.transpose() * design;
  Eigen::LDLT<Matrix> ldlt(xtx);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  fit.xtx_inverse = ldlt.solve(Matrix::Identity(k, k));
  if (!fit.xtx_inverse.allFinite()) return std::nullopt;
  return fit;
}

std::optional<LogisticFit> logistic_regression(const Matrix& design, const Treatment& w,
                                               int max_iterations, double tolerance) {
  const Index n = design.rows();
  const Index k = design.cols();
  if (n <= k) return std::nullopt;

  const Vector target = w.cast<double>();
  Vector beta = Vector::Zero(k);
  Vector eta = Vector::Zero(n);

  for (int iter = 1; iter <= max_iterations; ++iter) {
    Vector p(n), weight(n);
    for (Index i = 0; i < n; ++i) {
      p[i] = inverse_logit(eta[i]);
      weight[i] = p[i] * (1.0 - p[i]);
    }
    const Vector score = design.transpose() * (target - p);
    const Matrix info = design.transpose() * weight.asDiagonal() * design;
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-13) return std::nullopt;
    const Vector step = ldlt.solve(score);
    if (!step.allFinite()) return std::nullopt;
    beta += step;
    eta = design * beta;
    // Linear predictors this large mean the data are (quasi-)separated.
    if (eta.cwiseAbs().maxCoeff() > 30.0) return std::nullopt;
    if (step.cwiseAbs().maxCoeff() < tolerance) {
      return LogisticFit{beta, iter};
    }
  }
  return std::nullopt;
}

Matrix design_with_intercept(const Matrix& x, std::span<const Index> support,
                             std::span<const Vector> leading_columns) {
  const Index n = x.rows();
  const Index lead = static_cast<Index>(leading_columns.size());
  Matrix d(n, 1 + lead + static_cast<Index>(support.size()));
  d.col(0).setOnes();
  for (Index c = 0; c < lead; ++c) d.col(1 + c) = leading_columns[c];
  for (std::size_t s = 0; s < support.size(); ++s) {
    d.col(1 + lead + static_cast<Index>(s)) = x.col(support[s]);
  }
  return d;
}

}  // namespace drmatch
