#include "drmatch/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drmatch/linalg.hpp"
#include "lasso_solver.hpp"

namespace drmatch {

std::vector<Index> PenalizedFit::support() const {
  std::vector<Index> out;
  for (Index j = 0; j < coefficients.size(); ++j) {
    if (coefficients[j] != 0.0) out.push_back(j);
  }
  return out;
}

namespace detail {

namespace {

constexpr Index kCovarianceModeMaxP = 500;
// Active-set cycles between Newton steps on the sign-fixed problem.
constexpr int kStepEvery = 5;

double softplus(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

}  // namespace

CoordinateSolver::CoordinateSolver(const DesignMatrix& x, const Vector& response, Family family,
                                   std::span<const double> penalty_factors,
                                   const LassoControl& control)
    : x_(x),
      xs_(x.standardized()),
      y_(response),
      family_(family),
      control_(control),
      n_(x.rows()),
      p_(x.cols()),
      inv_n_(1.0 / static_cast<double>(x.rows())) {
  if (y_.size() != n_) {
    throw DataError("response length " + std::to_string(y_.size()) +
                    " does not match design rows " + std::to_string(n_));
  }
  if (!y_.allFinite()) throw DataError("response contains non-finite values");
  if (family_ == Family::binomial) {
    for (Index i = 0; i < n_; ++i) {
      if (y_[i] != 0.0 && y_[i] != 1.0) throw DataError("binomial response must be 0/1");
    }
    const double total = y_.sum();
    if (total == 0.0 || total == static_cast<double>(n_)) {
      throw DataError("degenerate response: binomial response has a single class");
    }
  }

  pf_.assign(static_cast<std::size_t>(p_), 1.0);
  if (!penalty_factors.empty()) {
    if (static_cast<Index>(penalty_factors.size()) != p_) {
      throw ConfigError("penalty_factors length does not match covariate count");
    }
    for (Index j = 0; j < p_; ++j) {
      const double f = penalty_factors[static_cast<std::size_t>(j)];
      if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError("penalty factors must be finite and >= 0");
      pf_[static_cast<std::size_t>(j)] = f;
    }
  }

  beta_ = Vector::Zero(p_);
  grad_ = Vector::Zero(p_);
  in_ws_.assign(static_cast<std::size_t>(p_), 0);
  xv_stamp_.assign(static_cast<std::size_t>(p_), 0);
  xv_ = Vector::Zero(p_);

  const double ybar = y_.mean();
  if (family_ == Family::gaussian) {
    intercept_ = ybar;
    residual_ = y_.array() - ybar;
    null_deviance_ = residual_.squaredNorm();
    covariance_mode_ = p_ < kCovarianceModeMaxP;
    if (covariance_mode_) {
      xty_.noalias() = xs_.transpose() * residual_;
      xty_ *= inv_n_;
      yy_ = null_deviance_ * inv_n_;
      gram_.resize(p_, p_);
      gram_ready_.assign(static_cast<std::size_t>(p_), 0);
      grad_ = xty_;
    }
  } else {
    intercept_ = logit(ybar);
    eta_ = Vector::Constant(n_, intercept_);
    null_deviance_ = 0.0;
    for (Index i = 0; i < n_; ++i) null_deviance_ += 2.0 * (softplus(eta_[i]) - y_[i] * eta_[i]);
  }

  for (Index j = 0; j < p_; ++j) {
    if (!x_.is_constant(j) && pf_[static_cast<std::size_t>(j)] == 0.0) add_to_working_set(j);
  }
  if (!ws_list_.empty()) {
    // Unpenalized covariates: the penalty is zero for them so lambda is irrelevant.
    run_inner(0.0);
  }
  compute_gradient();
  lambda_max_ = 0.0;
  for (Index j = 0; j < p_; ++j) {
    const double f = pf_[static_cast<std::size_t>(j)];
    if (x_.is_constant(j) || f == 0.0) continue;
    lambda_max_ = std::max(lambda_max_, std::abs(grad_[j]) / f);
  }
  at_null_ = true;
}

void CoordinateSolver::add_to_working_set(Index j) {
  if (in_ws_[static_cast<std::size_t>(j)]) return;
  in_ws_[static_cast<std::size_t>(j)] = 1;
  ws_list_.push_back(j);
  if (covariance_mode_) ensure_gram_column(j);
}

void CoordinateSolver::ensure_gram_column(Index j) {
  if (gram_ready_[static_cast<std::size_t>(j)]) return;
  gram_.col(j).noalias() = xs_.transpose() * xs_.col(j);
  gram_.col(j) *= inv_n_;
  gram_ready_[static_cast<std::size_t>(j)] = 1;
}

void CoordinateSolver::warm_start(const Vector& coefficients) {
  if (coefficients.size() != p_) throw ConfigError("warm start has wrong length");
  for (Index j = 0; j < p_; ++j) {
    beta_[j] = x_.is_constant(j) ? 0.0 : coefficients[j] * x_.column_sds()[j];
    if (beta_[j] != 0.0) add_to_working_set(j);
  }
  // The intercept stays at its null value on the centered scale.
  if (covariance_mode_) {
    grad_ = xty_;
    for (Index j : ws_list_) {
      if (beta_[j] != 0.0) grad_.noalias() -= beta_[j] * gram_.col(j);
    }
    at_null_ = false;
    return;
  }
  if (family_ == Family::gaussian) {
    residual_ = y_.array() - intercept_;
    residual_.noalias() -= xs_ * beta_;
  } else {
    eta_ = Vector::Constant(n_, intercept_);
    eta_.noalias() += xs_ * beta_;
  }
  compute_gradient();
  at_null_ = false;
}

void CoordinateSolver::compute_gradient() {
  if (covariance_mode_) return;
  if (family_ == Family::gaussian) {
    grad_.noalias() = xs_.transpose() * residual_;
  } else {
    Vector score(n_);
    for (Index i = 0; i < n_; ++i) score[i] = y_[i] - inverse_logit(eta_[i]);
    grad_.noalias() = xs_.transpose() * score;
  }
  grad_ *= inv_n_;
}

void CoordinateSolver::refresh_eta() {
  eta_.setConstant(intercept_);
  for (Index j : ws_list_) {
    if (beta_[j] != 0.0) eta_.noalias() += beta_[j] * xs_.col(j);
  }
}

bool CoordinateSolver::run_inner(double lambda) {
  return family_ == Family::gaussian ? gaussian_descent(lambda) : binomial_descent(lambda);
}

void CoordinateSolver::rebuild_active(std::vector<Index>& active) const {
  active.clear();
  for (Index j : ws_list_) {
    if (beta_[j] != 0.0 || pf_[static_cast<std::size_t>(j)] == 0.0) active.push_back(j);
  }
}

bool CoordinateSolver::active_set_step(const std::vector<Index>& active, double lambda) {
  const Index m = static_cast<Index>(active.size());
  Vector target(m);
  Matrix g(m, m);
  for (Index a = 0; a < m; ++a) {
    const Index j = active[static_cast<std::size_t>(a)];
    const double f = pf_[static_cast<std::size_t>(j)];
    if (beta_[j] == 0.0 && f != 0.0) return false;
    const double sign = beta_[j] > 0.0 ? 1.0 : (beta_[j] < 0.0 ? -1.0 : 0.0);
    const double smooth = covariance_mode_ ? grad_[j] : xs_.col(j).dot(residual_) * inv_n_;
    target[a] = smooth - lambda * f * sign;
    if (covariance_mode_) {
      for (Index b = 0; b < m; ++b) g(b, a) = gram_(active[static_cast<std::size_t>(b)], j);
    }
  }
  if (!covariance_mode_) {
    Matrix xa(n_, m);
    for (Index a = 0; a < m; ++a) xa.col(a) = xs_.col(active[static_cast<std::size_t>(a)]);
    g.noalias() = xa.transpose() * xa;
    g *= inv_n_;
  }

  // Newton direction for the quadratic with the current signs held fixed.
  Matrix ridged = g;
  ridged.diagonal().array() += 1e-10 * std::max(1.0, g.diagonal().maxCoeff());
  Eigen::LDLT<Matrix> ldlt(ridged);
  if (ldlt.info() != Eigen::Success) return false;
  const Vector d = ldlt.solve(target);
  const double slope = target.dot(d);
  if (!d.allFinite() || !(slope > 0.0)) return false;
  const double curvature = d.dot(g * d);
  double t = curvature > 0.0 ? slope / curvature : std::numeric_limits<double>::infinity();

  // Stop where the first penalized coefficient reaches zero.
  Index crossing = -1;
  for (Index a = 0; a < m; ++a) {
    const Index j = active[static_cast<std::size_t>(a)];
    if (pf_[static_cast<std::size_t>(j)] == 0.0 || beta_[j] * d[a] >= 0.0) continue;
    const double reach = -beta_[j] / d[a];
    if (reach < t) {
      t = reach;
      crossing = a;
    }
  }
  if (!std::isfinite(t) || !(t > 0.0)) return false;

  for (Index a = 0; a < m; ++a) {
    const Index j = active[static_cast<std::size_t>(a)];
    const double delta = a == crossing ? -beta_[j] : t * d[a];
    if (delta == 0.0) continue;
    beta_[j] += delta;
    if (a == crossing) beta_[j] = 0.0;
    if (covariance_mode_) {
      grad_.noalias() -= delta * gram_.col(j);
    } else {
      residual_.noalias() -= delta * xs_.col(j);
    }
  }
  return true;
}

bool CoordinateSolver::weighted_active_set_step(const std::vector<Index>& active, double lambda) {
  // Unknowns: the intercept followed by the active coefficients.
  const Index m = static_cast<Index>(active.size());
  Matrix xa(n_, m + 1);
  xa.col(0).setOnes();
  Vector target(m + 1);
  target[0] = work_.sum() * inv_n_;
  for (Index a = 0; a < m; ++a) {
    const Index j = active[static_cast<std::size_t>(a)];
    const double f = pf_[static_cast<std::size_t>(j)];
    if (beta_[j] == 0.0 && f != 0.0) return false;
    const double sign = beta_[j] > 0.0 ? 1.0 : (beta_[j] < 0.0 ? -1.0 : 0.0);
    xa.col(a + 1) = xs_.col(j);
    target[a + 1] = xs_.col(j).dot(work_) * inv_n_ - lambda * f * sign;
  }
  Matrix g = xa.transpose() * weights_.asDiagonal() * xa;
  g *= inv_n_;

  Matrix ridged = g;
  ridged.diagonal().array() += 1e-10 * std::max(1.0, g.diagonal().maxCoeff());
  Eigen::LDLT<Matrix> ldlt(ridged);
  if (ldlt.info() != Eigen::Success) return false;
  const Vector d = ldlt.solve(target);
  const double slope = target.dot(d);
  if (!d.allFinite() || !(slope > 0.0)) return false;
  const double curvature = d.dot(g * d);
  double t = curvature > 0.0 ? slope / curvature : std::numeric_limits<double>::infinity();
  Index crossing = -1;
  for (Index a = 0; a < m; ++a) {
    const Index j = active[static_cast<std::size_t>(a)];
    if (pf_[static_cast<std::size_t>(j)] == 0.0 || beta_[j] * d[a + 1] >= 0.0) continue;
    const double reach = -beta_[j] / d[a + 1];
    if (reach < t) {
      t = reach;
      crossing = a;
    }
  }
  if (!std::isfinite(t) || !(t > 0.0)) return false;

  Vector delta = t * d;
  for (Index a = 0; a < m; ++a) {
    const Index j = active[static_cast<std::size_t>(a)];
    if (a == crossing) delta[a + 1] = -beta_[j];
    beta_[j] += delta[a + 1];
    if (a == crossing) beta_[j] = 0.0;
  }
  intercept_ += delta[0];
  work_.array() -= weights_.array() * (xa * delta).array();
  return true;
}

bool CoordinateSolver::gaussian_descent(double lambda) {
  std::vector<Index> active;
  rebuild_active(active);
  // Every few active-set cycles, jump along the Newton direction of the
  // sign-fixed problem; slow linear convergence on ill-conditioned supports
  // otherwise exhausts the update budget.
  int since_step = 0;
  int cycle = 0;
  while (true) {
    const bool full = cycle % control_.full_sweep_every == 0;
    const std::vector<Index>& list = full ? ws_list_ : active;
    double max_change = 0.0;
    for (Index j : list) {
      const double g = covariance_mode_ ? grad_[j] : xs_.col(j).dot(residual_) * inv_n_;
      const double b = soft_threshold(g + beta_[j], lambda * pf_[static_cast<std::size_t>(j)]);
      const double delta = b - beta_[j];
      if (delta != 0.0) {
        if (covariance_mode_) {
          grad_.noalias() -= delta * gram_.col(j);
        } else {
          residual_.noalias() -= delta * xs_.col(j);
        }
        beta_[j] = b;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    updates_ += static_cast<long>(list.size());
    ++cycles_;
    if (full) rebuild_active(active);
    if (max_change < control_.tolerance) {
      if (full) return true;
      cycle = 0;
      continue;
    }
    if (!full && !active.empty() && ++since_step == kStepEvery) {
      active_set_step(active, lambda);
      since_step = 0;
    }
    ++cycle;
    if (updates_ > control_.max_updates) {
      diagnostic_ = "coordinate update budget exhausted";
      return false;
    }
  }
}

double CoordinateSolver::weighted_sq_norm(Index j) {
  if (xv_stamp_[static_cast<std::size_t>(j)] != stamp_) {
    xv_[j] = (weights_.array() * xs_.col(j).array().square()).sum() * inv_n_;
    xv_stamp_[static_cast<std::size_t>(j)] = stamp_;
  }
  return xv_[j];
}

bool CoordinateSolver::binomial_descent(double lambda) {
  const double lo = control_.probability_clamp;
  const double hi = 1.0 - control_.probability_clamp;
  weights_.resize(n_);
  work_.resize(n_);
  Vector start(p_);

  // Early quadratic approximations are solved loosely; the tolerance tightens
  // with the outer change and the last pass always uses the full tolerance.
  double inner_tol = std::max(control_.tolerance, 1e-3);
  for (int outer = 0; outer < control_.max_outer; ++outer) {
    for (Index i = 0; i < n_; ++i) {
      const double p = inverse_logit(eta_[i]);
      const double pc = std::clamp(p, lo, hi);
      weights_[i] = pc * (1.0 - pc);
      // weights * (working response - eta)
      work_[i] = y_[i] - p;
    }
    const double weight_sum = weights_.sum();
    ++stamp_;
    start = beta_;
    const double start_intercept = intercept_;

    std::vector<Index> active;
    rebuild_active(active);
    int cycle = 0;
    int since_step = 0;
    bool inner_done = false;
    while (!inner_done) {
      const bool full = cycle % control_.full_sweep_every == 0;
      const std::vector<Index>& list = full ? ws_list_ : active;
      double max_change = 0.0;
      for (Index j : list) {
        const double xv = weighted_sq_norm(j);
        if (xv <= 0.0) continue;
        const double g = xs_.col(j).dot(work_) * inv_n_;
        const double b =
            soft_threshold(g + xv * beta_[j], lambda * pf_[static_cast<std::size_t>(j)]) / xv;
        const double delta = b - beta_[j];
        if (delta != 0.0) {
          work_.array() -= delta * weights_.array() * xs_.col(j).array();
          beta_[j] = b;
          max_change = std::max(max_change, std::abs(delta));
        }
      }
      const double d0 = work_.sum() / weight_sum;
      if (d0 != 0.0) {
        intercept_ += d0;
        work_ -= d0 * weights_;
        max_change = std::max(max_change, std::abs(d0));
      }
      updates_ += static_cast<long>(list.size());
      ++cycles_;
      if (full) rebuild_active(active);
      if (max_change < inner_tol) {
        if (full) {
          inner_done = true;
          continue;
        }
        cycle = 0;
        continue;
      }
      if (!full && ++since_step == kStepEvery) {
        weighted_active_set_step(active, lambda);
        since_step = 0;
      }
      ++cycle;
      if (updates_ > control_.max_updates) {
        diagnostic_ = "coordinate update budget exhausted";
        refresh_eta();
        return false;
      }
    }

    refresh_eta();
    double outer_change = std::abs(intercept_ - start_intercept);
    for (Index j : ws_list_) outer_change = std::max(outer_change, std::abs(beta_[j] - start[j]));
    if (outer_change < control_.tolerance && inner_tol <= control_.tolerance) return true;
    inner_tol = std::max(control_.tolerance, 0.01 * outer_change);
  }
  diagnostic_ = "quadratic approximation did not converge in " +
                std::to_string(control_.max_outer) + " outer iterations";
  return false;
}

bool CoordinateSolver::solve(double lambda, double lambda_previous) {
  updates_ = 0;
  diagnostic_.clear();

  // The null solution is optimal for every lambda at or above lambda_max.
  if (at_null_ && lambda >= lambda_max_ * (1.0 - 1e-12)) {
    converged_ = true;
    return true;
  }
  at_null_ = false;

  // Working set: nonzero and unpenalized coefficients plus the sequential
  // strong-rule candidates from the previous solution's gradient.
  for (Index j : ws_list_) in_ws_[static_cast<std::size_t>(j)] = 0;
  ws_list_.clear();
  const double strong = 2.0 * lambda - std::max(lambda_previous, lambda);
  for (Index j = 0; j < p_; ++j) {
    if (x_.is_constant(j)) continue;
    const double f = pf_[static_cast<std::size_t>(j)];
    if (beta_[j] != 0.0 || f == 0.0 || std::abs(grad_[j]) >= f * strong) add_to_working_set(j);
  }

  while (true) {
    if (!run_inner(lambda)) {
      compute_gradient();
      converged_ = false;
      return false;
    }
    compute_gradient();
    bool violated = false;
    for (Index j = 0; j < p_; ++j) {
      if (in_ws_[static_cast<std::size_t>(j)] || x_.is_constant(j)) continue;
      if (std::abs(grad_[j]) > lambda * pf_[static_cast<std::size_t>(j)]) {
        add_to_working_set(j);
        violated = true;
      }
    }
    if (!violated) {
      converged_ = true;
      return true;
    }
  }
}

double CoordinateSolver::deviance() const {
  if (covariance_mode_) {
    // rss / N = y'y/N - 2 b'c + b'Gb with Gb = c - grad.
    const double scaled = yy_ - beta_.dot(xty_) - beta_.dot(grad_);
    return std::max(0.0, scaled) / inv_n_;
  }
  if (family_ == Family::gaussian) return residual_.squaredNorm();
  double dev = 0.0;
  for (Index i = 0; i < n_; ++i) dev += 2.0 * (softplus(eta_[i]) - y_[i] * eta_[i]);
  return dev;
}

PenalizedFit CoordinateSolver::snapshot(double lambda) const {
  PenalizedFit fit;
  fit.family = family_;
  fit.lambda = lambda;
  fit.coefficients = Vector::Zero(p_);
  for (Index j = 0; j < p_; ++j) {
    if (beta_[j] != 0.0) {
      fit.coefficients[j] = beta_[j] / x_.column_sds()[j];
      ++fit.n_nonzero;
    }
  }
  fit.intercept = intercept_ - fit.coefficients.dot(x_.column_means());
  fit.converged = converged_;
  fit.n_iterations = cycles_;
  fit.diagnostic = diagnostic_;
  return fit;
}

}  // namespace detail

namespace {

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || std::isnan(lambda)) throw ConfigError("lambda must be >= 0");
}

}  // namespace

PenalizedFit fit_lasso(const DesignMatrix& x, const Vector& response, Family family, double lambda,
                       std::span<const double> penalty_factors, const Vector* warm_start,
                       const LassoControl& control) {
  check_lambda(lambda);
  detail::CoordinateSolver solver(x, response, family, penalty_factors, control);
  double previous = solver.lambda_max();
  if (warm_start != nullptr) {
    solver.warm_start(*warm_start);
    previous = lambda;
  }
  solver.solve(lambda, previous);
  return solver.snapshot(lambda);
}

double lambda_max(const DesignMatrix& x, const Vector& response, Family family,
                  std::span<const double> penalty_factors) {
  detail::CoordinateSolver solver(x, response, family, penalty_factors, LassoControl{});
  return solver.lambda_max();
}

double default_lambda_min_ratio(Index n, Index p) { return n > p ? 1e-4 : 0.01; }

std::vector<double> lambda_path(const DesignMatrix& x, const Vector& response, Family family,
                                int n_lambda, double lambda_min_ratio,
                                std::span<const double> penalty_factors) {
  if (n_lambda < 2) throw ConfigError("n_lambda must be >= 2");
  if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)) {
    throw ConfigError("lambda_min_ratio must lie in (0, 1)");
  }
  if (family == Family::gaussian) {
    const double mean = response.mean();
    if ((response.array() - mean).abs().maxCoeff() <= 1e-12 * std::max(1.0, std::abs(mean))) {
      throw DataError("zero-variance response: lambda path undefined");
    }
  }
  const double top = lambda_max(x, response, family, penalty_factors);
  if (!(top > 0.0)) throw DataError("no penalized covariate has any association; lambda_max is 0");

  std::vector<double> grid(static_cast<std::size_t>(n_lambda));
  const double log_ratio = std::log(lambda_min_ratio);
  for (int k = 0; k < n_lambda; ++k) {
    grid[static_cast<std::size_t>(k)] =
        top * std::exp(log_ratio * static_cast<double>(k) / static_cast<double>(n_lambda - 1));
  }
  grid.front() = top;
  grid.back() = top * lambda_min_ratio;
  return grid;
}

PathResult fit_path(const DesignMatrix& x, const Vector& response, Family family,
                    std::span<const double> lambdas, std::span<const double> penalty_factors,
                    bool early_stop, const LassoControl& control) {
  detail::CoordinateSolver solver(x, response, family, penalty_factors, control);
  PathResult out;
  out.null_deviance = solver.null_deviance();
  double previous = solver.lambda_max();
  double previous_ratio = 0.0;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    const double lambda = lambdas[k];
    check_lambda(lambda);
    solver.solve(lambda, previous);
    previous = lambda;
    out.fits.push_back(solver.snapshot(lambda));
    const double dev = solver.deviance();
    out.deviance.push_back(dev);
    if (!early_stop || out.null_deviance <= 0.0) continue;
    const double ratio = 1.0 - dev / out.null_deviance;
    if (k + 1 >= 5 && (ratio - previous_ratio < 1e-5 * ratio || ratio > 0.999)) break;
    previous_ratio = ratio;
  }
  return out;
}

Vector predict(const PenalizedFit& fit, const Matrix& x, Scale scale) {
  if (x.cols() != fit.coefficients.size()) {
    throw DataError("prediction matrix has " + std::to_string(x.cols()) +
                    " columns; fit expects " + std::to_string(fit.coefficients.size()));
  }
  Vector eta = Vector::Constant(x.rows(), fit.intercept);
  for (Index j = 0; j < fit.coefficients.size(); ++j) {
    if (fit.coefficients[j] != 0.0) eta.noalias() += fit.coefficients[j] * x.col(j);
  }
  if (scale == Scale::response && fit.family == Family::binomial) {
    // Beyond |eta| = 36 the probability rounds to exactly 0 or 1.
    for (Index i = 0; i < eta.size(); ++i) eta[i] = inverse_logit(std::clamp(eta[i], -36.0, 36.0));
  }
  return eta;
}

Vector predict(const PenalizedFit& fit, const DesignMatrix& x, Scale scale) {
  return predict(fit, x.values(), scale);
}

}  // namespace drmatch
