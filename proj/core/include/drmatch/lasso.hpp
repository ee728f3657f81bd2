#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drmatch/types.hpp"

namespace drmatch {

/// Solver knobs for coordinate descent.
struct LassoControl {
  // Stop when the largest absolute standardized-coefficient change in a
  // sweep falls below this.
  double tolerance = 1e-7;
  // Coordinate updates allowed per lambda before giving up.
  long max_updates = 100000;
  // Outer quadratic-approximation refreshes for the binomial family.
  int max_outer = 25;
  // Every n-th cycle sweeps the whole working set, not just the active set.
  int full_sweep_every = 10;
  // Working probabilities are clamped to [clamp, 1 - clamp] in the weights.
  double probability_clamp = 1e-5;
};

/// One lasso solution. Coefficients are on the original covariate scale.
struct PenalizedFit {
  Family family = Family::gaussian;
  double intercept = 0.0;
  Vector coefficients;
  double lambda = 0.0;
  int n_nonzero = 0;
  bool converged = true;
  int n_iterations = 0;
  std::string diagnostic;

  std::vector<Index> support() const;
};

/// sign(z) * max(|z| - gamma, 0).
inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

/// Minimizes (1/2N)||y - b0 - Xb||^2 + lambda * sum_j pf_j |b_j| (gaussian) or
/// -(1/N) loglik + lambda * sum_j pf_j |b_j| (binomial) with an unpenalized
/// intercept and covariates standardized internally.
///
/// An empty `penalty_factors` means all ones. Throws DataError for a binomial
/// response with a single class. Non-convergence is reported through
/// `converged` and `diagnostic`, not an exception.
PenalizedFit fit_lasso(const DesignMatrix& x, const Vector& response, Family family, double lambda,
                       std::span<const double> penalty_factors = {},
                       const Vector* warm_start = nullptr, const LassoControl& control = {});

/// Smallest lambda whose solution has every penalized coefficient at zero.
double lambda_max(const DesignMatrix& x, const Vector& response, Family family,
                  std::span<const double> penalty_factors = {});

/// Geometric grid from lambda_max down to lambda_max * lambda_min_ratio.
std::vector<double> lambda_path(const DesignMatrix& x, const Vector& response, Family family,
                                int n_lambda, double lambda_min_ratio,
                                std::span<const double> penalty_factors = {});

/// Default lambda_min_ratio: 1e-4 when N > P, otherwise 0.01.
double default_lambda_min_ratio(Index n, Index p);

/// Fits a whole decreasing lambda sequence with warm starts.
///
/// With `early_stop`, the path ends once the fraction of deviance explained
/// stops moving (relative change < 1e-5) or exceeds 0.999, after at least
/// five lambdas; `fits` may then be shorter than `lambdas`.
struct PathResult {
  std::vector<PenalizedFit> fits;
  double null_deviance = 0.0;
  std::vector<double> deviance;
};
PathResult fit_path(const DesignMatrix& x, const Vector& response, Family family,
                    std::span<const double> lambdas, std::span<const double> penalty_factors = {},
                    bool early_stop = true, const LassoControl& control = {});

enum class LambdaRule { min, one_se };

struct CvConfig {
  int n_folds = 10;
  int n_lambda = 100;
  std::optional<double> lambda_min_ratio;  // default_lambda_min_ratio when unset
  LambdaRule rule = LambdaRule::min;
  LassoControl control;
};

struct CvResult {
  std::vector<double> lambda_grid;
  std::vector<double> mean_cv_error;
  std::vector<double> cv_error_se;
  double lambda_min = 0.0;
  double lambda_1se = 0.0;
  double selected_lambda = 0.0;
  int n_folds = 0;
  std::uint64_t fold_seed = 0;
  bool stratified = false;
  // Full-data fit at `selected_lambda`.
  PenalizedFit fit;
};

/// Deterministic k-fold assignment (fold id per row). Stratifies by class
/// when `stratify_by` is given.
std::vector<int> assign_folds(Index n, int n_folds, std::uint64_t seed,
                              const Vector* stratify_by = nullptr);

/// K-fold cross-validation over the lambda path. Loss is squared error for
/// gaussian and binomial deviance for binomial.
CvResult cross_validate(const DesignMatrix& x, const Vector& response, Family family,
                        const CvConfig& config, std::uint64_t seed,
                        std::span<const double> penalty_factors = {});

enum class Scale { linear, response };

/// Response-scale binomial predictions bound the linear predictor to
/// [-36, 36] so probabilities stay strictly inside (0, 1).
Vector predict(const PenalizedFit& fit, const Matrix& x, Scale scale);
Vector predict(const PenalizedFit& fit, const DesignMatrix& x, Scale scale);

}  // namespace drmatch
