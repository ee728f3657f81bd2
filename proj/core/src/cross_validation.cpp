#include <algorithm>
#include <cmath>

#include "drmatch/lasso.hpp"
#include "drmatch/rng.hpp"

namespace drmatch {

namespace {

constexpr double kProbabilityFloor = 1e-5;

double held_out_loss(Family family, const Vector& truth, const Vector& prediction) {
  double total = 0.0;
  if (family == Family::gaussian) {
    total = (truth - prediction).squaredNorm();
  } else {
    for (Index i = 0; i < truth.size(); ++i) {
      const double p = std::clamp(prediction[i], kProbabilityFloor, 1.0 - kProbabilityFloor);
      total += -2.0 * (truth[i] * std::log(p) + (1.0 - truth[i]) * std::log(1.0 - p));
    }
  }
  return total / static_cast<double>(truth.size());
}

bool fold_has_single_class(const std::vector<int>& folds, int n_folds, const Vector& y) {
  for (int k = 0; k < n_folds; ++k) {
    double in_sum = 0.0, in_count = 0.0, out_sum = 0.0, out_count = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
      if (folds[static_cast<std::size_t>(i)] == k) {
        in_sum += y[i];
        in_count += 1.0;
      } else {
        out_sum += y[i];
        out_count += 1.0;
      }
    }
    if (in_sum == 0.0 || in_sum == in_count) return true;
    if (out_sum == 0.0 || out_sum == out_count) return true;
  }
  return false;
}

}  // namespace

std::vector<int> assign_folds(Index n, int n_folds, std::uint64_t seed, const Vector* stratify_by) {
  if (n_folds < 2 || n_folds > n) {
    throw ConfigError("n_folds must lie in [2, N]; got " + std::to_string(n_folds) + " for N=" +
                      std::to_string(n));
  }
  Rng rng(seed);
  std::vector<int> folds(static_cast<std::size_t>(n), 0);
  if (stratify_by == nullptr) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    shuffle_indices(order, rng);
    for (Index i = 0; i < n; ++i) {
      folds[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
          static_cast<int>(i % n_folds);
    }
    return folds;
  }
  // Deal each class round-robin, continuing the fold counter across classes.
  Index counter = 0;
  for (double level : {0.0, 1.0}) {
    std::vector<Index> members;
    for (Index i = 0; i < n; ++i) {
      if ((*stratify_by)[i] == level) members.push_back(i);
    }
    shuffle_indices(members, rng);
    for (Index i : members) folds[static_cast<std::size_t>(i)] = static_cast<int>(counter++ % n_folds);
  }
  return folds;
}

CvResult cross_validate(const DesignMatrix& x, const Vector& response, Family family,
                        const CvConfig& config, std::uint64_t seed,
                        std::span<const double> penalty_factors) {
  const Index n = x.rows();
  if (config.n_folds < 2 || config.n_folds > n) {
    throw ConfigError("n_folds must lie in [2, N]");
  }
  const double ratio = config.lambda_min_ratio.value_or(default_lambda_min_ratio(n, x.cols()));
  std::vector<double> grid =
      lambda_path(x, response, family, config.n_lambda, ratio, penalty_factors);

  PathResult full = fit_path(x, response, family, grid, penalty_factors, true, config.control);
  grid.resize(full.fits.size());
  const std::size_t n_lambda = grid.size();

  CvResult result;
  result.n_folds = config.n_folds;
  result.fold_seed = seed;
  std::vector<int> folds = assign_folds(n, config.n_folds, seed);
  if (family == Family::binomial && fold_has_single_class(folds, config.n_folds, response)) {
    folds = assign_folds(n, config.n_folds, seed, &response);
    result.stratified = true;
  }

  const int k_folds = config.n_folds;
  std::vector<std::vector<double>> loss(static_cast<std::size_t>(k_folds),
                                        std::vector<double>(n_lambda, 0.0));
  std::vector<double> fold_size(static_cast<std::size_t>(k_folds), 0.0);

  for (int k = 0; k < k_folds; ++k) {
    std::vector<Index> train, test;
    for (Index i = 0; i < n; ++i) {
      (folds[static_cast<std::size_t>(i)] == k ? test : train).push_back(i);
    }
    fold_size[static_cast<std::size_t>(k)] = static_cast<double>(test.size());
    const DesignMatrix x_train = x.select_rows(train);
    Vector y_train(static_cast<Index>(train.size()));
    for (std::size_t r = 0; r < train.size(); ++r) y_train[static_cast<Index>(r)] = response[train[r]];
    Matrix x_test(static_cast<Index>(test.size()), x.cols());
    Vector y_test(static_cast<Index>(test.size()));
    for (std::size_t r = 0; r < test.size(); ++r) {
      x_test.row(static_cast<Index>(r)) = x.values().row(test[r]);
      y_test[static_cast<Index>(r)] = response[test[r]];
    }

    const PathResult path =
        fit_path(x_train, y_train, family, grid, penalty_factors, true, config.control);
    // Lambdas past an early-stopped fold path reuse its last fit.
    for (std::size_t l = 0; l < n_lambda; ++l) {
      const PenalizedFit& fit = path.fits[std::min(l, path.fits.size() - 1)];
      const Vector pred = predict(fit, x_test, Scale::response);
      loss[static_cast<std::size_t>(k)][l] = held_out_loss(family, y_test, pred);
    }
  }

  result.lambda_grid = grid;
  result.mean_cv_error.assign(n_lambda, 0.0);
  result.cv_error_se.assign(n_lambda, 0.0);
  const double total = static_cast<double>(n);
  for (std::size_t l = 0; l < n_lambda; ++l) {
    double mean = 0.0;
    for (int k = 0; k < k_folds; ++k) {
      mean += fold_size[static_cast<std::size_t>(k)] * loss[static_cast<std::size_t>(k)][l];
    }
    mean /= total;
    double spread = 0.0;
    for (int k = 0; k < k_folds; ++k) {
      const double d = loss[static_cast<std::size_t>(k)][l] - mean;
      spread += fold_size[static_cast<std::size_t>(k)] * d * d;
    }
    result.mean_cv_error[l] = mean;
    result.cv_error_se[l] = std::sqrt(spread / total / static_cast<double>(k_folds - 1));
  }

  // Descending grid: the first minimizer is the largest lambda attaining it.
  std::size_t best = 0;
  for (std::size_t l = 1; l < n_lambda; ++l) {
    if (result.mean_cv_error[l] < result.mean_cv_error[best]) best = l;
  }
  const double bound = result.mean_cv_error[best] + result.cv_error_se[best];
  std::size_t one_se = best;
  for (std::size_t l = 0; l <= best; ++l) {
    if (result.mean_cv_error[l] <= bound) {
      one_se = l;
      break;
    }
  }
  result.lambda_min = grid[best];
  result.lambda_1se = grid[one_se];
  const std::size_t chosen = config.rule == LambdaRule::min ? best : one_se;
  result.selected_lambda = grid[chosen];
  result.fit = full.fits[chosen];
  return result;
}

}  // namespace drmatch
