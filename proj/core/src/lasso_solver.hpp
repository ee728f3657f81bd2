#pragma once

#include <span>
#include <string>
#include <vector>

#include "drmatch/lasso.hpp"

namespace drmatch::detail {

// Coordinate descent on the standardized design, holding the state needed to
// walk a decreasing lambda sequence with warm starts.
//
// Gaussian: residual_ = y - intercept - Xs * beta.
// Binomial: eta_ = intercept + Xs * beta; each outer iteration refreshes a
// weighted least-squares approximation solved by the same descent loop.
class CoordinateSolver {
 public:
  CoordinateSolver(const DesignMatrix& x, const Vector& response, Family family,
                   std::span<const double> penalty_factors, const LassoControl& control);

  double lambda_max() const { return lambda_max_; }
  double null_deviance() const { return null_deviance_; }
  double deviance() const;

  void warm_start(const Vector& coefficients);
  bool solve(double lambda, double lambda_previous);
  PenalizedFit snapshot(double lambda) const;

 private:
  void add_to_working_set(Index j);
  void rebuild_active(std::vector<Index>& active) const;
  void compute_gradient();
  void refresh_eta();
  bool run_inner(double lambda);
  bool gaussian_descent(double lambda);
  bool active_set_step(const std::vector<Index>& active, double lambda);
  bool weighted_active_set_step(const std::vector<Index>& active, double lambda);
  bool binomial_descent(double lambda);
  double weighted_sq_norm(Index j);
  void ensure_gram_column(Index j);

  const DesignMatrix& x_;
  const Matrix& xs_;
  Vector y_;
  Family family_;
  LassoControl control_;
  Index n_;
  Index p_;
  double inv_n_;

  std::vector<double> pf_;
  Vector beta_;
  double intercept_ = 0.0;
  Vector residual_;
  Vector eta_;
  Vector grad_;

  Vector weights_;
  Vector work_;
  Vector xv_;
  std::vector<long> xv_stamp_;
  long stamp_ = 0;

  // Covariance mode (gaussian, P < 500): grad_ is kept current through
  // lazily computed Gram columns instead of a residual vector.
  bool covariance_mode_ = false;
  Matrix gram_;
  std::vector<char> gram_ready_;
  Vector xty_;
  double yy_ = 0.0;

  std::vector<char> in_ws_;
  std::vector<Index> ws_list_;

  double lambda_max_ = 0.0;
  double null_deviance_ = 0.0;
  bool at_null_ = true;
  bool converged_ = true;
  long updates_ = 0;
  int cycles_ = 0;
  std::string diagnostic_;
};

}  // namespace drmatch::detail
