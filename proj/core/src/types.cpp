#include "drmatch/types.hpp"

#include <cmath>

#ifndef DRMATCH_VERSION
#define DRMATCH_VERSION "0.0.0"
#endif

namespace drmatch {

std::string version() { return DRMATCH_VERSION; }

std::string to_string(Family family) {
  return family == Family::gaussian ? "gaussian" : "binomial";
}

std::string to_string(Estimand estimand) {
  return estimand == Estimand::ate ? "ATE" : "ATT";
}

Estimand parse_estimand(const std::string& text) {
  if (text == "ate" || text == "ATE") return Estimand::ate;
  if (text == "att" || text == "ATT") return Estimand::att;
  throw ConfigError("unknown estimand '" + text + "' (expected ate or att)");
}

DesignMatrix::DesignMatrix(Matrix values) : values_(std::move(values)) {
  const Index n = values_.rows();
  const Index p = values_.cols();
  if (n < 2) throw DataError("design matrix needs at least 2 rows");
  if (!values_.allFinite()) throw DataError("design matrix contains non-finite entries");

  means_ = values_.colwise().mean().transpose();
  sds_.resize(p);
  standardized_.resize(n, p);
  for (Index j = 0; j < p; ++j) {
    auto centered = values_.col(j).array() - means_[j];
    double sd = std::sqrt(centered.square().sum() / static_cast<double>(n));
    // Treat round-off sized spread as constant.
    if (sd <= 1e-12 * std::max(1.0, std::abs(means_[j]))) sd = 0.0;
    sds_[j] = sd;
    if (sd > 0.0) {
      standardized_.col(j) = centered.matrix() / sd;
    } else {
      standardized_.col(j).setZero();
    }
  }
}

DesignMatrix DesignMatrix::select_rows(std::span<const Index> rows) const {
  Matrix sub(static_cast<Index>(rows.size()), values_.cols());
  for (Index r = 0; r < sub.rows(); ++r) sub.row(r) = values_.row(rows[r]);
  return DesignMatrix(std::move(sub));
}

Index Dataset::n_treated() const { return w.sum(); }

void Dataset::validate(bool require_both_arms) const {
  const Index n = y.size();
  if (w.size() != n || x.rows() != n) {
    throw DataError("dataset lengths disagree: y=" + std::to_string(n) +
                    " w=" + std::to_string(w.size()) + " x=" + std::to_string(x.rows()));
  }
  if (!y.allFinite()) throw DataError("outcome contains non-finite values");
  for (Index i = 0; i < n; ++i) {
    if (w[i] != 0 && w[i] != 1) {
      throw DataError("treatment must be 0/1; row " + std::to_string(i) + " has " +
                      std::to_string(w[i]));
    }
  }
  if (!covariate_names.empty() && static_cast<Index>(covariate_names.size()) != x.cols()) {
    throw DataError("covariate name count does not match column count");
  }
  if (require_both_arms) {
    const Index nt = n_treated();
    if (nt == 0 || nt == n) throw DataError("both treatment arms must be non-empty");
  }
}

Dataset make_dataset(Vector y, Treatment w, Matrix x, std::vector<std::string> covariate_names) {
  Dataset d;
  d.y = std::move(y);
  d.w = std::move(w);
  if (covariate_names.empty()) {
    covariate_names.reserve(static_cast<std::size_t>(x.cols()));
    for (Index j = 0; j < x.cols(); ++j) covariate_names.push_back("X" + std::to_string(j + 1));
  }
  d.covariate_names = std::move(covariate_names);
  d.x = DesignMatrix(std::move(x));
  d.validate(false);
  return d;
}

std::vector<Index> indices_where(const Treatment& w, int arm) {
  std::vector<Index> out;
  for (Index i = 0; i < w.size(); ++i) {
    if (w[i] == arm) out.push_back(i);
  }
  return out;
}

}  // namespace drmatch
