#pragma once

#include <string>
#include <vector>

#include "drmatch/matching.hpp"
#include "drmatch/types.hpp"

namespace drmatch {

inline constexpr double kBalanceThreshold = 0.1;

/// Absolute standardized mean difference. Means are weighted by
/// `unit_weights` (all ones when null); the denominator always uses the
/// unweighted per-arm sample variances of the full sample.
double asmd(const Vector& x, const Treatment& w, const Vector* unit_weights = nullptr);

struct CovariateBalance {
  std::string name;
  double before = 0.0;
  double after = 0.0;
};

/// Mean over all covariates, mean over covariates whose
/// pre-matching ASMD exceeds the threshold (NaN when there are none), max.
struct BalanceSummary {
  double mean = 0.0;
  double unbalanced_mean = 0.0;
  double max = 0.0;
};

struct BalanceReport {
  std::vector<CovariateBalance> covariates;
  BalanceSummary before;
  BalanceSummary after;
  Index n_unbalanced = 0;
  double threshold = kBalanceThreshold;
};

/// After-matching ASMDs use the match weights R.
BalanceReport balance_report(const Dataset& data, const MatchResult& match);
BalanceReport balance_report(const Dataset& data, const Vector& after_weights);

/// Dot plot of ASMD by covariate index, before and after, with a reference
/// line at the threshold.
std::string balance_svg(const BalanceReport& report, const std::string& title = "Covariate balance");

}  // namespace drmatch
