#pragma once

#include <optional>
#include <string>
#include <vector>

#include "drmatch/scores.hpp"
#include "drmatch/types.hpp"

namespace drmatch {

struct MatchSpec {
  int m = 1;
  // Box caliper: candidate j is admissible for i only if every score column
  // differs by at most caliper_sd column sds.
  std::optional<double> caliper_sd;
  bool standardize_columns = true;
  Estimand estimand = Estimand::ate;

  void validate() const;
};

/// Nearest-neighbor matches with replacement.
///
/// `weights` holds R_u = 1{u retained} + sum over units i that use u of
/// 1/|matches(i)|. With full match sets this is 1 + K_u/M, and in every case
/// the matching estimator equals the R-weighted difference of arm means.
struct MatchResult {
  std::vector<std::vector<Index>> matches;
  std::vector<int> usage_count;
  Vector weights;
  std::vector<bool> retained;
  Index n_dropped = 0;
  MatchSpec spec;
  // Scale applied to each score column for distances and calipers.
  Vector column_scales;
  std::vector<std::string> warnings;

  Index size() const { return static_cast<Index>(matches.size()); }
};

/// Matches on the columns of `scores` (N x d). Columns are scaled by their
/// full-sample sd (divisor N - 1); a zero-variance column uses scale 1.
/// Ties in distance go to the smaller unit index. Throws DataError for an
/// empty arm.
MatchResult build_matches(const Matrix& scores, const Treatment& w, const MatchSpec& spec);
MatchResult build_matches(const ScoreSet& scores, const Treatment& w, const MatchSpec& spec);

struct EffectiveSample {
  Index n_retained = 0;
  Index n_dropped = 0;
  Index retained_treated = 0;
  Index retained_control = 0;
};

EffectiveSample effective_sample(const MatchResult& result, const Treatment& w);

/// Stacks score columns into an N x d matrix.
Matrix score_matrix(const ScoreSet& scores);

}  // namespace drmatch
