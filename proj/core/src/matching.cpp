#include "drmatch/matching.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace drmatch {

void MatchSpec::validate() const {
  if (m < 1) throw ConfigError("M must be at least 1");
  if (caliper_sd && !(*caliper_sd > 0.0)) throw ConfigError("caliper must be positive");
}

Matrix score_matrix(const ScoreSet& scores) {
  if (scores.columns.empty() || scores.columns.size() > 2) {
    throw ConfigError("a score set needs one or two columns");
  }
  Matrix z(scores.size(), static_cast<Index>(scores.columns.size()));
  for (std::size_t k = 0; k < scores.columns.size(); ++k) {
    z.col(static_cast<Index>(k)) = scores.columns[k].values;
  }
  return z;
}

MatchResult build_matches(const ScoreSet& scores, const Treatment& w, const MatchSpec& spec) {
  return build_matches(score_matrix(scores), w, spec);
}

MatchResult build_matches(const Matrix& scores, const Treatment& w, const MatchSpec& spec) {
  spec.validate();
  const Index n = scores.rows();
  const Index d = scores.cols();
  if (w.size() != n) throw DataError("treatment length does not match the score rows");
  if (d < 1) throw ConfigError("no score columns to match on");
  if (!scores.allFinite()) throw DataError("score matrix has non-finite entries");

  const std::vector<Index> treated = indices_where(w, 1);
  const std::vector<Index> control = indices_where(w, 0);
  if (treated.empty() || control.empty()) throw DataError("matching needs both treatment arms");

  MatchResult result;
  result.spec = spec;
  result.column_scales = Vector::Ones(d);
  Vector sds(d);
  for (Index k = 0; k < d; ++k) {
    const double mean = scores.col(k).mean();
    const double ss = (scores.col(k).array() - mean).square().sum();
    sds[k] = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    if (!(sds[k] > 0.0)) {
      sds[k] = 1.0;
      result.warnings.push_back("score column " + std::to_string(k) +
                                " has zero variance; using sd 1");
    }
    if (spec.standardize_columns) result.column_scales[k] = sds[k];
  }

  // Work on scaled copies so distances are plain Euclidean.
  Matrix z = scores;
  Vector caliper(d);
  for (Index k = 0; k < d; ++k) {
    z.col(k) /= result.column_scales[k];
    if (spec.caliper_sd) caliper[k] = *spec.caliper_sd * sds[k] / result.column_scales[k];
  }

  result.matches.assign(static_cast<std::size_t>(n), {});
  result.usage_count.assign(static_cast<std::size_t>(n), 0);
  result.retained.assign(static_cast<std::size_t>(n), false);
  result.weights = Vector::Zero(n);

  const auto needs_match = [&](Index i) {
    return spec.estimand == Estimand::ate || w[i] == 1;
  };
  const auto m = static_cast<std::size_t>(spec.m);
  std::vector<std::pair<double, Index>> candidates;

  for (Index i = 0; i < n; ++i) {
    if (!needs_match(i)) continue;
    const std::vector<Index>& pool = w[i] == 1 ? control : treated;
    candidates.clear();
    for (Index j : pool) {
      bool admissible = true;
      double dist = 0.0;
      for (Index k = 0; k < d; ++k) {
        const double diff = z(i, k) - z(j, k);
        if (spec.caliper_sd && std::abs(diff) > caliper[k]) {
          admissible = false;
          break;
        }
        dist += diff * diff;
      }
      if (admissible) candidates.emplace_back(dist, j);
    }
    const std::size_t keep = std::min(m, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end());
    auto& chosen = result.matches[static_cast<std::size_t>(i)];
    for (std::size_t r = 0; r < keep; ++r) chosen.push_back(candidates[r].second);
    if (!chosen.empty()) result.retained[static_cast<std::size_t>(i)] = true;
  }

  for (Index i = 0; i < n; ++i) {
    const auto& chosen = result.matches[static_cast<std::size_t>(i)];
    if (result.retained[static_cast<std::size_t>(i)]) result.weights[i] += 1.0;
    if (chosen.empty()) continue;
    const double share = 1.0 / static_cast<double>(chosen.size());
    for (Index j : chosen) {
      ++result.usage_count[static_cast<std::size_t>(j)];
      result.weights[j] += share;
    }
  }

  const EffectiveSample sample = effective_sample(result, w);
  result.n_dropped = sample.n_dropped;
  return result;
}

EffectiveSample effective_sample(const MatchResult& result, const Treatment& w) {
  EffectiveSample out;
  for (Index i = 0; i < result.size(); ++i) {
    const bool eligible = result.spec.estimand == Estimand::ate || w[i] == 1;
    if (!eligible) continue;
    if (result.retained[static_cast<std::size_t>(i)]) {
      ++out.n_retained;
      ++(w[i] == 1 ? out.retained_treated : out.retained_control);
    } else {
      ++out.n_dropped;
    }
  }
  return out;
}

}  // namespace drmatch
