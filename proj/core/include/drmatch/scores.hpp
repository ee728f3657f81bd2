#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drmatch/lasso.hpp"
#include "drmatch/types.hpp"

namespace drmatch {

enum class ScoreKind { propensity, prognostic };
enum class ScoreChoice { propensity_only, prognostic_only, both };

// Scale of the matching variables: probability/outcome scale (the default) or
// the linear predictor, kept for sensitivity analyses.
enum class ScoreScale { natural, linear };

std::string to_string(ScoreKind kind);

struct ScoreColumn {
  ScoreKind kind;
  Vector values;
};

/// A fitted nuisance model together with its per-unit score.
struct ScoreFit {
  PenalizedFit fit;
  Vector scores;
  double selected_lambda = 0.0;
  int n_folds = 0;
  std::vector<std::string> warnings;
};

struct ScoreSet {
  std::vector<ScoreColumn> columns;
  std::optional<PenalizedFit> propensity_fit;
  std::optional<PenalizedFit> prognostic_fit;
  std::vector<std::string> warnings;

  Index size() const { return columns.empty() ? 0 : columns.front().values.size(); }
  const Vector* find(ScoreKind kind) const;
};

/// Binomial lasso of W on X with the CV-selected lambda; scores are
/// inverse-logit predictions (or linear predictors with ScoreScale::linear).
ScoreFit fit_propensity(const Dataset& data, const CvConfig& cv, std::uint64_t seed,
                        ScoreScale scale = ScoreScale::natural);

/// Gaussian lasso of Y on X fit on control units only, predicted for every unit.
ScoreFit fit_prognostic(const Dataset& data, const CvConfig& cv, std::uint64_t seed);

/// Builds the requested columns from already-fitted models.
ScoreSet make_score_set(ScoreChoice which, const ScoreFit* propensity, const ScoreFit* prognostic);

ScoreSet assemble_scores(const Dataset& data, ScoreChoice which, const CvConfig& cv,
                         std::uint64_t seed, ScoreScale scale = ScoreScale::natural);

}  // namespace drmatch
