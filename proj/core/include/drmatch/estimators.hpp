#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drmatch/lasso.hpp"
#include "drmatch/matching.hpp"
#include "drmatch/scores.hpp"
#include "drmatch/types.hpp"

namespace drmatch {

inline constexpr double kCiMultiplier = 1.96;

struct EffectEstimate {
  std::string name;
  Estimand estimand = Estimand::ate;
  double tau_hat = 0.0;
  double variance = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  Index n_used = 0;
  Index n_dropped = 0;
  // Set for plug-in standard errors that are rough conveniences.
  bool approximate_se = false;
  std::vector<std::pair<std::string, std::string>> diagnostics;
  std::vector<std::string> warnings;

  void note(const std::string& key, const std::string& value) { diagnostics.emplace_back(key, value); }
};

/// Fills se and the 95% interval from `variance`.
EffectEstimate make_estimate(std::string name, Estimand estimand, double tau_hat, double variance,
                             Index n_used, Index n_dropped);

/// Weight-based variance of a matching estimator: sigma2 * (sum W R^2 / (sum W R)^2 +
/// sum (1-W) R^2 / (sum (1-W) R)^2). Returns {variance, se}.
std::pair<double, double> matching_se(const Dataset& data, const MatchResult& match, double sigma2);

/// Matching estimator for already-built match sets.
EffectEstimate matching_estimate(const Dataset& data, const MatchResult& match, double sigma2,
                                 std::string name = "drme");

/// Matches on `scores` and returns the matching estimate. Throws DataError
/// "no units within caliper" when every unit is dropped.
EffectEstimate drme(const Dataset& data, const ScoreSet& scores, const MatchSpec& spec,
                    double sigma2);

/// Additive outcome lasso of Y on (W, X) with W unpenalized.
struct OutcomeModel {
  PenalizedFit fit;  // coefficient 0 is W
  double selected_lambda = 0.0;
  Vector m0;
  Vector m1;
  // Mean squared residual of the additive fit.
  double sigma2 = 0.0;
  // Covariate support (indices into X), W excluded.
  std::vector<Index> support;
  bool per_arm = false;
};

/// With `per_arm`, m0 and m1 come from separate lassos on each arm; the
/// additive fit is still made for sigma2 and the W coefficient.
OutcomeModel fit_outcome_model(const Dataset& data, const CvConfig& cv, std::uint64_t seed,
                               bool per_arm = false);

double residual_variance(const Dataset& data, const CvConfig& cv, std::uint64_t seed);

EffectEstimate naive(const Dataset& data);

/// OLS of Y on (1, W, basis); tau is the W coefficient.
EffectEstimate oracle(const Dataset& data, const Matrix& basis);

EffectEstimate outcome_lasso(const Dataset& data, const OutcomeModel& model);

/// OLS of Y on W and the union of the outcome and treatment lasso supports,
/// with an HC1 standard error.
EffectEstimate double_post_selection(const Dataset& data, const OutcomeModel& model,
                                     const PenalizedFit& propensity_fit);

struct IpwOptions {
  bool horvitz_thompson = false;
  // Clamp propensities to [trim, 1 - trim] when set.
  std::optional<double> trim;
};

EffectEstimate lasso_ipw(const Dataset& data, const Vector& propensity, const IpwOptions& options = {},
                         Estimand estimand = Estimand::ate);

/// Augmented IPW from given nuisance predictions. SE is the sample sd of the
/// influence summands over sqrt(N).
EffectEstimate aipw(const Dataset& data, const Vector& propensity, const Vector& m0, const Vector& m1,
                    Estimand estimand = Estimand::ate, std::string name = "lasso-dr");

/// Refits both nuisance models without penalty on the union of the two lasso
/// supports, then applies AIPW. A singular or separated refit falls back to
/// the penalized predictions with a warning.
EffectEstimate aipw_refit(const Dataset& data, const OutcomeModel& model,
                          const PenalizedFit& propensity_fit, const Vector& propensity,
                          Estimand estimand = Estimand::ate);

enum class EstimatorId {
  naive,
  oracle,
  outcome_lasso,
  double_post_selection,
  ipw,
  farrell,
  lasso_dr,
  psm,
  pgm,
  drme,
};

const std::vector<EstimatorId>& all_estimators();
/// Short identifier used on the command line and in CSV output.
std::string estimator_key(EstimatorId id);
/// Human-readable row label.
std::string estimator_label(EstimatorId id);
EstimatorId parse_estimator(const std::string& key);

struct EstimatorConfig {
  CvConfig cv;
  MatchSpec match{1, 0.5, true, Estimand::ate};
  IpwOptions ipw;
  bool per_arm_outcome = false;
  ScoreScale score_scale = ScoreScale::natural;
};

struct EstimatorRun {
  EstimatorId id;
  std::optional<EffectEstimate> estimate;
  std::string error;
  std::exception_ptr failure;
};

/// Nuisance fits shared by all estimators of one dataset.
struct Nuisance {
  std::optional<ScoreFit> propensity;
  std::optional<ScoreFit> prognostic;
  std::optional<OutcomeModel> outcome;
};

struct EstimationBundle {
  std::vector<EstimatorRun> runs;
  Nuisance nuisance;
  // Match sets of the matching estimators that ran.
  std::vector<std::pair<EstimatorId, MatchResult>> matches;
  std::vector<std::string> errors;

  const MatchResult* match_for(EstimatorId id) const;
};

/// Runs the requested estimators, fitting each nuisance model at most once.
/// A failure is recorded against the estimators that needed it rather than
/// thrown. `oracle_basis` is required only for the oracle.
EstimationBundle run_estimators(const Dataset& data, std::span<const EstimatorId> ids,
                                const EstimatorConfig& config, std::uint64_t seed,
                                const Matrix* oracle_basis = nullptr);

}  // namespace drmatch
