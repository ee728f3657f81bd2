#include "drmatch/scores.hpp"

#include <algorithm>
#include <cmath>

#include "drmatch/linalg.hpp"
#include "drmatch/rng.hpp"

namespace drmatch {

namespace {

constexpr std::uint64_t kPropensityStream = 0x70726f70ULL;
constexpr std::uint64_t kPrognosticStream = 0x70726f67ULL;

bool has_varying_column(const DesignMatrix& x) {
  for (Index j = 0; j < x.cols(); ++j) {
    if (!x.is_constant(j)) return true;
  }
  return false;
}

PenalizedFit intercept_only(Family family, double intercept, Index p) {
  PenalizedFit fit;
  fit.family = family;
  fit.intercept = intercept;
  fit.coefficients = Vector::Zero(p);
  fit.lambda = 0.0;
  return fit;
}

}  // namespace

std::string to_string(ScoreKind kind) {
  return kind == ScoreKind::propensity ? "propensity" : "prognostic";
}

const Vector* ScoreSet::find(ScoreKind kind) const {
  for (const auto& c : columns) {
    if (c.kind == kind) return &c.values;
  }
  return nullptr;
}

ScoreFit fit_propensity(const Dataset& data, const CvConfig& cv, std::uint64_t seed,
                        ScoreScale scale) {
  data.validate(false);
  const Index nt = data.n_treated();
  if (nt == 0 || nt == data.size()) {
    throw DataError("degenerate treatment vector: both arms must be non-empty");
  }
  const Vector target = data.w.cast<double>();

  ScoreFit out;
  if (!has_varying_column(data.x)) {
    out.fit = intercept_only(Family::binomial, logit(target.mean()), data.x.cols());
    out.warnings.push_back("propensity model: no varying covariates; intercept-only fit");
  } else {
    CvConfig config = cv;
    config.n_folds = std::min<int>(cv.n_folds, static_cast<int>(data.size()));
    const CvResult result = cross_validate(data.x, target, Family::binomial, config,
                                           derive_seed(seed, kPropensityStream));
    out.fit = result.fit;
    out.selected_lambda = result.selected_lambda;
    out.n_folds = result.n_folds;
    if (!out.fit.converged) out.warnings.push_back("propensity model: " + out.fit.diagnostic);
  }
  out.scores = predict(out.fit, data.x,
                       scale == ScoreScale::natural ? Scale::response : Scale::linear);
  return out;
}

ScoreFit fit_prognostic(const Dataset& data, const CvConfig& cv, std::uint64_t seed) {
  data.validate(false);
  const std::vector<Index> controls = indices_where(data.w, 0);
  const Index n_controls = static_cast<Index>(controls.size());
  if (n_controls < 4) {
    throw DataError("prognostic model needs at least 4 control units; found " +
                    std::to_string(n_controls));
  }

  ScoreFit out;
  Vector y_controls(n_controls);
  for (Index r = 0; r < n_controls; ++r) y_controls[r] = data.y[controls[static_cast<std::size_t>(r)]];

  const double mean = y_controls.mean();
  const bool constant_outcome =
      (y_controls.array() - mean).abs().maxCoeff() <= 1e-12 * std::max(1.0, std::abs(mean));
  const DesignMatrix x_controls = data.x.select_rows(controls);

  if (constant_outcome || !has_varying_column(x_controls)) {
    out.fit = intercept_only(Family::gaussian, mean, data.x.cols());
    out.warnings.push_back(constant_outcome
                               ? "prognostic model: control outcome is constant; intercept-only fit"
                               : "prognostic model: no varying covariates among controls");
  } else {
    CvConfig config = cv;
    if (n_controls < cv.n_folds) {
      config.n_folds = static_cast<int>(n_controls);
      out.warnings.push_back("prognostic model: only " + std::to_string(n_controls) +
                             " controls; using " + std::to_string(config.n_folds) + " folds");
    }
    const CvResult result = cross_validate(x_controls, y_controls, Family::gaussian, config,
                                           derive_seed(seed, kPrognosticStream));
    out.fit = result.fit;
    out.selected_lambda = result.selected_lambda;
    out.n_folds = result.n_folds;
    if (!out.fit.converged) out.warnings.push_back("prognostic model: " + out.fit.diagnostic);
  }
  out.scores = predict(out.fit, data.x, Scale::response);
  return out;
}

ScoreSet make_score_set(ScoreChoice which, const ScoreFit* propensity, const ScoreFit* prognostic) {
  ScoreSet set;
  const bool want_propensity = which != ScoreChoice::prognostic_only;
  const bool want_prognostic = which != ScoreChoice::propensity_only;
  if (want_propensity) {
    if (propensity == nullptr) throw ConfigError("propensity score requested but not fitted");
    set.columns.push_back({ScoreKind::propensity, propensity->scores});
    set.propensity_fit = propensity->fit;
    set.warnings.insert(set.warnings.end(), propensity->warnings.begin(), propensity->warnings.end());
  }
  if (want_prognostic) {
    if (prognostic == nullptr) throw ConfigError("prognostic score requested but not fitted");
    set.columns.push_back({ScoreKind::prognostic, prognostic->scores});
    set.prognostic_fit = prognostic->fit;
    set.warnings.insert(set.warnings.end(), prognostic->warnings.begin(), prognostic->warnings.end());
  }
  for (const auto& column : set.columns) {
    if (!column.values.allFinite()) throw NumericalError("score column has non-finite entries");
  }
  return set;
}

ScoreSet assemble_scores(const Dataset& data, ScoreChoice which, const CvConfig& cv,
                         std::uint64_t seed, ScoreScale scale) {
  std::optional<ScoreFit> propensity;
  std::optional<ScoreFit> prognostic;
  if (which != ScoreChoice::prognostic_only) propensity = fit_propensity(data, cv, seed, scale);
  if (which != ScoreChoice::propensity_only) prognostic = fit_prognostic(data, cv, seed);
  return make_score_set(which, propensity ? &*propensity : nullptr,
                        prognostic ? &*prognostic : nullptr);
}

}  // namespace drmatch
