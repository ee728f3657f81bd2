#include "drmatch/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <set>

#include "drmatch/linalg.hpp"
#include "drmatch/rng.hpp"

namespace drmatch {

namespace {

constexpr std::uint64_t kOutcomeStream = 0x6f7574636fULL;
constexpr std::uint64_t kArmStream = 0x61726dULL;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_number(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.6g", value);
  return buffer;
}

bool has_varying_column(const DesignMatrix& x) {
  for (Index j = 0; j < x.cols(); ++j) {
    if (!x.is_constant(j)) return true;
  }
  return false;
}

double sample_variance(const Vector& v) {
  if (v.size() < 2) return kNaN;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

Vector treatment_vector(const Dataset& data) { return data.w.cast<double>(); }

Vector subset(const Vector& v, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Index>(r)] = v[rows[r]];
  return out;
}

// Lasso with CV on the given design, or the unpenalized-only fit when no
// penalized column varies.
PenalizedFit cv_fit(const DesignMatrix& x, const Vector& y, const CvConfig& cv, std::uint64_t seed,
                    std::span<const double> pf, double& selected_lambda) {
  bool any_penalized = false;
  for (Index j = 0; j < x.cols(); ++j) {
    const double factor = pf.empty() ? 1.0 : pf[static_cast<std::size_t>(j)];
    if (factor > 0.0 && !x.is_constant(j)) any_penalized = true;
  }
  if (!any_penalized) {
    selected_lambda = 0.0;
    return fit_lasso(x, y, Family::gaussian, 0.0, pf);
  }
  CvConfig config = cv;
  config.n_folds = std::min<int>(cv.n_folds, static_cast<int>(x.rows()));
  const CvResult result = cross_validate(x, y, Family::gaussian, config, seed, pf);
  selected_lambda = result.selected_lambda;
  return result.fit;
}

std::vector<Index> covariate_support(const PenalizedFit& fit, Index offset) {
  std::vector<Index> out;
  for (Index j = offset; j < fit.coefficients.size(); ++j) {
    if (fit.coefficients[j] != 0.0) out.push_back(j - offset);
  }
  return out;
}

void require_both_arms(const Dataset& data) {
  data.validate(false);
  if (data.n_treated() == 0 || data.n_control() == 0) {
    throw DataError("estimation needs both treatment arms");
  }
}

}  // namespace

EffectEstimate make_estimate(std::string name, Estimand estimand, double tau_hat, double variance,
                             Index n_used, Index n_dropped) {
  EffectEstimate e;
  e.name = std::move(name);
  e.estimand = estimand;
  e.tau_hat = tau_hat;
  e.variance = variance;
  e.se = std::sqrt(variance);
  e.ci_lower = tau_hat - kCiMultiplier * e.se;
  e.ci_upper = tau_hat + kCiMultiplier * e.se;
  e.n_used = n_used;
  e.n_dropped = n_dropped;
  return e;
}

std::pair<double, double> matching_se(const Dataset& data, const MatchResult& match, double sigma2) {
  if (match.size() != data.size()) throw DataError("match result does not fit the dataset");
  double sum_t = 0.0, sq_t = 0.0, sum_c = 0.0, sq_c = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    const double r = match.weights[i];
    if (data.w[i] == 1) {
      sum_t += r;
      sq_t += r * r;
    } else {
      sum_c += r;
      sq_c += r * r;
    }
  }
  if (!(sum_t > 0.0) || !(sum_c > 0.0)) {
    throw NumericalError("matching standard error: an arm has zero total weight");
  }
  const double variance = sigma2 * sq_t / (sum_t * sum_t) + sigma2 * sq_c / (sum_c * sum_c);
  return {variance, std::sqrt(variance)};
}

EffectEstimate matching_estimate(const Dataset& data, const MatchResult& match, double sigma2,
                                 std::string name) {
  if (match.size() != data.size()) throw DataError("match result does not fit the dataset");
  const EffectiveSample sample = effective_sample(match, data.w);
  if (sample.n_retained == 0) throw DataError("no units within caliper");

  double total = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    if (!match.retained[static_cast<std::size_t>(i)]) continue;
    const auto& chosen = match.matches[static_cast<std::size_t>(i)];
    double matched = 0.0;
    for (Index j : chosen) matched += data.y[j];
    matched /= static_cast<double>(chosen.size());
    const double sign = data.w[i] == 1 ? 1.0 : -1.0;
    total += sign * (data.y[i] - matched);
  }
  const double tau = total / static_cast<double>(sample.n_retained);
  const double variance = matching_se(data, match, sigma2).first;
  EffectEstimate e =
      make_estimate(std::move(name), match.spec.estimand, tau, variance, sample.n_retained, sample.n_dropped);
  e.note("sigma2", format_number(sigma2));
  e.note("retained_treated", std::to_string(sample.retained_treated));
  e.note("retained_control", std::to_string(sample.retained_control));
  e.warnings = match.warnings;
  return e;
}

EffectEstimate drme(const Dataset& data, const ScoreSet& scores, const MatchSpec& spec, double sigma2) {
  require_both_arms(data);
  const MatchResult match = build_matches(scores, data.w, spec);
  EffectEstimate e = matching_estimate(data, match, sigma2, "drme");
  if (scores.propensity_fit) e.note("propensity_nonzero", std::to_string(scores.propensity_fit->n_nonzero));
  if (scores.prognostic_fit) e.note("prognostic_nonzero", std::to_string(scores.prognostic_fit->n_nonzero));
  return e;
}

OutcomeModel fit_outcome_model(const Dataset& data, const CvConfig& cv, std::uint64_t seed, bool per_arm) {
  require_both_arms(data);
  if (data.size() < 3) throw DataError("outcome model needs at least 3 units");
  const Index n = data.size();
  const Index p = data.x.cols();
  Matrix xw(n, p + 1);
  xw.col(0) = treatment_vector(data);
  xw.rightCols(p) = data.x.values();
  const DesignMatrix design(std::move(xw));
  std::vector<double> pf(static_cast<std::size_t>(p + 1), 1.0);
  pf[0] = 0.0;

  OutcomeModel model;
  model.fit = cv_fit(design, data.y, cv, derive_seed(seed, kOutcomeStream), pf, model.selected_lambda);
  model.support = covariate_support(model.fit, 1);
  const Vector beta = model.fit.coefficients.tail(p);
  model.m0 = (data.x.values() * beta).array() + model.fit.intercept;
  model.m1 = model.m0.array() + model.fit.coefficients[0];
  const Vector fitted = predict(model.fit, design, Scale::response);
  model.sigma2 = (data.y - fitted).squaredNorm() / static_cast<double>(n);

  if (per_arm) {
    model.per_arm = true;
    for (int arm = 0; arm <= 1; ++arm) {
      const std::vector<Index> rows = indices_where(data.w, arm);
      if (rows.size() < 4) throw DataError("per-arm outcome model needs at least 4 units per arm");
      const DesignMatrix x_arm = data.x.select_rows(rows);
      const Vector y_arm = subset(data.y, rows);
      double lambda = 0.0;
      PenalizedFit fit;
      const double mean = y_arm.mean();
      if ((y_arm.array() - mean).abs().maxCoeff() <= 1e-12 * std::max(1.0, std::abs(mean)) ||
          !has_varying_column(x_arm)) {
        fit.family = Family::gaussian;
        fit.intercept = mean;
        fit.coefficients = Vector::Zero(p);
      } else {
        fit = cv_fit(x_arm, y_arm, cv, derive_seed(seed, kArmStream + static_cast<std::uint64_t>(arm)), {},
                     lambda);
      }
      (arm == 0 ? model.m0 : model.m1) = predict(fit, data.x, Scale::response);
    }
  }
  return model;
}

double residual_variance(const Dataset& data, const CvConfig& cv, std::uint64_t seed) {
  return fit_outcome_model(data, cv, seed).sigma2;
}

EffectEstimate naive(const Dataset& data) {
  require_both_arms(data);
  const std::vector<Index> t = indices_where(data.w, 1);
  const std::vector<Index> c = indices_where(data.w, 0);
  const Vector yt = subset(data.y, t);
  const Vector yc = subset(data.y, c);
  const double variance = sample_variance(yt) / static_cast<double>(yt.size()) +
                          sample_variance(yc) / static_cast<double>(yc.size());
  EffectEstimate e = make_estimate("naive", Estimand::ate, yt.mean() - yc.mean(), variance, data.size(), 0);
  e.approximate_se = true;
  return e;
}

EffectEstimate oracle(const Dataset& data, const Matrix& basis) {
  require_both_arms(data);
  if (basis.rows() != data.size()) throw DataError("oracle basis has the wrong number of rows");
  Matrix design(data.size(), basis.cols() + 2);
  design.col(0).setOnes();
  design.col(1) = treatment_vector(data);
  design.rightCols(basis.cols()) = basis;
  const auto fit = ols(design, data.y);
  if (!fit) throw NumericalError("oracle design is singular");
  EffectEstimate e = make_estimate("oracle", Estimand::ate, fit->coefficients[1], fit->classical_variance(1),
                                   data.size(), 0);
  e.approximate_se = true;
  return e;
}

EffectEstimate outcome_lasso(const Dataset& data, const OutcomeModel& model) {
  require_both_arms(data);
  const double tau = model.fit.coefficients[0];
  double variance = kNaN;
  std::vector<std::string> warnings;
  if (static_cast<Index>(model.support.size()) + 2 < data.size()) {
    const Vector w = treatment_vector(data);
    const Matrix design = design_with_intercept(data.x.values(), model.support, std::span<const Vector>(&w, 1));
    if (const auto fit = ols(design, data.y)) {
      variance = model.sigma2 * fit->xtx_inverse(1, 1);
    } else {
      warnings.push_back("outcome lasso: selected design is singular; no standard error");
    }
  } else {
    warnings.push_back("outcome lasso: selected support too large for a standard error");
  }
  EffectEstimate e = make_estimate("outcome-lasso", Estimand::ate, tau, variance, data.size(), 0);
  e.approximate_se = true;
  e.warnings = std::move(warnings);
  e.note("outcome_nonzero", std::to_string(model.support.size()));
  e.note("lambda", format_number(model.selected_lambda));
  return e;
}

namespace {

std::vector<Index> support_union(const std::vector<Index>& a, const std::vector<Index>& b) {
  std::set<Index> merged(a.begin(), a.end());
  merged.insert(b.begin(), b.end());
  return {merged.begin(), merged.end()};
}

}  // namespace

EffectEstimate double_post_selection(const Dataset& data, const OutcomeModel& model,
                                     const PenalizedFit& propensity_fit) {
  require_both_arms(data);
  const std::vector<Index> selected = support_union(model.support, propensity_fit.support());
  if (static_cast<Index>(selected.size()) >= data.size() - 2) {
    throw NumericalError("selection too dense");
  }
  const Vector w = treatment_vector(data);
  const Matrix design = design_with_intercept(data.x.values(), selected, std::span<const Vector>(&w, 1));
  const auto fit = ols(design, data.y);
  if (!fit) throw NumericalError("double post selection: selected design is singular");
  EffectEstimate e = make_estimate("dps", Estimand::ate, fit->coefficients[1], fit->robust_variance(design, 1),
                                   data.size(), 0);
  e.approximate_se = true;
  e.note("selected", std::to_string(selected.size()));
  return e;
}

EffectEstimate lasso_ipw(const Dataset& data, const Vector& propensity, const IpwOptions& options,
                         Estimand estimand) {
  require_both_arms(data);
  const Index n = data.size();
  if (propensity.size() != n) throw DataError("propensity length does not match the dataset");
  Vector phi = propensity;
  if (options.trim) {
    const double t = *options.trim;
    if (!(t > 0.0 && t < 0.5)) throw ConfigError("propensity trim must lie in (0, 0.5)");
    phi = phi.cwiseMax(t).cwiseMin(1.0 - t);
  }
  for (Index i = 0; i < n; ++i) {
    if (!(phi[i] > 0.0 && phi[i] < 1.0)) throw DataError("propensity scores must lie strictly in (0, 1)");
  }
  const Vector w = treatment_vector(data);
  const Vector& y = data.y;
  const double dn = static_cast<double>(n);
  double tau = 0.0;
  double variance = 0.0;

  if (estimand == Estimand::ate) {
    const Vector a = w.array() / phi.array();
    const Vector b = (1.0 - w.array()) / (1.0 - phi.array());
    if (options.horvitz_thompson) {
      const Vector s = a.cwiseProduct(y) - b.cwiseProduct(y);
      tau = s.mean();
      variance = sample_variance(s) / dn;
    } else {
      const double mu1 = a.dot(y) / a.sum();
      const double mu0 = b.dot(y) / b.sum();
      tau = mu1 - mu0;
      const Vector psi = (a.array() * (y.array() - mu1)) / a.mean() - (b.array() * (y.array() - mu0)) / b.mean();
      variance = psi.squaredNorm() / (dn * dn);
    }
  } else {
    const Vector odds = (1.0 - w.array()) * phi.array() / (1.0 - phi.array());
    const double treated_share = w.mean();
    if (options.horvitz_thompson) {
      const Vector s = (w.cwiseProduct(y) - odds.cwiseProduct(y)) / treated_share;
      tau = s.mean();
      variance = sample_variance(s) / dn;
    } else {
      const double mu1 = w.dot(y) / w.sum();
      const double mu0 = odds.dot(y) / odds.sum();
      tau = mu1 - mu0;
      const Vector psi = (w.array() * (y.array() - mu1) - odds.array() * (y.array() - mu0) * (w.sum() / odds.sum())) /
                         treated_share;
      variance = psi.squaredNorm() / (dn * dn);
    }
  }
  EffectEstimate e = make_estimate("ipw", estimand, tau, variance, n, 0);
  e.approximate_se = true;
  e.note("normalization", options.horvitz_thompson ? "horvitz-thompson" : "hajek");
  return e;
}

EffectEstimate aipw(const Dataset& data, const Vector& propensity, const Vector& m0, const Vector& m1,
                    Estimand estimand, std::string name) {
  require_both_arms(data);
  const Index n = data.size();
  if (propensity.size() != n || m0.size() != n || m1.size() != n) {
    throw DataError("nuisance predictions do not match the dataset");
  }
  const Vector w = treatment_vector(data);
  const auto& phi = propensity.array();
  const auto& y = data.y.array();
  Vector s(n);
  if (estimand == Estimand::ate) {
    s = w.array() * (y - m1.array()) / phi - (1.0 - w.array()) * (y - m0.array()) / (1.0 - phi) + m1.array() -
        m0.array();
  } else {
    const double treated_share = w.mean();
    s = (w.array() * (y - m0.array()) - (1.0 - w.array()) * phi / (1.0 - phi) * (y - m0.array())) / treated_share;
  }
  if (!s.allFinite()) throw NumericalError("augmented IPW produced non-finite terms");
  EffectEstimate e = make_estimate(std::move(name), estimand, s.mean(), sample_variance(s) / static_cast<double>(n),
                                   n, 0);
  e.approximate_se = true;
  return e;
}

EffectEstimate aipw_refit(const Dataset& data, const OutcomeModel& model, const PenalizedFit& propensity_fit,
                          const Vector& propensity, Estimand estimand) {
  require_both_arms(data);
  const Index n = data.size();
  const std::vector<Index> selected = support_union(model.support, propensity_fit.support());
  std::vector<std::string> warnings;

  Vector phi = propensity;
  {
    const Matrix design = design_with_intercept(data.x.values(), selected);
    const auto fit = static_cast<Index>(selected.size()) + 1 < n ? logistic_regression(design, data.w)
                                                                  : std::nullopt;
    if (fit) {
      const Vector eta = design * fit->coefficients;
      for (Index i = 0; i < n; ++i) phi[i] = inverse_logit(eta[i]);
      if ((phi.array() <= 0.0).any() || (phi.array() >= 1.0).any()) {
        phi = propensity;
        warnings.push_back("refit propensity reached 0 or 1; using penalized scores");
      }
    } else {
      warnings.push_back("propensity refit failed; using penalized scores");
    }
  }

  Vector m0 = model.m0;
  Vector m1 = model.m1;
  if (static_cast<Index>(selected.size()) + 2 < n) {
    const Vector w = treatment_vector(data);
    const Matrix design = design_with_intercept(data.x.values(), selected, std::span<const Vector>(&w, 1));
    if (const auto fit = ols(design, data.y)) {
      Matrix d0 = design;
      d0.col(1).setZero();
      m0 = d0 * fit->coefficients;
      m1 = m0.array() + fit->coefficients[1];
    } else {
      warnings.push_back("outcome refit is singular; using penalized predictions");
    }
  } else {
    warnings.push_back("outcome refit has too many covariates; using penalized predictions");
  }

  EffectEstimate e = aipw(data, phi, m0, m1, estimand, "farrell");
  e.warnings = std::move(warnings);
  e.note("selected", std::to_string(selected.size()));
  return e;
}

const std::vector<EstimatorId>& all_estimators() {
  static const std::vector<EstimatorId> ids = {
      EstimatorId::oracle,  EstimatorId::naive,   EstimatorId::outcome_lasso, EstimatorId::double_post_selection,
      EstimatorId::ipw,     EstimatorId::farrell, EstimatorId::lasso_dr,      EstimatorId::psm,
      EstimatorId::pgm,     EstimatorId::drme,
  };
  return ids;
}

std::string estimator_key(EstimatorId id) {
  switch (id) {
    case EstimatorId::naive: return "naive";
    case EstimatorId::oracle: return "oracle";
    case EstimatorId::outcome_lasso: return "outcome-lasso";
    case EstimatorId::double_post_selection: return "dps";
    case EstimatorId::ipw: return "ipw";
    case EstimatorId::farrell: return "farrell";
    case EstimatorId::lasso_dr: return "lasso-dr";
    case EstimatorId::psm: return "psm";
    case EstimatorId::pgm: return "pgm";
    case EstimatorId::drme: return "drme";
  }
  return "unknown";
}

std::string estimator_label(EstimatorId id) {
  switch (id) {
    case EstimatorId::naive: return "Naive";
    case EstimatorId::oracle: return "Oracle";
    case EstimatorId::outcome_lasso: return "Outcome Lasso";
    case EstimatorId::double_post_selection: return "Double post selection";
    case EstimatorId::ipw: return "lasso IPW";
    case EstimatorId::farrell: return "Farrell";
    case EstimatorId::lasso_dr: return "lasso DR";
    case EstimatorId::psm: return "Propensity score matching";
    case EstimatorId::pgm: return "Prognostic score matching";
    case EstimatorId::drme: return "Doubly robust matching";
  }
  return "unknown";
}

EstimatorId parse_estimator(const std::string& key) {
  for (EstimatorId id : all_estimators()) {
    if (estimator_key(id) == key) return id;
  }
  throw ConfigError("unknown estimator '" + key + "'");
}

namespace {

template <typename T>
struct Lazy {
  std::optional<T> value;
  std::exception_ptr failure;
  bool attempted = false;

  const T& get(const std::function<T()>& make) {
    if (!attempted) {
      attempted = true;
      try {
        value = make();
      } catch (const Error&) {
        failure = std::current_exception();
      }
    }
    if (!value) std::rethrow_exception(failure);
    return *value;
  }
};

ScoreColumn matching_column(const ScoreFit& fit, ScoreKind kind, ScoreScale scale, const Dataset& data) {
  if (kind == ScoreKind::propensity && scale == ScoreScale::linear) {
    return {kind, predict(fit.fit, data.x, Scale::linear)};
  }
  return {kind, fit.scores};
}

}  // namespace

const MatchResult* EstimationBundle::match_for(EstimatorId id) const {
  for (const auto& [key, match] : matches) {
    if (key == id) return &match;
  }
  return nullptr;
}

EstimationBundle run_estimators(const Dataset& data, std::span<const EstimatorId> ids,
                                const EstimatorConfig& config, std::uint64_t seed, const Matrix* oracle_basis) {
  EstimationBundle bundle;
  Lazy<ScoreFit> propensity;
  Lazy<ScoreFit> prognostic;
  Lazy<OutcomeModel> outcome;
  const auto get_propensity = [&]() -> const ScoreFit& {
    return propensity.get([&] { return fit_propensity(data, config.cv, seed, ScoreScale::natural); });
  };
  const auto get_prognostic = [&]() -> const ScoreFit& {
    return prognostic.get([&] { return fit_prognostic(data, config.cv, seed); });
  };
  const auto get_outcome = [&]() -> const OutcomeModel& {
    return outcome.get([&] { return fit_outcome_model(data, config.cv, seed, config.per_arm_outcome); });
  };
  const Estimand estimand = config.match.estimand;

  const auto matching_run = [&](EstimatorId id, bool use_propensity, bool use_prognostic) {
    ScoreSet set;
    if (use_propensity) {
      const ScoreFit& f = get_propensity();
      set.columns.push_back(matching_column(f, ScoreKind::propensity, config.score_scale, data));
      set.propensity_fit = f.fit;
    }
    if (use_prognostic) {
      const ScoreFit& f = get_prognostic();
      set.columns.push_back(matching_column(f, ScoreKind::prognostic, config.score_scale, data));
      set.prognostic_fit = f.fit;
    }
    const double sigma2 = get_outcome().sigma2;
    const MatchResult match = build_matches(set, data.w, config.match);
    EffectEstimate e = matching_estimate(data, match, sigma2, estimator_key(id));
    if (set.propensity_fit) e.note("propensity_nonzero", std::to_string(set.propensity_fit->n_nonzero));
    if (set.prognostic_fit) e.note("prognostic_nonzero", std::to_string(set.prognostic_fit->n_nonzero));
    bundle.matches.emplace_back(id, match);
    return e;
  };

  for (EstimatorId id : ids) {
    EstimatorRun run{id, std::nullopt, {}, nullptr};
    try {
      switch (id) {
        case EstimatorId::naive:
          run.estimate = naive(data);
          break;
        case EstimatorId::oracle:
          if (oracle_basis == nullptr) throw ConfigError("the oracle estimator needs a true regressor basis");
          run.estimate = oracle(data, *oracle_basis);
          break;
        case EstimatorId::outcome_lasso:
          run.estimate = outcome_lasso(data, get_outcome());
          break;
        case EstimatorId::double_post_selection:
          run.estimate = double_post_selection(data, get_outcome(), get_propensity().fit);
          break;
        case EstimatorId::ipw:
          run.estimate = lasso_ipw(data, get_propensity().scores, config.ipw, estimand);
          break;
        case EstimatorId::farrell: {
          const ScoreFit& p = get_propensity();
          run.estimate = aipw_refit(data, get_outcome(), p.fit, p.scores, estimand);
          break;
        }
        case EstimatorId::lasso_dr: {
          const OutcomeModel& m = get_outcome();
          run.estimate = aipw(data, get_propensity().scores, m.m0, m.m1, estimand, "lasso-dr");
          break;
        }
        case EstimatorId::psm:
          run.estimate = matching_run(id, true, false);
          break;
        case EstimatorId::pgm:
          run.estimate = matching_run(id, false, true);
          break;
        case EstimatorId::drme:
          run.estimate = matching_run(id, true, true);
          break;
      }
    } catch (const Error& e) {
      run.error = e.what();
      run.failure = std::current_exception();
      bundle.errors.push_back(estimator_key(id) + ": " + run.error);
    }
    bundle.runs.push_back(std::move(run));
  }
  bundle.nuisance.propensity = propensity.value;
  bundle.nuisance.prognostic = prognostic.value;
  bundle.nuisance.outcome = outcome.value;
  return bundle;
}

}  // namespace drmatch
