#include "drmatch/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include "drmatch/linalg.hpp"
#include "drmatch/rng.hpp"

namespace drmatch {

namespace {

constexpr std::uint64_t kEstimationStream = 0x657374ULL;
constexpr double kLogFloor = 1e-12;

Index required_columns(Form form, bool treatment) {
  switch (form) {
    case Form::linear_31: return treatment ? 6 : 8;
    case Form::nonlinear_32: return 3;
    case Form::appendix_e: return treatment ? 5 : 3;
  }
  return 0;
}

double unit_uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::string to_string(Form form) {
  switch (form) {
    case Form::linear_31: return "linear31";
    case Form::nonlinear_32: return "nonlinear32";
    case Form::appendix_e: return "appendixE";
  }
  return "unknown";
}

Form parse_form(const std::string& text) {
  if (text == "linear31" || text == "linear_31" || text == "linear") return Form::linear_31;
  if (text == "nonlinear32" || text == "nonlinear_32" || text == "nonlinear") return Form::nonlinear_32;
  if (text == "appendixE" || text == "appendix_e" || text == "appendixe") return Form::appendix_e;
  throw ConfigError("unknown scenario form '" + text + "'");
}

void ScenarioSpec::validate() const {
  if (n < 4) throw ConfigError("scenario needs n >= 4");
  const Index need = std::max(required_columns(treatment_form, true), required_columns(outcome_form, false));
  if (p < need) {
    throw ConfigError("scenario forms need p >= " + std::to_string(need) + "; got " + std::to_string(p));
  }
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ConfigError("sigma2 must be positive");
  if (!std::isfinite(true_tau)) throw ConfigError("true effect must be finite");
}

ScenarioSpec make_scenario(Form form, Index n, Index p, std::uint64_t seed, double sigma2) {
  ScenarioSpec spec;
  spec.name = to_string(form);
  spec.n = n;
  spec.p = p;
  spec.sigma2 = sigma2;
  spec.treatment_form = form;
  spec.outcome_form = form;
  spec.seed = seed;
  return spec;
}

Vector treatment_index(Form form, const Matrix& x) {
  const auto c = [&](Index j) { return x.col(j).array(); };
  switch (form) {
    case Form::linear_31:
      return 0.4 * c(0) + 0.9 * c(1) - 0.4 * c(2) - 0.7 * c(3) - 0.3 * c(4) + 0.6 * c(5);
    case Form::nonlinear_32:
      return 0.3 * c(0).square() + 0.5 * c(0).cube() - 0.3 * c(1).square().square() + 0.4 * c(2).square();
    case Form::appendix_e:
      return 0.7 * c(0).exp() + 0.7 * (0.7 * c(0).square().max(kLogFloor)).log() - 0.8 * c(1).cube() +
             0.7 * c(2).cube() - 0.5 * c(3).cube() - 0.8 * c(4).square();
  }
  return {};
}

Vector outcome_mean(Form form, const Matrix& x) {
  const auto c = [&](Index j) { return x.col(j).array(); };
  switch (form) {
    case Form::linear_31:
      return -2.0 + 0.9 * c(0) - 0.9 * c(1) + 0.2 * c(2) - 0.2 * c(3) + 0.9 * c(6) - 0.9 * c(7);
    case Form::nonlinear_32:
      return -2.0 - 0.5 * c(0) + 0.5 * c(1).square() + 0.4 * c(1).cube() + 0.3 * c(2).square();
    case Form::appendix_e:
      return -2.0 + 0.7 * (0.6 * c(0)).exp() - 0.6 * c(1).cube() + 0.7 * c(2).square();
  }
  return {};
}

Matrix oracle_basis(Form form, const Matrix& x) {
  const auto c = [&](Index j) { return x.col(j).array(); };
  Matrix b;
  switch (form) {
    case Form::linear_31:
      b.resize(x.rows(), 6);
      b << x.col(0), x.col(1), x.col(2), x.col(3), x.col(6), x.col(7);
      break;
    case Form::nonlinear_32:
      b.resize(x.rows(), 4);
      b.col(0) = c(0);
      b.col(1) = c(1).square();
      b.col(2) = c(1).cube();
      b.col(3) = c(2).square();
      break;
    case Form::appendix_e:
      b.resize(x.rows(), 3);
      b.col(0) = (0.6 * c(0)).exp();
      b.col(1) = c(1).cube();
      b.col(2) = c(2).square();
      break;
  }
  return b;
}

Replication generate(const ScenarioSpec& spec, std::uint64_t index) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, index));
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n = spec.n;
  Matrix x(n, spec.p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < spec.p; ++j) x(i, j) = normal(rng);
  }
  const Vector eta = treatment_index(spec.treatment_form, x);
  Treatment w(n);
  for (Index i = 0; i < n; ++i) w[i] = unit_uniform(rng) < inverse_logit(eta[i]) ? 1 : 0;
  const Vector mu = outcome_mean(spec.outcome_form, x);
  const double sigma = std::sqrt(spec.sigma2);
  Vector y(n);
  for (Index i = 0; i < n; ++i) y[i] = mu[i] + spec.true_tau * w[i] + sigma * normal(rng);

  Replication rep;
  rep.true_tau = spec.true_tau;
  rep.oracle_basis = oracle_basis(spec.outcome_form, x);
  rep.data = make_dataset(std::move(y), std::move(w), std::move(x));
  return rep;
}

const EstimatorSummary& SimulationSummary::row(EstimatorId id) const {
  for (const auto& r : rows) {
    if (r.id == id) return r;
  }
  throw ConfigError("estimator '" + estimator_key(id) + "' is not part of this summary");
}

EstimatorSummary summarize(EstimatorId id, const std::vector<ReplicationOutcome>& outcomes, double true_tau,
                           double max_failure_rate, bool keep_replications) {
  EstimatorSummary s;
  s.id = id;
  std::vector<double> taus;
  double se_sum = 0.0, dropped = 0.0;
  int se_count = 0, covered = 0;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++s.n_failed;
      if (s.failures.size() < 5) s.failures.push_back(o.error);
      continue;
    }
    taus.push_back(o.tau_hat);
    dropped += o.n_dropped;
    if (std::isfinite(o.se)) {
      se_sum += o.se;
      ++se_count;
      if (std::abs(o.tau_hat - true_tau) <= kCiMultiplier * o.se) ++covered;
    }
  }
  s.n_ok = static_cast<int>(taus.size());
  const double total = static_cast<double>(outcomes.size());
  if (total > 0 && static_cast<double>(s.n_failed) >= max_failure_rate * total && s.n_failed > 0) {
    throw NumericalError(estimator_key(id) + " failed in " + std::to_string(s.n_failed) + " of " +
                         std::to_string(outcomes.size()) + " replications; first error: " + s.failures.front());
  }
  if (s.n_ok < 2) throw NumericalError(estimator_key(id) + ": fewer than two successful replications");

  const double k = static_cast<double>(s.n_ok);
  double mean = 0.0;
  for (double t : taus) mean += t;
  mean /= k;
  double ss = 0.0, sq_err = 0.0;
  for (double t : taus) {
    ss += (t - mean) * (t - mean);
    sq_err += (t - true_tau) * (t - true_tau);
  }
  s.mean_tau = mean;
  s.abs_bias = std::abs(mean - true_tau);
  s.sd = std::sqrt(ss / (k - 1.0));
  s.mse = sq_err / k;
  s.mean_dropped = dropped / k;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  s.mean_se = se_count > 0 ? se_sum / se_count : nan;
  s.coverage = se_count > 0 ? static_cast<double>(covered) / se_count : nan;
  if (keep_replications) s.tau_hats = std::move(taus);
  return s;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DRMATCH_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SimulationSummary run_study(const ScenarioSpec& spec, const StudyConfig& config) {
  spec.validate();
  if (config.n_reps < 2) throw ConfigError("a study needs at least 2 replications");
  if (config.estimators.empty()) throw ConfigError("no estimators selected");
  const auto start = std::chrono::steady_clock::now();
  const auto n_reps = static_cast<std::size_t>(config.n_reps);
  const std::size_t n_est = config.estimators.size();
  std::vector<std::vector<ReplicationOutcome>> results(n_est, std::vector<ReplicationOutcome>(n_reps));

  std::atomic<std::size_t> next{0};
  std::atomic<int> done{0};
  std::mutex progress_mutex;
  const auto worker = [&] {
    for (std::size_t r = next++; r < n_reps; r = next++) {
      const Replication rep = generate(spec, r);
      const std::uint64_t seed = derive_seed(derive_seed(spec.seed, r), kEstimationStream);
      const EstimationBundle bundle =
          run_estimators(rep.data, config.estimators, config.estimator, seed, &rep.oracle_basis);
      for (std::size_t k = 0; k < n_est; ++k) {
        const EstimatorRun& run = bundle.runs[k];
        ReplicationOutcome& out = results[k][r];
        if (run.estimate) {
          out.ok = std::isfinite(run.estimate->tau_hat);
          out.tau_hat = run.estimate->tau_hat;
          out.se = run.estimate->se;
          out.n_dropped = static_cast<double>(run.estimate->n_dropped);
          if (!out.ok) out.error = "non-finite estimate";
        } else {
          out.error = run.error;
        }
      }
      const int finished = ++done;
      if (config.progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        config.progress(finished, config.n_reps);
      }
    }
  };

  const int threads = std::min<int>(resolve_threads(config.threads), config.n_reps);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SimulationSummary summary;
  summary.scenario = spec;
  summary.n_reps = config.n_reps;
  for (std::size_t k = 0; k < n_est; ++k) {
    summary.rows.push_back(summarize(config.estimators[k], results[k], spec.true_tau, config.max_failure_rate,
                                     config.keep_replications));
  }
  summary.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

std::uint64_t cell_seed(std::uint64_t seed, Index n, Index p) {
  return derive_seed(seed, (static_cast<std::uint64_t>(n) << 32) ^ static_cast<std::uint64_t>(p));
}

std::vector<GridCell> coverage_grid(const std::vector<Index>& n_values, const std::vector<Index>& p_values,
                                    int n_reps, std::uint64_t seed, StudyConfig config) {
  config.estimators = {EstimatorId::drme};
  config.n_reps = n_reps;
  std::vector<GridCell> cells;
  for (Index n : n_values) {
    for (Index p : p_values) {
      const ScenarioSpec spec = make_scenario(Form::linear_31, n, p, cell_seed(seed, n, p));
      cells.push_back({n, p, run_study(spec, config)});
    }
  }
  return cells;
}

std::string to_string(Misspecified which) {
  switch (which) {
    case Misspecified::treatment: return "treatment";
    case Misspecified::outcome: return "outcome";
    case Misspecified::both: return "both";
  }
  return "unknown";
}

Misspecified parse_misspecified(const std::string& text) {
  if (text == "treatment") return Misspecified::treatment;
  if (text == "outcome") return Misspecified::outcome;
  if (text == "both") return Misspecified::both;
  throw ConfigError("misspecification must be treatment, outcome or both; got '" + text + "'");
}

std::vector<GridCell> misspecification_grid(Misspecified which, const std::vector<Index>& n_values,
                                            const std::vector<Index>& p_values, int n_reps, std::uint64_t seed,
                                            StudyConfig config) {
  config.estimators = {EstimatorId::drme, EstimatorId::lasso_dr, EstimatorId::farrell};
  config.n_reps = n_reps;
  std::vector<GridCell> cells;
  for (Index n : n_values) {
    for (Index p : p_values) {
      ScenarioSpec spec = make_scenario(Form::linear_31, n, p, cell_seed(seed, n, p));
      if (which != Misspecified::outcome) spec.treatment_form = Form::nonlinear_32;
      if (which != Misspecified::treatment) spec.outcome_form = Form::nonlinear_32;
      spec.name = "misspecified-" + to_string(which);
      cells.push_back({n, p, run_study(spec, config)});
    }
  }
  return cells;
}

std::vector<RatePoint> rate_curve(const std::vector<GridCell>& cells, EstimatorId id) {
  std::vector<RatePoint> points;
  for (const auto& cell : cells) {
    RatePoint pt;
    pt.n = cell.n;
    pt.p = cell.p;
    pt.abs_bias = cell.summary.row(id).abs_bias;
    pt.log_rate = std::sqrt(std::log(static_cast<double>(cell.p)) / static_cast<double>(cell.n));
    pt.root_rate = 1.0 / std::sqrt(static_cast<double>(cell.n));
    points.push_back(pt);
  }
  return points;
}

}  // namespace drmatch
