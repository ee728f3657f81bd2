#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "drmatch/estimators.hpp"
#include "drmatch/types.hpp"

namespace drmatch {

enum class Form { linear_31, nonlinear_32, appendix_e };

std::string to_string(Form form);
/// Accepts "linear31", "nonlinear32", "appendixE" and the underscored forms.
Form parse_form(const std::string& text);

struct ScenarioSpec {
  std::string name = "linear31";
  Index n = 200;
  Index p = 1000;
  double sigma2 = 1.0;
  double true_tau = 1.0;
  Form treatment_form = Form::linear_31;
  Form outcome_form = Form::linear_31;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Scenario with the same form for treatment and outcome.
ScenarioSpec make_scenario(Form form, Index n, Index p, std::uint64_t seed, double sigma2 = 1.0);

struct Replication {
  Dataset data;
  double true_tau = 1.0;
  // True outcome regressors for the oracle estimator.
  Matrix oracle_basis;
};

/// Draws replication `index`. The stream depends only on (spec.seed, index).
Replication generate(const ScenarioSpec& spec, std::uint64_t index);

/// Linear predictor of the treatment model and mean of Y(0).
Vector treatment_index(Form form, const Matrix& x);
Vector outcome_mean(Form form, const Matrix& x);
Matrix oracle_basis(Form form, const Matrix& x);

struct StudyConfig {
  std::vector<EstimatorId> estimators = all_estimators();
  int n_reps = 100;
  // 0 means DRMATCH_THREADS or the hardware concurrency.
  int threads = 0;
  EstimatorConfig estimator;
  bool keep_replications = false;
  // A study fails if any estimator fails on at least this share of replications.
  double max_failure_rate = 0.01;
  // Called after each finished replication with (done, total).
  std::function<void(int, int)> progress;
};

struct EstimatorSummary {
  EstimatorId id = EstimatorId::drme;
  int n_ok = 0;
  int n_failed = 0;
  double mean_tau = 0.0;
  double abs_bias = 0.0;
  double sd = 0.0;
  double mse = 0.0;
  // NaN when the estimator has no finite standard errors.
  double mean_se = 0.0;
  double coverage = 0.0;
  double mean_dropped = 0.0;
  std::vector<double> tau_hats;
  std::vector<std::string> failures;
};

struct SimulationSummary {
  ScenarioSpec scenario;
  int n_reps = 0;
  std::vector<EstimatorSummary> rows;
  double runtime_seconds = 0.0;

  const EstimatorSummary& row(EstimatorId id) const;
};

/// Collected per-replication results of one estimator.
struct ReplicationOutcome {
  bool ok = false;
  double tau_hat = 0.0;
  double se = 0.0;
  double n_dropped = 0.0;
  std::string error;
};

/// Summary statistics from a full vector of outcomes. Throws NumericalError
/// when failures reach `max_failure_rate`.
EstimatorSummary summarize(EstimatorId id, const std::vector<ReplicationOutcome>& outcomes, double true_tau,
                           double max_failure_rate, bool keep_replications);

/// Number of worker threads: `requested` if positive, else DRMATCH_THREADS,
/// else the hardware concurrency.
int resolve_threads(int requested);

/// Monte Carlo study; results do not depend on the thread count.
SimulationSummary run_study(const ScenarioSpec& spec, const StudyConfig& config);

struct GridCell {
  Index n = 0;
  Index p = 0;
  SimulationSummary summary;
};

/// Linear scenario, DRME only, over every (n, p) pair.
std::vector<GridCell> coverage_grid(const std::vector<Index>& n_values, const std::vector<Index>& p_values,
                                    int n_reps, std::uint64_t seed, StudyConfig config = {});

enum class Misspecified { treatment, outcome, both };
std::string to_string(Misspecified which);
Misspecified parse_misspecified(const std::string& text);

/// The misspecified model uses the nonlinear form, the other the linear one.
/// Compares DRME, lasso DR and the refit AIPW.
std::vector<GridCell> misspecification_grid(Misspecified which, const std::vector<Index>& n_values,
                                            const std::vector<Index>& p_values, int n_reps, std::uint64_t seed,
                                            StudyConfig config = {});

struct RatePoint {
  Index n = 0;
  Index p = 0;
  double abs_bias = 0.0;
  double log_rate = 0.0;   // sqrt(log P / N)
  double root_rate = 0.0;  // 1 / sqrt(N)
};

std::vector<RatePoint> rate_curve(const std::vector<GridCell>& cells, EstimatorId id = EstimatorId::drme);

/// Seed of the grid cell (n, p) derived from the study seed.
std::uint64_t cell_seed(std::uint64_t seed, Index n, Index p);

}  // namespace drmatch
