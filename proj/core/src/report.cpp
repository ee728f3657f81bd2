#include "drmatch/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

#include <nlohmann/json.hpp>

namespace drmatch {

using nlohmann::ordered_json;

namespace {

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_row(std::ostringstream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out << ',';
    out << csv_field(fields[i]);
  }
  out << '\n';
}

void write_provenance(std::ostringstream& out, const Provenance& provenance) {
  out << "# drmatch " << version() << '\n';
  for (const auto& [key, value] : provenance) out << "# " << key << '=' << value << '\n';
}

ordered_json provenance_json(const Provenance& provenance) {
  ordered_json p = ordered_json::object();
  p["version"] = version();
  for (const auto& [key, value] : provenance) p[key] = value;
  return p;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

ordered_json metadata(double runtime_seconds = std::nan("")) {
  ordered_json m;
  m["generated_at"] = utc_timestamp();
  if (std::isfinite(runtime_seconds)) m["runtime_seconds"] = runtime_seconds;
  return m;
}

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json estimate_json(const EffectEstimate& e) {
  ordered_json j;
  j["estimator"] = e.name;
  j["estimand"] = to_string(e.estimand);
  j["tau_hat"] = number(e.tau_hat);
  j["variance"] = number(e.variance);
  j["se"] = number(e.se);
  j["ci_lower"] = number(e.ci_lower);
  j["ci_upper"] = number(e.ci_upper);
  j["n_used"] = e.n_used;
  j["n_dropped"] = e.n_dropped;
  j["approximate_se"] = e.approximate_se;
  ordered_json d = ordered_json::object();
  for (const auto& [k, v] : e.diagnostics) d[k] = v;
  j["diagnostics"] = d;
  j["warnings"] = e.warnings;
  return j;
}

ordered_json balance_object(const BalanceReport& report) {
  ordered_json j;
  j["threshold"] = report.threshold;
  j["n_unbalanced"] = report.n_unbalanced;
  const auto summary = [](const BalanceSummary& s) {
    ordered_json o;
    o["mean"] = number(s.mean);
    o["unbalanced_mean"] = number(s.unbalanced_mean);
    o["maximum"] = number(s.max);
    return o;
  };
  j["before"] = summary(report.before);
  j["after"] = summary(report.after);
  ordered_json rows = ordered_json::array();
  for (const auto& c : report.covariates) {
    rows.push_back({{"covariate", c.name}, {"asmd_before", number(c.before)}, {"asmd_after", number(c.after)}});
  }
  j["covariates"] = rows;
  return j;
}

ordered_json scenario_json(const ScenarioSpec& s) {
  ordered_json j;
  j["name"] = s.name;
  j["n"] = s.n;
  j["p"] = s.p;
  j["sigma2"] = s.sigma2;
  j["true_tau"] = s.true_tau;
  j["treatment_form"] = to_string(s.treatment_form);
  j["outcome_form"] = to_string(s.outcome_form);
  j["seed"] = s.seed;
  return j;
}

ordered_json summary_rows_json(const SimulationSummary& summary) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : summary.rows) {
    ordered_json j;
    j["estimator"] = estimator_key(r.id);
    j["label"] = estimator_label(r.id);
    j["abs_bias"] = number(r.abs_bias);
    j["sd"] = number(r.sd);
    j["mse"] = number(r.mse);
    j["mean_se"] = number(r.mean_se);
    j["coverage_95"] = number(r.coverage);
    j["mean_tau"] = number(r.mean_tau);
    j["mean_dropped"] = number(r.mean_dropped);
    j["n_ok"] = r.n_ok;
    j["n_failed"] = r.n_failed;
    j["failures"] = r.failures;
    if (!r.tau_hats.empty()) j["tau_hats"] = r.tau_hats;
    rows.push_back(j);
  }
  return rows;
}

std::vector<std::string> summary_fields(const EstimatorSummary& r) {
  return {estimator_key(r.id),        estimator_label(r.id),     format_number(r.abs_bias),
          format_number(r.sd),        format_number(r.mse),      format_number(r.mean_se),
          format_number(r.coverage),  format_number(r.mean_tau), format_number(r.mean_dropped),
          std::to_string(r.n_ok),     std::to_string(r.n_failed)};
}

const std::vector<std::string> kSummaryHeader = {"estimator", "label",    "abs_bias",     "sd",   "mse",     "mean_se",
                                                 "coverage_95", "mean_tau", "mean_dropped", "n_ok", "n_failed"};

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.6g", value);
  return buffer;
}

std::string estimates_csv(const std::vector<EffectEstimate>& estimates, const Provenance& provenance) {
  std::ostringstream out;
  write_provenance(out, provenance);
  write_row(out, {"estimator", "estimand", "tau_hat", "se", "ci_lower", "ci_upper", "n_used", "n_dropped",
                  "approximate_se"});
  for (const auto& e : estimates) {
    write_row(out, {e.name, to_string(e.estimand), format_number(e.tau_hat), format_number(e.se),
                    format_number(e.ci_lower), format_number(e.ci_upper), std::to_string(e.n_used),
                    std::to_string(e.n_dropped), e.approximate_se ? "true" : "false"});
  }
  return out.str();
}

std::string estimates_json(const std::vector<EffectEstimate>& estimates, const Provenance& provenance,
                           const std::vector<std::string>& errors, const BalanceReport* balance) {
  ordered_json j;
  j["provenance"] = provenance_json(provenance);
  ordered_json list = ordered_json::array();
  for (const auto& e : estimates) list.push_back(estimate_json(e));
  j["estimates"] = list;
  j["errors"] = errors;
  if (balance != nullptr) j["balance"] = balance_object(*balance);
  j["metadata"] = metadata();
  return j.dump(2) + "\n";
}

std::string balance_csv(const BalanceReport& report, const Provenance& provenance) {
  std::ostringstream out;
  write_provenance(out, provenance);
  write_row(out, {"covariate", "asmd_before", "asmd_after"});
  for (const auto& c : report.covariates) {
    write_row(out, {c.name, format_number(c.before), format_number(c.after)});
  }
  return out.str();
}

std::string balance_summary_csv(const BalanceReport& report, const Provenance& provenance) {
  std::ostringstream out;
  write_provenance(out, provenance);
  out << "# threshold=" << format_number(report.threshold) << " unbalanced_covariates=" << report.n_unbalanced
      << '\n';
  write_row(out, {"stage", "mean", "unbalanced_mean", "maximum"});
  write_row(out, {"before", format_number(report.before.mean), format_number(report.before.unbalanced_mean),
                  format_number(report.before.max)});
  write_row(out, {"after", format_number(report.after.mean), format_number(report.after.unbalanced_mean),
                  format_number(report.after.max)});
  return out.str();
}

std::string balance_json(const BalanceReport& report, const Provenance& provenance) {
  ordered_json j;
  j["provenance"] = provenance_json(provenance);
  j.update(balance_object(report));
  j["metadata"] = metadata();
  return j.dump(2) + "\n";
}

std::string summary_csv(const SimulationSummary& summary, const Provenance& provenance) {
  std::ostringstream out;
  write_provenance(out, provenance);
  const ScenarioSpec& s = summary.scenario;
  out << "# scenario=" << s.name << " n=" << s.n << " p=" << s.p << " sigma2=" << format_number(s.sigma2)
      << " treatment_form=" << to_string(s.treatment_form) << " outcome_form=" << to_string(s.outcome_form)
      << " seed=" << s.seed << " reps=" << summary.n_reps << '\n';
  write_row(out, kSummaryHeader);
  for (const auto& r : summary.rows) write_row(out, summary_fields(r));
  return out.str();
}

std::string summary_json(const SimulationSummary& summary, const Provenance& provenance) {
  ordered_json j;
  j["provenance"] = provenance_json(provenance);
  j["scenario"] = scenario_json(summary.scenario);
  j["n_reps"] = summary.n_reps;
  j["estimators"] = summary_rows_json(summary);
  j["metadata"] = metadata(summary.runtime_seconds);
  return j.dump(2) + "\n";
}

std::string grid_csv(const std::vector<GridCell>& cells, const Provenance& provenance) {
  std::ostringstream out;
  write_provenance(out, provenance);
  std::vector<std::string> header = {"n", "p", "scenario", "seed", "reps"};
  header.insert(header.end(), kSummaryHeader.begin(), kSummaryHeader.end());
  write_row(out, header);
  for (const auto& cell : cells) {
    for (const auto& r : cell.summary.rows) {
      std::vector<std::string> fields = {std::to_string(cell.n), std::to_string(cell.p), cell.summary.scenario.name,
                                         std::to_string(cell.summary.scenario.seed),
                                         std::to_string(cell.summary.n_reps)};
      const auto rest = summary_fields(r);
      fields.insert(fields.end(), rest.begin(), rest.end());
      write_row(out, fields);
    }
  }
  return out.str();
}

std::string grid_json(const std::vector<GridCell>& cells, const Provenance& provenance) {
  ordered_json j;
  j["provenance"] = provenance_json(provenance);
  ordered_json list = ordered_json::array();
  double runtime = 0.0;
  for (const auto& cell : cells) {
    ordered_json c;
    c["n"] = cell.n;
    c["p"] = cell.p;
    c["scenario"] = scenario_json(cell.summary.scenario);
    c["n_reps"] = cell.summary.n_reps;
    c["estimators"] = summary_rows_json(cell.summary);
    list.push_back(c);
    runtime += cell.summary.runtime_seconds;
  }
  j["cells"] = list;
  j["metadata"] = metadata(runtime);
  return j.dump(2) + "\n";
}

std::string rate_csv(const std::vector<RatePoint>& points, const Provenance& provenance) {
  std::ostringstream out;
  write_provenance(out, provenance);
  write_row(out, {"n", "p", "abs_bias", "sqrt_log_p_over_n", "inv_sqrt_n"});
  for (const auto& pt : points) {
    write_row(out, {std::to_string(pt.n), std::to_string(pt.p), format_number(pt.abs_bias),
                    format_number(pt.log_rate), format_number(pt.root_rate)});
  }
  return out.str();
}

}  // namespace drmatch
