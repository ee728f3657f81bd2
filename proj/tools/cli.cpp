#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace drmatch::cli {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Parses a whole field as a double; empty or malformed fields give nullopt.
std::optional<double> parse_double(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  std::istringstream in(t);
  in.imbue(std::locale::classic());
  double v = 0.0;
  in >> v;
  if (in.fail()) {
    if (t == "nan" || t == "NaN" || t == "NA") return std::nan("");
    if (t == "inf" || t == "Inf") return HUGE_VAL;
    if (t == "-inf" || t == "-Inf") return -HUGE_VAL;
    return std::nullopt;
  }
  in >> std::ws;
  if (!in.eof()) return std::nullopt;
  return v;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

template <typename T>
std::string join_numbers(const std::vector<T>& values) {
  std::vector<std::string> parts;
  for (T v : values) parts.push_back(std::to_string(v));
  return join(parts);
}

std::string row_list(const std::vector<Index>& rows) {
  std::vector<std::string> parts;
  for (std::size_t i = 0; i < rows.size() && i < 10; ++i) parts.push_back(std::to_string(rows[i]));
  std::string out = join(parts, ", ");
  if (rows.size() > 10) out += ", ... (" + std::to_string(rows.size()) + " rows)";
  return out;
}

void write_output(const RunConfig& config, const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty()) {
    out << content;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ConfigError("cannot open output file '" + path + "'");
  file << content;
  if (!file) throw ConfigError("failed writing output file '" + path + "'");
  (void)config;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  return path.empty() ? std::string{} : path + suffix;
}

EstimatorConfig estimator_config(const RunConfig& config) {
  EstimatorConfig ec;
  ec.cv.rule = config.lambda_rule;
  ec.match.m = config.m;
  ec.match.caliper_sd = config.caliper_sd;
  ec.match.estimand = config.estimand;
  ec.ipw.horvitz_thompson = config.horvitz_thompson;
  ec.ipw.trim = config.ipw_trim;
  ec.per_arm_outcome = config.per_arm_outcome;
  ec.score_scale = config.score_scale;
  return ec;
}

std::vector<EstimatorId> selected_estimators(const RunConfig& config, std::vector<EstimatorId> fallback) {
  if (config.estimators.empty()) return fallback;
  std::vector<EstimatorId> ids;
  for (const auto& key : config.estimators) {
    const EstimatorId id = parse_estimator(key);
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  }
  return ids;
}

StudyConfig study_config(const RunConfig& config, std::ostream& err) {
  StudyConfig sc;
  sc.n_reps = config.n_reps;
  sc.threads = config.threads;
  sc.estimator = estimator_config(config);
  sc.keep_replications = config.keep_replications;
  if (!config.quiet) {
    sc.progress = [&err](int done, int total) {
      if (done == total || done % 10 == 0) err << "  replication " << done << "/" << total << '\n';
    };
  }
  return sc;
}

ScenarioSpec scenario_spec(const RunConfig& config) {
  const Form base = parse_form(config.scenario);
  ScenarioSpec spec = make_scenario(base, config.n, config.p, config.seed, config.sigma2);
  if (config.treatment_form) spec.treatment_form = parse_form(*config.treatment_form);
  if (config.outcome_form) spec.outcome_form = parse_form(*config.outcome_form);
  if (spec.treatment_form != spec.outcome_form) {
    spec.name = to_string(spec.treatment_form) + "/" + to_string(spec.outcome_form);
  }
  return spec;
}

void require_arms(const Dataset& data) {
  const Index treated = data.n_treated();
  if (treated < 2 || data.n_control() < 2) {
    throw DataError("each treatment arm needs at least 2 rows; found " + std::to_string(treated) + " treated and " +
                    std::to_string(data.n_control()) + " control");
  }
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

int run_estimate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const Dataset data = parse_input(config.input_path, config);
  require_arms(data);
  std::vector<EstimatorId> defaults;
  for (EstimatorId id : all_estimators()) {
    if (id != EstimatorId::oracle) defaults.push_back(id);
  }
  const std::vector<EstimatorId> ids = selected_estimators(config, defaults);
  if (std::find(ids.begin(), ids.end(), EstimatorId::oracle) != ids.end()) {
    throw ConfigError("the oracle estimator needs the true outcome model and is only available in simulations");
  }
  const EstimationBundle bundle = run_estimators(data, ids, estimator_config(config), config.seed);

  std::vector<EffectEstimate> estimates;
  std::exception_ptr first_failure;
  for (const auto& run : bundle.runs) {
    if (run.estimate) {
      estimates.push_back(*run.estimate);
      print_warnings(run.estimate->warnings, err);
    } else {
      err << "error: " << estimator_key(run.id) << ": " << run.error << '\n';
      if (!first_failure) first_failure = run.failure;
    }
  }
  if (bundle.nuisance.propensity) {
    err << "propensity model: " << bundle.nuisance.propensity->fit.n_nonzero << " nonzero coefficients\n";
  }
  if (bundle.nuisance.prognostic) {
    err << "prognostic model: " << bundle.nuisance.prognostic->fit.n_nonzero << " nonzero coefficients\n";
  }
  if (estimates.empty() && first_failure) std::rethrow_exception(first_failure);

  std::optional<BalanceReport> balance;
  for (EstimatorId id : {EstimatorId::drme, EstimatorId::pgm, EstimatorId::psm}) {
    if (const MatchResult* match = bundle.match_for(id)) {
      balance = balance_report(data, *match);
      break;
    }
  }

  const Provenance prov = provenance(config);
  if (config.output_format == OutputFormat::json) {
    write_output(config, config.output_path,
                 estimates_json(estimates, prov, bundle.errors, balance ? &*balance : nullptr), out);
  } else {
    write_output(config, config.output_path, estimates_csv(estimates, prov), out);
  }
  if (balance) {
    if (!config.output_path.empty()) {
      write_output(config, with_suffix(config.output_path, ".balance.csv"), balance_csv(*balance, prov), out);
    } else if (config.output_format == OutputFormat::csv) {
      out << '\n' << balance_summary_csv(*balance, prov);
    }
    if (config.emit_svg) {
      const std::string path = config.output_path.empty() ? "balance.svg" : config.output_path + ".balance.svg";
      write_output(config, path, balance_svg(*balance), out);
    }
  }
  return 0;
}

int run_balance(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const Dataset data = parse_input(config.input_path, config);
  require_arms(data);
  const EstimatorConfig ec = estimator_config(config);
  const ScoreFit propensity = fit_propensity(data, ec.cv, config.seed);
  const ScoreFit prognostic = fit_prognostic(data, ec.cv, config.seed);
  ScoreSet scores = make_score_set(ScoreChoice::both, &propensity, &prognostic);
  if (config.score_scale == ScoreScale::linear) {
    scores.columns[0].values = predict(propensity.fit, data.x, Scale::linear);
  }
  print_warnings(scores.warnings, err);
  err << "propensity model: " << propensity.fit.n_nonzero << " nonzero coefficients\n";
  err << "prognostic model: " << prognostic.fit.n_nonzero << " nonzero coefficients\n";
  const MatchResult match = build_matches(scores, data.w, ec.match);
  print_warnings(match.warnings, err);
  const EffectiveSample sample = effective_sample(match, data.w);
  if (sample.n_retained == 0) throw DataError("no units within caliper");
  const BalanceReport report = balance_report(data, match);

  const Provenance prov = provenance(config);
  if (config.output_format == OutputFormat::json) {
    write_output(config, config.output_path, balance_json(report, prov), out);
  } else {
    write_output(config, config.output_path, balance_summary_csv(report, prov), out);
    if (!config.output_path.empty()) {
      write_output(config, with_suffix(config.output_path, ".covariates.csv"), balance_csv(report, prov), out);
    }
  }
  if (config.emit_svg) {
    const std::string path = config.output_path.empty() ? "balance.svg" : config.output_path + ".svg";
    write_output(config, path, balance_svg(report), out);
  }
  return 0;
}

int run_simulate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const ScenarioSpec spec = scenario_spec(config);
  StudyConfig sc = study_config(config, err);
  sc.estimators = selected_estimators(config, all_estimators());
  const SimulationSummary summary = run_study(spec, sc);
  const Provenance prov = provenance(config);
  write_output(config, config.output_path,
               config.output_format == OutputFormat::json ? summary_json(summary, prov) : summary_csv(summary, prov),
               out);
  return 0;
}

int run_coverage(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const std::vector<Index> ns = config.n_values.empty() ? std::vector<Index>{config.n} : config.n_values;
  const std::vector<Index> ps = config.p_values.empty() ? std::vector<Index>{config.p} : config.p_values;
  const std::vector<GridCell> cells = coverage_grid(ns, ps, config.n_reps, config.seed, study_config(config, err));
  const Provenance prov = provenance(config);
  write_output(config, config.output_path,
               config.output_format == OutputFormat::json ? grid_json(cells, prov) : grid_csv(cells, prov), out);
  return 0;
}

int run_grid(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const std::vector<Index> ns = config.n_values.empty() ? std::vector<Index>{config.n} : config.n_values;
  const std::vector<Index> ps = config.p_values.empty() ? std::vector<Index>{config.p} : config.p_values;
  const Misspecified which = parse_misspecified(config.misspecified);
  const std::vector<GridCell> cells =
      misspecification_grid(which, ns, ps, config.n_reps, config.seed, study_config(config, err));
  const Provenance prov = provenance(config);
  const std::vector<RatePoint> rates = rate_curve(cells);
  if (config.output_format == OutputFormat::json) {
    write_output(config, config.output_path, grid_json(cells, prov), out);
  } else {
    write_output(config, config.output_path, grid_csv(cells, prov), out);
  }
  if (config.output_path.empty()) {
    out << '\n' << rate_csv(rates, prov);
  } else {
    write_output(config, with_suffix(config.output_path, ".rate.csv"), rate_csv(rates, prov), out);
  }
  return 0;
}

}  // namespace

std::string to_string(Command command) {
  switch (command) {
    case Command::estimate: return "estimate";
    case Command::simulate: return "simulate";
    case Command::coverage: return "coverage";
    case Command::grid: return "grid";
    case Command::balance: return "balance";
  }
  return "unknown";
}

void RunConfig::validate() const {
  const bool needs_input = command == Command::estimate || command == Command::balance;
  if (needs_input && input_path.empty()) throw ConfigError(to_string(command) + " requires --input");
  if (m < 1) throw ConfigError("--m must be at least 1");
  if (caliper_sd && !(*caliper_sd > 0.0)) throw ConfigError("--caliper must be positive");
  if (!needs_input) {
    if (n_reps < 2) throw ConfigError("--reps must be at least 2");
    if (n < 4 || p < 1) throw ConfigError("--n must be at least 4 and --p at least 1");
    if (!(sigma2 > 0.0)) throw ConfigError("--sigma2 must be positive");
    parse_form(scenario);
  }
  if (command == Command::grid) parse_misspecified(misspecified);
  for (const auto& key : estimators) parse_estimator(key);
}

Dataset parse_input(const std::string& path, const RunConfig& config) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open input file '" + path + "'");

  std::string line;
  if (!std::getline(file, line)) throw DataError("input file '" + path + "' is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  std::map<std::string, std::size_t> position;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (!position.emplace(header[k], k).second) throw DataError("duplicate column '" + header[k] + "'");
  }
  const auto column = [&](const std::string& name) {
    const auto it = position.find(name);
    if (it == position.end()) throw DataError("missing column '" + name + "'");
    return it->second;
  };
  const std::size_t y_col = column(config.outcome_col);
  const std::size_t w_col = column(config.treatment_col);
  std::vector<std::size_t> x_cols;
  std::vector<std::string> names;
  if (config.covariate_cols.empty()) {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (k != y_col && k != w_col) {
        x_cols.push_back(k);
        names.push_back(header[k]);
      }
    }
  } else {
    for (const auto& name : config.covariate_cols) {
      x_cols.push_back(column(name));
      names.push_back(name);
    }
  }
  if (x_cols.empty()) throw DataError("no covariate columns");

  std::vector<double> ys;
  std::vector<int> ws;
  std::vector<double> xs;
  std::vector<Index> non_finite;
  Index row = 0;
  while (std::getline(file, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    const std::string w_text = trim(fields[w_col]);
    if (w_text != "0" && w_text != "1") {
      const auto v = parse_double(w_text);
      if (!v || (*v != 0.0 && *v != 1.0)) {
        throw DataError("row " + std::to_string(row) + ": treatment value '" + w_text + "' is not 0 or 1");
      }
      ws.push_back(*v == 1.0 ? 1 : 0);
    } else {
      ws.push_back(w_text == "1" ? 1 : 0);
    }
    bool finite = true;
    const auto numeric = [&](std::size_t k) {
      const auto v = parse_double(fields[k]);
      if (!v) {
        if (trim(fields[k]).empty()) {
          finite = false;
          return 0.0;
        }
        throw DataError("row " + std::to_string(row) + ": column '" + header[k] + "' value '" + trim(fields[k]) +
                        "' is not numeric");
      }
      if (!std::isfinite(*v)) finite = false;
      return *v;
    };
    ys.push_back(numeric(y_col));
    for (std::size_t k : x_cols) xs.push_back(numeric(k));
    if (!finite) non_finite.push_back(row);
  }
  if (row == 0) throw DataError("no data rows");
  if (!non_finite.empty()) throw DataError("non-finite or missing values in rows: " + row_list(non_finite));

  const Index n = row;
  const auto p = static_cast<Index>(x_cols.size());
  Vector y = Eigen::Map<Vector>(ys.data(), n);
  Treatment w = Eigen::Map<Eigen::VectorXi>(ws.data(), n);
  Matrix x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(xs.data(), n, p);
  return make_dataset(std::move(y), std::move(w), std::move(x), std::move(names));
}

Provenance provenance(const RunConfig& config) {
  Provenance p;
  p.emplace_back("command", to_string(config.command));
  p.emplace_back("seed", std::to_string(config.seed));
  const bool data_command = config.command == Command::estimate || config.command == Command::balance;
  if (data_command) {
    p.emplace_back("input", config.input_path);
    p.emplace_back("outcome", config.outcome_col);
    p.emplace_back("treatment", config.treatment_col);
    p.emplace_back("covariates", config.covariate_cols.empty() ? "all remaining" : join(config.covariate_cols, ";"));
  } else {
    p.emplace_back("scenario", config.scenario);
    if (config.treatment_form) p.emplace_back("treatment_form", *config.treatment_form);
    if (config.outcome_form) p.emplace_back("outcome_form", *config.outcome_form);
    p.emplace_back("reps", std::to_string(config.n_reps));
    p.emplace_back("sigma2", format_number(config.sigma2));
    if (config.command == Command::simulate || config.n_values.empty()) p.emplace_back("n", std::to_string(config.n));
    if (config.command == Command::simulate || config.p_values.empty()) p.emplace_back("p", std::to_string(config.p));
    if (!config.n_values.empty() && config.command != Command::simulate) {
      p.emplace_back("n_values", join_numbers(config.n_values));
    }
    if (!config.p_values.empty() && config.command != Command::simulate) {
      p.emplace_back("p_values", join_numbers(config.p_values));
    }
    if (config.command == Command::grid) p.emplace_back("misspecified", config.misspecified);
  }
  p.emplace_back("estimators", config.estimators.empty() ? "default" : join(config.estimators, ";"));
  p.emplace_back("m", std::to_string(config.m));
  p.emplace_back("caliper_sd", config.caliper_sd ? format_number(*config.caliper_sd) : "none");
  p.emplace_back("estimand", to_string(config.estimand));
  p.emplace_back("lambda_rule", config.lambda_rule == LambdaRule::min ? "min" : "1se");
  p.emplace_back("score_scale", config.score_scale == ScoreScale::natural ? "natural" : "linear");
  p.emplace_back("ipw", config.horvitz_thompson ? "horvitz-thompson" : "hajek");
  if (config.ipw_trim) p.emplace_back("ipw_trim", format_number(*config.ipw_trim));
  p.emplace_back("outcome_model", config.per_arm_outcome ? "per-arm" : "additive");
  return p;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    config.validate();
    switch (config.command) {
      case Command::estimate: return run_estimate(config, out, err);
      case Command::balance: return run_balance(config, out, err);
      case Command::simulate: return run_simulate(config, out, err);
      case Command::coverage: return run_coverage(config, out, err);
      case Command::grid: return run_grid(config, out, err);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}

}  // namespace drmatch::cli
