#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "cli.hpp"

namespace {

using drmatch::cli::Command;
using drmatch::cli::OutputFormat;
using drmatch::cli::RunConfig;

void add_common(CLI::App& app, RunConfig& config) {
  app.add_option("--estimators,--estimator,-e", config.estimators, "Estimator keys (naive, oracle, outcome-lasso, dps, ipw, "
                                                       "farrell, lasso-dr, psm, pgm, drme)")
      ->delimiter(',');
  app.add_option("--m", config.m, "Matches per unit")->capture_default_str();
  app.add_option("--caliper", config.caliper_sd, "Caliper in score standard deviations")->capture_default_str();
  app.add_flag_callback("--no-caliper", [&config] { config.caliper_sd.reset(); }, "Match without a caliper");
  app.add_option_function<std::string>(
      "--estimand", [&config](const std::string& s) { config.estimand = drmatch::parse_estimand(s); },
      "ate or att");
  app.add_option_function<std::string>(
         "--lambda-rule",
         [&config](const std::string& s) {
           config.lambda_rule = s == "1se" ? drmatch::LambdaRule::one_se : drmatch::LambdaRule::min;
         },
         "Cross-validation rule: min or 1se")
      ->check(CLI::IsMember({"min", "1se"}));
  app.add_option_function<std::string>(
         "--score-scale",
         [&config](const std::string& s) {
           config.score_scale = s == "linear" ? drmatch::ScoreScale::linear : drmatch::ScoreScale::natural;
         },
         "Propensity scale used for matching: natural or linear")
      ->check(CLI::IsMember({"natural", "linear"}));
  app.add_flag("--horvitz-thompson", config.horvitz_thompson, "Unnormalized IPW weights");
  app.add_option("--ipw-trim", config.ipw_trim, "Clamp propensities to [t, 1-t]");
  app.add_flag("--per-arm-outcome", config.per_arm_outcome, "Separate outcome lassos per arm for AIPW");
  app.add_option("--seed", config.seed, "Random seed")->capture_default_str();
  app.add_option("--output,-o", config.output_path, "Output file (default: standard output)");
  app.add_option_function<std::string>(
         "--format",
         [&config](const std::string& s) { config.output_format = s == "json" ? OutputFormat::json : OutputFormat::csv; },
         "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--quiet,-q", config.quiet, "Suppress progress output");
}

void add_data(CLI::App& app, RunConfig& config) {
  app.add_option("--input,-i", config.input_path, "Input CSV with a header row")->required();
  app.add_option("--outcome", config.outcome_col, "Outcome column")->capture_default_str();
  app.add_option("--treatment", config.treatment_col, "Binary treatment column")->capture_default_str();
  app.add_option("--covariates", config.covariate_cols, "Covariate columns (default: all remaining)")
      ->delimiter(',');
  app.add_flag("--svg", config.emit_svg, "Also write a balance plot");
}

void add_study(CLI::App& app, RunConfig& config) {
  app.add_option("--reps", config.n_reps, "Replications")->capture_default_str();
  app.add_option("--threads", config.threads, "Worker threads (default: DRMATCH_THREADS or all cores)");
  app.add_option("--sigma2", config.sigma2, "Noise variance")->capture_default_str();
  app.add_flag("--keep-replications", config.keep_replications, "Include per-replication estimates in JSON");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig config;
  CLI::App app{"Doubly robust matching estimation and simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", drmatch::version());

  std::map<CLI::App*, Command> commands;

  auto* estimate = app.add_subcommand("estimate", "Estimate treatment effects from a CSV file");
  add_data(*estimate, config);
  add_common(*estimate, config);
  commands[estimate] = Command::estimate;

  auto* balance = app.add_subcommand("balance", "Covariate balance before and after score matching");
  add_data(*balance, config);
  add_common(*balance, config);
  commands[balance] = Command::balance;

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study of one scenario");
  add_common(*simulate, config);
  add_study(*simulate, config);
  simulate->add_option("--scenario", config.scenario, "linear31, nonlinear32 or appendixE")->capture_default_str();
  simulate->add_option("--treatment-form", config.treatment_form, "Override the treatment model form");
  simulate->add_option("--outcome-form", config.outcome_form, "Override the outcome model form");
  simulate->add_option("--n", config.n, "Sample size")->capture_default_str();
  simulate->add_option("--p", config.p, "Number of covariates")->capture_default_str();
  commands[simulate] = Command::simulate;

  auto* coverage = app.add_subcommand("coverage", "DRME interval coverage over an (n, p) grid");
  add_common(*coverage, config);
  add_study(*coverage, config);
  coverage->add_option("--n", config.n_values, "Sample sizes")->delimiter(',')->required();
  coverage->add_option("--p", config.p_values, "Covariate counts")->delimiter(',')->required();
  commands[coverage] = Command::coverage;

  auto* grid = app.add_subcommand("grid", "Misspecification grid with bias rate curve");
  add_common(*grid, config);
  add_study(*grid, config);
  grid->add_option("--misspecified", config.misspecified, "treatment, outcome or both")->capture_default_str();
  grid->add_option("--n", config.n_values, "Sample sizes")->delimiter(',')->required();
  grid->add_option("--p", config.p_values, "Covariate counts")->delimiter(',')->required();
  commands[grid] = Command::grid;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const drmatch::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  for (const auto& [sub, command] : commands) {
    if (sub->parsed()) config.command = command;
  }
  return drmatch::cli::run(config, std::cout, std::cerr);
}
