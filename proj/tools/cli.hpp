#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <drmatch/drmatch.hpp>

namespace drmatch::cli {

enum class Command { estimate, simulate, coverage, grid, balance };
enum class OutputFormat { csv, json };

std::string to_string(Command command);

struct RunConfig {
  Command command = Command::estimate;

  // estimate / balance
  std::string input_path;
  std::string outcome_col = "y";
  std::string treatment_col = "w";
  std::vector<std::string> covariate_cols;  // empty: every remaining column

  std::vector<std::string> estimators;  // empty: command default
  int m = 1;
  std::optional<double> caliper_sd = 0.5;
  Estimand estimand = Estimand::ate;
  LambdaRule lambda_rule = LambdaRule::min;
  ScoreScale score_scale = ScoreScale::natural;
  bool horvitz_thompson = false;
  std::optional<double> ipw_trim;
  bool per_arm_outcome = false;
  std::uint64_t seed = 1;

  // simulate / coverage / grid
  int n_reps = 100;
  Index n = 200;
  Index p = 1000;
  double sigma2 = 1.0;
  std::string scenario = "linear31";
  std::optional<std::string> treatment_form;
  std::optional<std::string> outcome_form;
  std::vector<Index> n_values;
  std::vector<Index> p_values;
  std::string misspecified = "treatment";
  bool keep_replications = false;
  int threads = 0;

  std::string output_path;  // empty: standard output
  OutputFormat output_format = OutputFormat::csv;
  bool emit_svg = false;
  bool quiet = false;

  void validate() const;
};

/// Reads a CSV with a header row into a Dataset. Errors name the offending
/// data row (1-based, header excluded). Arm sizes are checked by the
/// commands that estimate, so a file with a single treated row still parses.
Dataset parse_input(const std::string& path, const RunConfig& config);

/// Config echo embedded in every report.
Provenance provenance(const RunConfig& config);

/// Executes the command. Reports go to `output_path` or `out`; diagnostics go
/// to `err`. Returns the process exit code: 0 success, 1 usage error, 2 data
/// error, 3 numerical failure.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace drmatch::cli
