#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>
#include <sys/wait.h>
#include <unistd.h>

#include "cli.hpp"
#include "oracles.hpp"

using namespace drmatch;
using drmatch::cli::Command;
using drmatch::cli::OutputFormat;
using drmatch::cli::RunConfig;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / ("drmatch_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path path = scratch_dir() / name;
  std::ofstream(path) << text;
  return path;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Simulated linear-scenario data with columns y, w, x1..xp.
fs::path simulated_csv(const std::string& name, Index n, Index p, std::uint64_t seed) {
  const Replication r = generate(make_scenario(Form::linear_31, n, p, seed), 0);
  std::ostringstream out;
  out << "y,w";
  for (Index j = 0; j < p; ++j) out << ",x" << j + 1;
  out << '\n';
  out.precision(17);
  for (Index i = 0; i < n; ++i) {
    out << r.data.y[i] << ',' << r.data.w[i];
    for (Index j = 0; j < p; ++j) out << ',' << r.data.x.values()(i, j);
    out << '\n';
  }
  return write_file(name, out.str());
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_config(const RunConfig& config) {
  std::ostringstream out, err;
  const int code = drmatch::cli::run(config, out, err);
  return {code, out.str(), err.str()};
}

std::string strip_comments(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '#') out << line << '\n';
  }
  return out.str();
}

}  // namespace

TEST_CASE("parse_input reads a small well-formed file") {
  const fs::path path = write_file("three.csv", "y,w,a,b\n1.5,1,0.1,2\n0.5,0,0.2,3\n-1,1,0.3,\"4\"\n");
  RunConfig config;
  config.input_path = path.string();
  const Dataset data = drmatch::cli::parse_input(path.string(), config);
  CHECK(data.size() == 3);
  CHECK(data.covariate_names == std::vector<std::string>{"a", "b"});
  CHECK(data.y[2] == -1.0);
  CHECK(data.w[1] == 0);
  CHECK(data.x.values()(2, 1) == 4.0);

  config.covariate_cols = {"b"};
  CHECK(drmatch::cli::parse_input(path.string(), config).covariate_names == std::vector<std::string>{"b"});
}

TEST_CASE("parse_input errors name the problem") {
  RunConfig config;
  const auto message = [&](const std::string& text) -> std::string {
    const fs::path path = write_file("bad.csv", text);
    try {
      drmatch::cli::parse_input(path.string(), config);
    } catch (const DataError& e) {
      return e.what();
    }
    return "";
  };
  std::string rows = "y,w,x\n";
  for (int i = 1; i <= 6; ++i) rows += std::to_string(i) + "," + std::to_string(i % 2) + ",0.5\n";
  CHECK(message(rows + "7,2,0.1\n").find("row 7") != std::string::npos);
  CHECK(message(rows + "7,2,0.1\n").find("treatment value '2'") != std::string::npos);
  CHECK(message("y,w,x\n") == "no data rows");
  CHECK(message("y,z,x\n1,1,1\n") == "missing column 'w'");
  CHECK(message("y,w,x\n1,1,abc\n").find("row 1") != std::string::npos);
  CHECK(message("y,w,x\n1,1,nan\n2,0,1\n3,1,inf\n") == "non-finite or missing values in rows: 1, 3");
  CHECK(message("y,w,x\n1,1\n").find("row 1") != std::string::npos);
  CHECK(message("y,w,x,x\n1,1,1,1\n").find("duplicate column") != std::string::npos);
  config.covariate_cols = {"q"};
  CHECK(message("y,w,x\n1,1,1\n") == "missing column 'q'");
}

TEST_CASE("too few rows per arm is a data error at estimation") {
  const fs::path path = write_file("thin.csv", "y,w,x\n1,1,0.1\n2,0,0.2\n3,0,0.4\n");
  RunConfig config;
  config.input_path = path.string();
  const Result r = run_config(config);
  CHECK(r.code == 2);
  CHECK(r.err.find("at least 2 rows") != std::string::npos);
}

TEST_CASE("estimate writes every default estimator and a balance summary") {
  const fs::path path = simulated_csv("est.csv", 150, 12, 3);
  RunConfig config;
  config.input_path = path.string();
  config.quiet = true;
  const Result r = run_config(config);
  REQUIRE(r.code == 0);
  const std::string body = strip_comments(r.out);
  CHECK(body.find("estimator,estimand,tau_hat") != std::string::npos);
  for (const char* key : {"naive,", "outcome-lasso,", "dps,", "ipw,", "farrell,", "lasso-dr,", "psm,", "pgm,", "drme,"}) {
    CHECK(body.find(std::string("\n") + key) != std::string::npos);
  }
  CHECK(body.find("\noracle,") == std::string::npos);
  CHECK(body.find("stage,mean,unbalanced_mean,maximum") != std::string::npos);
  CHECK(r.out.find("# seed=1") != std::string::npos);
  CHECK(r.out.find("# drmatch " + version()) != std::string::npos);

  // Identical runs give identical reports.
  CHECK(run_config(config).out == r.out);
}

TEST_CASE("estimate with ATT writes JSON plus balance files") {
  const fs::path path = simulated_csv("att.csv", 150, 10, 4);
  const fs::path out_path = scratch_dir() / "att.json";
  RunConfig config;
  config.input_path = path.string();
  config.estimators = {"drme"};
  config.estimand = Estimand::att;
  config.output_format = OutputFormat::json;
  config.output_path = out_path.string();
  config.emit_svg = true;
  config.quiet = true;
  const Result r = run_config(config);
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(read_file(out_path));
  REQUIRE(j["estimates"].size() == 1);
  CHECK(j["estimates"][0]["estimator"] == "drme");
  CHECK(j["estimates"][0]["estimand"] == "ATT");
  CHECK(j["balance"]["covariates"].size() == 10);
  CHECK(j["provenance"]["estimand"] == "ATT");
  CHECK(fs::exists(out_path.string() + ".balance.csv"));
  CHECK(read_file(out_path.string() + ".balance.csv").find("covariate,asmd_before,asmd_after") !=
        std::string::npos);
  CHECK(read_file(out_path.string() + ".balance.svg").rfind("<svg", 0) == 0);
}

TEST_CASE("balance command gives the summary table") {
  const fs::path path = simulated_csv("bal.csv", 200, 8, 5);
  RunConfig config;
  config.command = Command::balance;
  config.input_path = path.string();
  config.quiet = true;
  const Result r = run_config(config);
  REQUIRE(r.code == 0);
  CHECK(strip_comments(r.out).rfind("stage,mean,unbalanced_mean,maximum\nbefore,", 0) == 0);
  config.output_format = OutputFormat::json;
  const auto j = nlohmann::json::parse(run_config(config).out);
  CHECK(j["covariates"].size() == 8);
  CHECK(j.contains("before"));
}

TEST_CASE("simulate writes one row per estimator") {
  RunConfig config;
  config.command = Command::simulate;
  config.n = 80;
  config.p = 20;
  config.n_reps = 3;
  config.seed = 7;
  config.threads = 1;
  config.quiet = true;
  const Result r = run_config(config);
  REQUIRE(r.code == 0);
  const std::string body = strip_comments(r.out);
  CHECK(std::count(body.begin(), body.end(), '\n') == 11);
  CHECK(body.find("\noracle,") != std::string::npos);
  CHECK(run_config(config).out == r.out);
  config.threads = 2;
  CHECK(run_config(config).out == r.out);
}

TEST_CASE("coverage and grid commands") {
  RunConfig config;
  config.command = Command::coverage;
  config.n_values = {60};
  config.p_values = {10, 12};
  config.n_reps = 2;
  config.threads = 1;
  config.quiet = true;
  const Result cov = run_config(config);
  REQUIRE(cov.code == 0);
  CHECK(strip_comments(cov.out).find("\n60,12,linear31,") != std::string::npos);

  config.command = Command::grid;
  config.misspecified = "outcome";
  const Result grid = run_config(config);
  REQUIRE(grid.code == 0);
  CHECK(grid.out.find("n,p,abs_bias,sqrt_log_p_over_n,inv_sqrt_n") != std::string::npos);
}

TEST_CASE("configuration errors map to exit code 1") {
  RunConfig config;
  CHECK(run_config(config).code == 1);  // estimate without input
  config.input_path = simulated_csv("cfg.csv", 40, 8, 6).string();
  config.estimators = {"oracle"};
  CHECK(run_config(config).code == 1);
  config.estimators = {"unknown"};
  const Result bad = run_config(config);
  CHECK(bad.code == 1);
  CHECK_FALSE(bad.err.empty());
  config.estimators = {};
  config.m = 0;
  CHECK(run_config(config).code == 1);
  config.m = 1;
  config.caliper_sd = -1.0;
  CHECK(run_config(config).code == 1);

  RunConfig sim;
  sim.command = Command::simulate;
  sim.n_reps = 1;
  CHECK(run_config(sim).code == 1);
  sim.n_reps = 2;
  sim.p = 5;
  CHECK(run_config(sim).code == 1);
}

TEST_CASE("missing input file is a data error") {
  RunConfig config;
  config.input_path = (scratch_dir() / "absent.csv").string();
  CHECK(run_config(config).code == 2);
}

TEST_CASE("provenance echoes the configuration") {
  RunConfig config;
  config.command = Command::simulate;
  config.seed = 42;
  const Provenance p = drmatch::cli::provenance(config);
  bool seed = false, command = false;
  for (const auto& [k, v] : p) {
    if (k == "seed" && v == "42") seed = true;
    if (k == "command" && v == "simulate") command = true;
  }
  CHECK(seed);
  CHECK(command);
}

#ifdef DRMATCH_CLI_PATH
TEST_CASE("executable exit codes") {
  const fs::path data = simulated_csv("exe.csv", 60, 8, 8);
  const fs::path log = scratch_dir() / "exe.log";
  const auto status = [&](const std::string& args) {
    const std::string cmd = std::string(DRMATCH_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status("--version") == 0);
  CHECK(read_file(log).find(version()) != std::string::npos);
  CHECK(status("estimate --input " + data.string() + " -e drme,naive -q") == 0);
  CHECK(read_file(log).find("\ndrme,") != std::string::npos);
  CHECK(status("estimate --input " + data.string() + " --estimator drme --estimand att --format json -q") == 0);
  CHECK(status("estimate") == 1);
  CHECK(status("estimate --input " + data.string() + " --bogus") == 1);
  CHECK(status("estimate --input " + data.string() + " --estimand sideways") == 1);
  CHECK(status("estimate --input " + (scratch_dir() / "absent.csv").string()) == 2);
  CHECK(status("simulate --n 40 --p 10 --reps 2 -e naive,drme -q --threads 1") == 0);
  CHECK(status("coverage --n 40 --p 10 --reps 2 -q --threads 1") == 0);
  CHECK(status("grid --n 40 --p 10 --reps 2 --misspecified both -q --threads 1") == 0);
}
#endif
