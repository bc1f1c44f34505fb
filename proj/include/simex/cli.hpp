#pragma once

#include <cstdint>
#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "simex/bandwidth.hpp"
#include "simex/errors.hpp"
#include "simex/simex.hpp"

namespace simex::cli {

enum class Command { fit, link, mc, cv, generate };
enum class OutputFormat { csv, json };

std::string to_string(Command c);
Command command_from_string(const std::string& s);
std::string to_string(OutputFormat f);
OutputFormat output_format_from_string(const std::string& s);

/// Everything one invocation needs. Serialised verbatim into every artifact so
/// that the artifact can be fed back through --config.
struct RunConfig {
  Command command = Command::fit;

  // inputs
  std::string data_path;
  std::string replicates_path;
  std::vector<int> error_free;                   // 1-based, replicate files only
  std::vector<double> sigma_u_var;               // diagonal of sigma_u
  std::vector<std::vector<double>> sigma_u_cov;  // full sigma_u, rows

  // estimation
  std::vector<double> lambda_grid = default_lambda_grid();
  int B = 50;
  BandwidthMethod bandwidth = BandwidthMethod::rule_of_thumb;
  double h = 0.0, h1 = 0.0, h2 = 0.0;  // fixed bandwidths only
  SolverTolerances solver;
  double max_failure_fraction = 0.2;
  std::uint64_t seed = 0;
  bool seed_set = false;

  // link
  int link_points = 15;
  std::vector<double> link_grid;  // overrides link_points when non-empty

  // cv
  int cv_folds = 10;
  bool cv_leave_one_out = false;
  int cv_candidates = 10;
  std::vector<double> cv_grid;  // overrides cv_candidates when non-empty

  // mc
  std::vector<int> mc_n{50, 100, 150};
  std::vector<double> mc_sigma_u{0.2, 0.4, 0.6};
  int reps = 100;
  bool mc_link = true;

  // generate
  int gen_n = 100;
  double gen_sigma_u = 0.4;

  std::string output = "-";
  OutputFormat format = OutputFormat::csv;

  void validate() const;
  SimexConfig simex_config() const;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

/// Reads a JSON config, a JSON artifact (its "config" member) or a CSV artifact
/// (its "# config=" line).
RunConfig load_run_config(const std::string& path);

/// Runs the command and returns the artifact text; throws simex::Error.
std::string execute(const RunConfig& cfg);

/// execute + write to cfg.output ("-" is stdout). Failures print one JSON line to `err`.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

int exit_code(ErrorClass cls);
/// Single-line JSON error record.
std::string error_record(const std::exception& e);

}  // namespace simex::cli
