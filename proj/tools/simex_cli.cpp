// Command-line front end: fit, link, mc, cv, generate.
#include <functional>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "simex/cli.hpp"

using simex::cli::RunConfig;

int main(int argc, char** argv) {
  CLI::App app{"SIMEX estimation for single-index models with covariate measurement error"};
  app.set_version_flag("--version", "0.1.0");

  RunConfig f;  // flag values; only the ones actually given override the base config
  std::string command, bandwidth = "RT", format = "csv", config_path;
  std::vector<int> n_values;
  std::vector<double> sigma_values;
  bool no_link = false;

  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;
  auto bind = [&](CLI::Option* opt, std::function<void(RunConfig&)> apply) { overrides.emplace_back(opt, std::move(apply)); };

  bind(app.add_option("command", command, "fit | link | mc | cv | generate")
           ->check(CLI::IsMember({"fit", "link", "mc", "cv", "generate"})),
       [&](RunConfig& c) { c.command = simex::cli::command_from_string(command); });
  app.add_option("--config", config_path, "JSON config, or an earlier artifact to re-run")->check(CLI::ExistingFile);

  bind(app.add_option("--data", f.data_path, "CSV with columns y, w1..wp"), [&](RunConfig& c) { c.data_path = f.data_path; });
  bind(app.add_option("--replicates", f.replicates_path, "CSV with w{j}_rep1, w{j}_rep2 columns"),
       [&](RunConfig& c) { c.replicates_path = f.replicates_path; });
  bind(app.add_option("--error-free", f.error_free, "1-based coordinates measured without error")->delimiter(','),
       [&](RunConfig& c) { c.error_free = f.error_free; });
  bind(app.add_option("--sigma-u-var", f.sigma_u_var, "measurement error variances (diagonal of Sigma_u)")->delimiter(','),
       [&](RunConfig& c) { c.sigma_u_var = f.sigma_u_var; });

  bind(app.add_option("--lambda", f.lambda_grid, "lambda grid, starting at 0")->delimiter(','),
       [&](RunConfig& c) { c.lambda_grid = f.lambda_grid; });
  bind(app.add_option("--B", f.B, "pseudo-error replicates per lambda"), [&](RunConfig& c) { c.B = f.B; });
  bind(app.add_option("--bandwidth", bandwidth, "RT | CV | fixed")->check(CLI::IsMember({"RT", "rt", "CV", "cv", "fixed"})),
       [&](RunConfig& c) { c.bandwidth = simex::bandwidth_method_from_string(bandwidth); });
  bind(app.add_option("--bw-h", f.h, "fixed bandwidth for g"), [&](RunConfig& c) { c.h = f.h; });
  bind(app.add_option("--bw-h1", f.h1, "fixed bandwidth for g'"), [&](RunConfig& c) { c.h1 = f.h1; });
  bind(app.add_option("--bw-h2", f.h2, "fixed bandwidth for the link"), [&](RunConfig& c) { c.h2 = f.h2; });
  bind(app.add_option("--max-iter", f.solver.max_iter), [&](RunConfig& c) { c.solver.max_iter = f.solver.max_iter; });
  bind(app.add_option("--tol-step", f.solver.tol_step), [&](RunConfig& c) { c.solver.tol_step = f.solver.tol_step; });
  bind(app.add_option("--tol-residual", f.solver.tol_residual),
       [&](RunConfig& c) { c.solver.tol_residual = f.solver.tol_residual; });
  bind(app.add_option("--max-failure-fraction", f.max_failure_fraction),
       [&](RunConfig& c) { c.max_failure_fraction = f.max_failure_fraction; });
  bind(app.add_option("--seed", f.seed, "RNG seed (required)"), [&](RunConfig& c) {
    c.seed = f.seed;
    c.seed_set = true;
  });

  bind(app.add_option("--link-points", f.link_points, "link grid size"), [&](RunConfig& c) { c.link_points = f.link_points; });
  bind(app.add_option("--link-grid", f.link_grid, "explicit link grid")->delimiter(','),
       [&](RunConfig& c) { c.link_grid = f.link_grid; });

  bind(app.add_option("--cv-folds", f.cv_folds), [&](RunConfig& c) { c.cv_folds = f.cv_folds; });
  bind(app.add_flag("--loo", f.cv_leave_one_out, "leave-one-out instead of k-fold"),
       [&](RunConfig& c) { c.cv_leave_one_out = f.cv_leave_one_out; });
  bind(app.add_option("--cv-candidates", f.cv_candidates, "number of default candidates"),
       [&](RunConfig& c) { c.cv_candidates = f.cv_candidates; });
  bind(app.add_option("--cv-grid", f.cv_grid, "explicit candidate bandwidths")->delimiter(','),
       [&](RunConfig& c) { c.cv_grid = f.cv_grid; });

  bind(app.add_option("--n", n_values, "sample size(s): mc cells or generate")->delimiter(','), [&](RunConfig& c) {
    c.mc_n = n_values;
    c.gen_n = n_values.front();
  });
  bind(app.add_option("--sigma-u", sigma_values, "error SD(s) of w1: mc cells or generate")->delimiter(','),
       [&](RunConfig& c) {
         c.mc_sigma_u = sigma_values;
         c.gen_sigma_u = sigma_values.front();
       });
  bind(app.add_option("--reps", f.reps, "Monte Carlo replications per cell"), [&](RunConfig& c) { c.reps = f.reps; });
  bind(app.add_flag("--no-link", no_link, "mc: skip link estimation"), [&](RunConfig& c) { c.mc_link = !no_link; });

  bind(app.add_option("-o,--output", f.output, "output file, '-' for stdout"), [&](RunConfig& c) { c.output = f.output; });
  bind(app.add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"})),
       [&](RunConfig& c) { c.format = simex::cli::output_format_from_string(format); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << simex::cli::error_record(simex::ConfigError(e.what())) << '\n';
    return 2;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = simex::cli::load_run_config(config_path);
    if (config_path.empty() && command.empty()) throw simex::ConfigError("a command or --config is required");
    for (auto& [opt, apply] : overrides)
      if (opt->count() > 0) apply(cfg);
  } catch (const simex::Error& e) {
    std::cerr << simex::cli::error_record(e) << '\n';
    return simex::cli::exit_code(e.error_class());
  }
  return simex::cli::run(cfg, std::cout, std::cerr);
}
