#include "simex/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "simex/io.hpp"
#include "simex/mc.hpp"

namespace simex::cli {

using nlohmann::json;

namespace {

constexpr const char* kConfigPrefix = "config=";

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json bandwidths_json(const BandwidthSet& bw) {
  return {{"h", bw.h}, {"h1", bw.h1}, {"h2", bw.h2}, {"method", to_string(bw.method)}};
}

std::vector<std::string> beta_columns(Eigen::Index p) {
  std::vector<std::string> cols;
  for (Eigen::Index j = 0; j < p; ++j) cols.push_back("beta" + std::to_string(j + 1));
  return cols;
}

std::string csv_preamble(const RunConfig& cfg) {
  return "#" + std::string(kConfigPrefix) + to_json(cfg).dump() + "\n";
}

std::string json_artifact(const RunConfig& cfg, json result) {
  json doc{{"config", to_json(cfg)}, {"result", std::move(result)}};
  return doc.dump(2) + "\n";
}

MeasurementErrorSpec measurement_error(const RunConfig& cfg, Eigen::Index p) {
  if (!cfg.replicates_path.empty())
    return io::sigma_u_from_replicates(cfg.replicates_path, static_cast<int>(p), cfg.error_free);
  if (!cfg.sigma_u_cov.empty()) {
    const auto k = static_cast<Eigen::Index>(cfg.sigma_u_cov.size());
    if (k != p) throw DimensionMismatch("sigma_u has " + std::to_string(k) + " rows but the data has p = " + std::to_string(p));
    Eigen::MatrixXd s(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto& row = cfg.sigma_u_cov[static_cast<std::size_t>(i)];
      if (static_cast<Eigen::Index>(row.size()) != k) throw DimensionMismatch("sigma_u must be square");
      for (Eigen::Index j = 0; j < k; ++j) s(i, j) = row[static_cast<std::size_t>(j)];
    }
    return MeasurementErrorSpec::from_covariance(s);
  }
  const auto k = static_cast<Eigen::Index>(cfg.sigma_u_var.size());
  if (k != p) throw DimensionMismatch("sigma_u_var has " + std::to_string(k) + " entries but the data has p = " + std::to_string(p));
  return MeasurementErrorSpec::diagonal(Eigen::Map<const Eigen::VectorXd>(cfg.sigma_u_var.data(), k));
}

struct Prepared {
  Dataset data;
  MeasurementErrorSpec me;
  SimexConfig simex;
};

Prepared prepare(const RunConfig& cfg) {
  Prepared p{io::load_dataset(cfg.data_path), {}, cfg.simex_config()};
  p.data.validate();
  p.me = measurement_error(cfg, p.data.p());
  return p;
}

std::vector<double> cv_candidates(const RunConfig& cfg, const Dataset& data) {
  return cfg.cv_grid.empty() ? default_cv_candidates(data, initial_beta(data), cfg.cv_candidates)
                             : cfg.cv_grid;
}

CvOptions cv_options(const RunConfig& cfg) {
  CvOptions o;
  o.folds = cfg.cv_folds;
  o.leave_one_out = cfg.cv_leave_one_out;
  o.max_failure_fraction = cfg.max_failure_fraction;
  return o;
}

void apply_cv(const RunConfig& cfg, Prepared& p) {
  if (cfg.bandwidth != BandwidthMethod::cross_validation) return;
  p.simex.bandwidths =
      cv_bandwidth(p.data, p.me, p.simex, cv_candidates(cfg, p.data), cv_options(cfg)).bandwidths;
}

std::string run_fit(const RunConfig& cfg) {
  Prepared p = prepare(cfg);
  apply_cv(cfg, p);
  const SimexBetaResult r = estimate_beta(p.data, p.me, p.simex);
  const Eigen::Index dim = p.data.p();

  if (cfg.format == OutputFormat::csv) {
    std::vector<std::string> header{"lambda", "kind"};
    for (const auto& c : beta_columns(dim)) header.push_back(c);
    std::string out = csv_preamble(cfg) + io::csv_line(header);
    auto row = [&](double lambda, const std::string& kind, const Eigen::VectorXd& b) {
      std::vector<std::string> f{io::format_double(lambda), kind};
      for (Eigen::Index j = 0; j < dim; ++j) f.push_back(io::format_double(b[j]));
      out += io::csv_line(f);
    };
    for (std::size_t m = 0; m < r.profile.lambda_grid.size(); ++m)
      row(r.profile.lambda_grid[m], "profile", r.profile.estimates.col(static_cast<Eigen::Index>(m)));
    row(0.0, "naive", r.beta_naive.beta);
    row(-1.0, "simex", r.beta_simex.beta);
    return out;
  }

  json profile = json::array();
  for (std::size_t m = 0; m < r.profile.lambda_grid.size(); ++m) {
    const auto mi = static_cast<Eigen::Index>(m);
    profile.push_back({{"lambda", r.profile.lambda_grid[m]},
                       {"beta", vec(r.profile.estimates.col(mi))},
                       {"raw_mean", vec(r.profile.raw_means.col(mi))}});
  }
  json extrapolants = json::array();
  for (const auto& e : r.extrapolants) extrapolants.push_back(vec(e.psi));
  json diagnostics = json::array();
  for (const auto& d : r.diagnostics)
    diagnostics.push_back({{"lambda", d.lambda},
                           {"solved", d.solved},
                           {"failed", d.failed},
                           {"not_converged", d.not_converged},
                           {"mean_iterations", d.mean_iterations}});
  return json_artifact(cfg, {{"beta_simex", vec(r.beta_simex.beta)},
                             {"beta_naive", vec(r.beta_naive.beta)},
                             {"beta_int", vec(r.beta_int.beta)},
                             {"simex_raw", vec(r.simex_raw)},
                             {"sigma_u", vec(p.me.sigma_u.diagonal())},
                             {"bandwidths", bandwidths_json(r.bandwidths)},
                             {"profile", profile},
                             {"extrapolants", extrapolants},
                             {"diagnostics", diagnostics}});
}

std::string run_link(const RunConfig& cfg) {
  Prepared p = prepare(cfg);
  apply_cv(cfg, p);
  const SimexBetaResult r = estimate_beta(p.data, p.me, p.simex);
  p.simex.bandwidths = r.bandwidths;
  const std::vector<double> grid =
      cfg.link_grid.empty() ? default_link_grid(p.data, r.beta_naive.beta, cfg.link_points) : cfg.link_grid;
  const LinkEstimate link = estimate_link(p.data, p.me, p.simex, r.beta_simex, grid);
  const auto& lambdas = p.simex.lambda_grid;

  if (cfg.format == OutputFormat::csv) {
    std::vector<std::string> header{"t0", "g_simex", "g_naive"};
    for (double l : lambdas) header.push_back("g_lambda_" + io::format_double(l));
    std::string out = csv_preamble(cfg) + io::csv_line(header);
    for (std::size_t k = 0; k < link.grid.size(); ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      std::vector<std::string> f{io::format_double(link.grid[k]), io::format_double(link.g_simex[ki]),
                                 io::format_double(link.g_naive[ki])};
      for (Eigen::Index m = 0; m < link.per_lambda.cols(); ++m)
        f.push_back(io::format_double(link.per_lambda(ki, m)));
      out += io::csv_line(f);
    }
    return out;
  }

  json per_lambda = json::array();
  for (Eigen::Index m = 0; m < link.per_lambda.cols(); ++m)
    per_lambda.push_back({{"lambda", lambdas[static_cast<std::size_t>(m)]}, {"g", vec(link.per_lambda.col(m))}});
  return json_artifact(cfg, {{"beta_simex", vec(r.beta_simex.beta)},
                             {"bandwidths", bandwidths_json(r.bandwidths)},
                             {"t0", link.grid},
                             {"g_simex", vec(link.g_simex)},
                             {"g_naive", vec(link.g_naive)},
                             {"per_lambda", per_lambda},
                             {"excluded", link.excluded}});
}

std::string run_cv(const RunConfig& cfg) {
  Prepared p = prepare(cfg);
  const CvResult cv = cv_bandwidth(p.data, p.me, p.simex, cv_candidates(cfg, p.data), cv_options(cfg));

  if (cfg.format == OutputFormat::csv) {
    std::string out = csv_preamble(cfg) + io::csv_line({"h", "score", "failed_folds", "disqualified", "selected"});
    for (const CvPoint& pt : cv.curve)
      out += io::csv_line({io::format_double(pt.h), io::format_double(pt.score), std::to_string(pt.failed_folds),
                           pt.disqualified ? "1" : "0", pt.h == cv.h_opt ? "1" : "0"});
    return out;
  }
  json curve = json::array();
  for (const CvPoint& pt : cv.curve)
    curve.push_back({{"h", pt.h}, {"score", pt.score}, {"failed_folds", pt.failed_folds}, {"disqualified", pt.disqualified}});
  return json_artifact(cfg, {{"h_opt", cv.h_opt}, {"bandwidths", bandwidths_json(cv.bandwidths)}, {"curve", curve}});
}

std::string run_mc(const RunConfig& cfg) {
  std::vector<mc::StudyCell> cells;
  for (int n : cfg.mc_n)
    for (double s : cfg.mc_sigma_u) cells.push_back({n, s});
  mc::StudyOptions opt;
  opt.reps = cfg.reps;
  opt.bandwidth = cfg.bandwidth;
  opt.link = cfg.mc_link;
  opt.link_grid_points = cfg.link_points;
  opt.cv = cv_options(cfg);
  opt.cv_candidates = cfg.cv_candidates;
  const mc::McReport rep = mc::run_study(cells, opt, cfg.simex_config(), cfg.seed);
  std::clog << "mc: " << cells.size() << " cells in " << rep.runtime_seconds << " s\n";

  if (cfg.format == OutputFormat::csv) {
    std::string out = csv_preamble(cfg) +
                      io::csv_line({"n", "sigma_u", "method", "component", "bias", "sd", "mc_se",
                                    "bandwidth_method", "reps", "failed_reps", "flagged", "rmse_mean",
                                    "rmse_median", "rmse_q25", "rmse_q75"});
    for (const auto& c : rep.cells) {
      for (const auto* method : {"SIMEX", "Naive"}) {
        const mc::MethodSummary& s = std::string(method) == "SIMEX" ? c.simex : c.naive;
        for (std::size_t j = 0; j < s.components.size(); ++j) {
          const auto& comp = s.components[j];
          out += io::csv_line({std::to_string(c.cell.n), io::format_double(c.cell.sigma_u), method,
                               "beta" + std::to_string(j + 1), io::format_double(comp.bias),
                               io::format_double(comp.sd), io::format_double(comp.mc_se),
                               to_string(c.bandwidth), std::to_string(c.reps), std::to_string(c.failed_reps),
                               c.flagged ? "1" : "0", io::format_double(s.rmse.mean),
                               io::format_double(s.rmse.median), io::format_double(s.rmse.q25),
                               io::format_double(s.rmse.q75)});
        }
      }
    }
    return out;
  }

  auto method_json = [](const mc::MethodSummary& s) {
    json comps = json::array();
    for (const auto& c : s.components) comps.push_back({{"bias", c.bias}, {"sd", c.sd}, {"mc_se", c.mc_se}});
    return json{{"components", comps},
                {"rmse", {{"mean", s.rmse.mean}, {"median", s.rmse.median}, {"q25", s.rmse.q25}, {"q75", s.rmse.q75}}},
                {"mean_curve", vec(s.mean_curve)}};
  };
  json cells_json = json::array();
  for (const auto& c : rep.cells)
    cells_json.push_back({{"n", c.cell.n},
                          {"sigma_u", c.cell.sigma_u},
                          {"bandwidth_method", to_string(c.bandwidth)},
                          {"reps", c.reps},
                          {"failed_reps", c.failed_reps},
                          {"flagged", c.flagged},
                          {"link_grid", c.link_grid},
                          {"true_curve", vec(c.true_curve)},
                          {"SIMEX", method_json(c.simex)},
                          {"Naive", method_json(c.naive)}});
  return json_artifact(cfg, {{"seed", rep.seed}, {"reps", rep.reps}, {"cells", cells_json}});
}

std::string run_generate(const RunConfig& cfg) {
  const mc::SimulatedData sim = mc::generate(mc::DgpSpec::paper(cfg.gen_n, cfg.gen_sigma_u), cfg.seed);
  if (cfg.format == OutputFormat::csv) return csv_preamble(cfg) + io::dataset_to_csv(sim.data);
  json rows = json::array();
  for (Eigen::Index i = 0; i < sim.data.n(); ++i) rows.push_back(vec(sim.data.w.row(i).transpose()));
  return json_artifact(cfg, {{"y", vec(sim.data.y)}, {"w", rows}});
}

template <class T>
void read(const json& j, const char* key, T& field) {
  if (const auto it = j.find(key); it != j.end()) field = it->get<T>();
}

}  // namespace

std::string to_string(Command c) {
  switch (c) {
    case Command::fit: return "fit";
    case Command::link: return "link";
    case Command::mc: return "mc";
    case Command::cv: return "cv";
    case Command::generate: return "generate";
  }
  return "?";
}

Command command_from_string(const std::string& s) {
  for (Command c : {Command::fit, Command::link, Command::mc, Command::cv, Command::generate})
    if (to_string(c) == s) return c;
  throw ConfigError("unknown command '" + s + "' (expected fit, link, mc, cv or generate)");
}

std::string to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "json"; }

OutputFormat output_format_from_string(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw ConfigError("unknown format '" + s + "' (expected csv or json)");
}

void RunConfig::validate() const {
  const bool needs_data = command == Command::fit || command == Command::link || command == Command::cv;
  if (!seed_set) throw ConfigError("a seed is required (--seed)");
  if (needs_data) {
    if (data_path.empty()) throw ConfigError("--data is required for " + to_string(command));
    const int sources = !replicates_path.empty() + !sigma_u_var.empty() + !sigma_u_cov.empty();
    if (sources != 1)
      throw ConfigError("give exactly one of --sigma-u-var, --replicates or a sigma_u_cov matrix");
  }
  if (!error_free.empty() && replicates_path.empty())
    throw ConfigError("--error-free only applies to --replicates");
  if (bandwidth == BandwidthMethod::fixed) BandwidthSet{h, h1, h2, bandwidth}.validate();
  if (link_points < 1) throw ConfigError("link_points must be >= 1");
  if (cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
  if (cv_candidates < 1) throw ConfigError("cv_candidates must be >= 1");
  for (double h : cv_grid)
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("cv grid values must be positive");
  if (command == Command::mc) {
    if (reps < 1) throw ConfigError("reps must be >= 1");
    if (mc_n.empty() || mc_sigma_u.empty()) throw ConfigError("mc needs at least one n and one sigma_u");
    for (int n : mc_n)
      if (n < 4) throw ConfigError("mc sample sizes must be >= 4");
    for (double s : mc_sigma_u)
      if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("mc sigma_u values must be >= 0");
  }
  if (command == Command::generate) {
    if (gen_n < 1) throw ConfigError("n must be >= 1");
    if (!(gen_sigma_u >= 0.0) || !std::isfinite(gen_sigma_u)) throw ConfigError("sigma_u must be >= 0");
  }
  simex_config().validate();
}

SimexConfig RunConfig::simex_config() const {
  SimexConfig c;
  c.lambda_grid = lambda_grid;
  c.B = B;
  c.solver = solver;
  c.seed = seed;
  c.max_failure_fraction = max_failure_fraction;
  if (bandwidth == BandwidthMethod::fixed) c.bandwidths = BandwidthSet{h, h1, h2, BandwidthMethod::fixed};
  return c;
}

json to_json(const RunConfig& c) {
  // `output` is deliberately absent: where an artifact is written is not part of it.
  return {{"command", to_string(c.command)},
          {"data", c.data_path},
          {"replicates", c.replicates_path},
          {"error_free", c.error_free},
          {"sigma_u_var", c.sigma_u_var},
          {"sigma_u_cov", c.sigma_u_cov},
          {"lambda_grid", c.lambda_grid},
          {"B", c.B},
          {"bandwidth", to_string(c.bandwidth)},
          {"h", c.h},
          {"h1", c.h1},
          {"h2", c.h2},
          {"max_iter", c.solver.max_iter},
          {"tol_step", c.solver.tol_step},
          {"tol_residual", c.solver.tol_residual},
          {"max_failure_fraction", c.max_failure_fraction},
          {"seed", c.seed},
          {"link_points", c.link_points},
          {"link_grid", c.link_grid},
          {"cv_folds", c.cv_folds},
          {"cv_leave_one_out", c.cv_leave_one_out},
          {"cv_candidates", c.cv_candidates},
          {"cv_grid", c.cv_grid},
          {"mc_n", c.mc_n},
          {"mc_sigma_u", c.mc_sigma_u},
          {"reps", c.reps},
          {"mc_link", c.mc_link},
          {"gen_n", c.gen_n},
          {"gen_sigma_u", c.gen_sigma_u},
          {"format", to_string(c.format)}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{
      "command", "data", "replicates", "error_free", "sigma_u_var", "sigma_u_cov", "lambda_grid", "B",
      "bandwidth", "h", "h1", "h2", "max_iter", "tol_step", "tol_residual", "max_failure_fraction", "seed",
      "link_points", "link_grid", "cv_folds", "cv_leave_one_out", "cv_candidates", "cv_grid", "mc_n",
      "mc_sigma_u", "reps", "mc_link", "gen_n", "gen_sigma_u", "format", "output"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");

  RunConfig c;
  try {
    if (j.contains("command")) c.command = command_from_string(j.at("command").get<std::string>());
    if (j.contains("bandwidth")) c.bandwidth = bandwidth_method_from_string(j.at("bandwidth").get<std::string>());
    if (j.contains("format")) c.format = output_format_from_string(j.at("format").get<std::string>());
    if (j.contains("seed")) {
      c.seed = j.at("seed").get<std::uint64_t>();
      c.seed_set = true;
    }
    read(j, "data", c.data_path);
    read(j, "replicates", c.replicates_path);
    read(j, "error_free", c.error_free);
    read(j, "sigma_u_var", c.sigma_u_var);
    read(j, "sigma_u_cov", c.sigma_u_cov);
    read(j, "lambda_grid", c.lambda_grid);
    read(j, "B", c.B);
    read(j, "h", c.h);
    read(j, "h1", c.h1);
    read(j, "h2", c.h2);
    read(j, "max_iter", c.solver.max_iter);
    read(j, "tol_step", c.solver.tol_step);
    read(j, "tol_residual", c.solver.tol_residual);
    read(j, "max_failure_fraction", c.max_failure_fraction);
    read(j, "link_points", c.link_points);
    read(j, "link_grid", c.link_grid);
    read(j, "cv_folds", c.cv_folds);
    read(j, "cv_leave_one_out", c.cv_leave_one_out);
    read(j, "cv_candidates", c.cv_candidates);
    read(j, "cv_grid", c.cv_grid);
    read(j, "mc_n", c.mc_n);
    read(j, "mc_sigma_u", c.mc_sigma_u);
    read(j, "reps", c.reps);
    read(j, "mc_link", c.mc_link);
    read(j, "gen_n", c.gen_n);
    read(j, "gen_sigma_u", c.gen_sigma_u);
    read(j, "output", c.output);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  const std::string marker = std::string("#") + kConfigPrefix;
  if (text.compare(0, marker.size(), marker) == 0) {
    const std::size_t eol = text.find('\n');
    try {
      return run_config_from_json(json::parse(text.substr(marker.size(), eol - marker.size())));
    } catch (const json::exception& e) {
      throw ConfigError("bad embedded config in '" + path + "': " + e.what());
    }
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is neither JSON nor a CSV artifact: " + e.what());
  }
  if (j.is_object() && j.contains("config") && j.contains("result")) return run_config_from_json(j.at("config"));
  return run_config_from_json(j);
}

std::string execute(const RunConfig& cfg) {
  cfg.validate();
  switch (cfg.command) {
    case Command::fit: return run_fit(cfg);
    case Command::link: return run_link(cfg);
    case Command::mc: return run_mc(cfg);
    case Command::cv: return run_cv(cfg);
    case Command::generate: return run_generate(cfg);
  }
  throw ConfigError("unknown command");
}

int exit_code(ErrorClass cls) {
  switch (cls) {
    case ErrorClass::config: return 2;
    case ErrorClass::data: return 3;
    case ErrorClass::estimation: return 4;
  }
  return 1;
}

std::string error_record(const std::exception& e) {
  json rec{{"status", "error"}, {"message", e.what()}};
  if (const auto* se = dynamic_cast<const Error*>(&e)) {
    static const char* names[] = {"config", "data", "estimation"};
    rec["class"] = names[static_cast<int>(se->error_class())];
    rec["kind"] = se->kind();
    rec["exit_code"] = exit_code(se->error_class());
    if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
      rec["row"] = pe->row();
      rec["column"] = pe->column();
    }
  } else {
    rec["class"] = "internal";
    rec["kind"] = "InternalError";
    rec["exit_code"] = 1;
  }
  return rec.dump();
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const std::string artifact = execute(cfg);
    if (cfg.output.empty() || cfg.output == "-") {
      out << artifact;
      out.flush();
    } else {
      io::write_file_atomic(cfg.output, artifact);
    }
    return 0;
  } catch (const Error& e) {
    err << error_record(e) << '\n';
    return exit_code(e.error_class());
  } catch (const std::exception& e) {
    err << error_record(e) << '\n';
    return 1;
  }
}

}  // namespace simex::cli
