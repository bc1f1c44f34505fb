#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "simex/cli.hpp"
#include "simex/io.hpp"
#include "simex/mc.hpp"

using namespace simex;
using nlohmann::json;

namespace {

struct Workspace {
  std::filesystem::path dir;
  Workspace() {
    dir = std::filesystem::temp_directory_path() / ("simex_cli_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(dir);
  }
  ~Workspace() { std::filesystem::remove_all(dir); }
  std::string file(const std::string& name) const { return (dir / name).string(); }
};

cli::RunConfig fit_config(const std::string& data, std::vector<double> var) {
  cli::RunConfig c;
  c.command = cli::Command::fit;
  c.data_path = data;
  c.sigma_u_var = std::move(var);
  c.B = 6;
  c.seed = 17;
  c.seed_set = true;
  c.format = cli::OutputFormat::json;
  return c;
}

}  // namespace

TEST_CASE("fit artifacts") {
  Workspace ws;
  const std::string data = ws.file("d.csv");
  io::write_dataset(data, mc::generate(mc::DgpSpec::paper(100, 0.4), 3).data);

  SUBCASE("no measurement error gives identical estimates") {
    const json out = json::parse(cli::execute(fit_config(data, {0.0, 0.0})));
    const auto simex = out["result"]["beta_simex"].get<std::vector<double>>();
    const auto naive = out["result"]["beta_naive"].get<std::vector<double>>();
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(simex[j] - naive[j]) <= 1e-8);
  }
  SUBCASE("deterministic and reproducible from the embedded config") {
    const cli::RunConfig cfg = fit_config(data, {0.16, 0.0});
    const std::string first = cli::execute(cfg);
    CHECK(cli::execute(cfg) == first);
    const std::string artifact = ws.file("fit.json");
    io::write_file_atomic(artifact, first);
    CHECK(cli::execute(cli::load_run_config(artifact)) == first);

    cli::RunConfig csv = cfg;
    csv.format = cli::OutputFormat::csv;
    const std::string table = cli::execute(csv);
    const std::string csv_path = ws.file("fit.csv");
    io::write_file_atomic(csv_path, table);
    CHECK(cli::execute(cli::load_run_config(csv_path)) == table);
    const io::CsvTable parsed = io::parse_csv(table);
    CHECK(parsed.header == std::vector<std::string>{"lambda", "kind", "beta1", "beta2"});
    CHECK(parsed.rows.size() == 13);
  }
}

TEST_CASE("link and cv tables") {
  Workspace ws;
  const std::string data = ws.file("d.csv");
  io::write_dataset(data, mc::generate(mc::DgpSpec::paper(80, 0.4), 4).data);
  cli::RunConfig cfg = fit_config(data, {0.16, 0.0});
  cfg.command = cli::Command::link;
  cfg.format = cli::OutputFormat::csv;
  const io::CsvTable link = io::parse_csv(cli::execute(cfg));
  CHECK(link.header.size() == 3 + 11);
  CHECK(link.header[1] == "g_simex");
  CHECK(link.rows.size() + 0 <= 15);

  cfg.command = cli::Command::cv;
  cfg.B = 2;
  cfg.lambda_grid = {0.0, 1.0, 2.0};
  cfg.cv_candidates = 3;
  cfg.cv_folds = 3;
  const io::CsvTable cv = io::parse_csv(cli::execute(cfg));
  CHECK(cv.header.front() == "h");
  CHECK(cv.rows.size() == 3);
}

TEST_CASE("mc table schema") {
  cli::RunConfig cfg;
  cfg.command = cli::Command::mc;
  cfg.mc_n = {50};
  cfg.mc_sigma_u = {0.4};
  cfg.reps = 2;
  cfg.B = 3;
  cfg.seed = 1;
  cfg.seed_set = true;
  const io::CsvTable t = io::parse_csv(cli::execute(cfg));
  const std::vector<std::string> leading{"n", "sigma_u", "method", "component", "bias", "sd"};
  CHECK(std::vector<std::string>(t.header.begin(), t.header.begin() + 6) == leading);
  CHECK(t.rows.size() == 4);
  CHECK(t.comments.size() == 1);
}

TEST_CASE("config handling and errors") {
  cli::RunConfig cfg = fit_config("", {0.1, 0.0});
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.data_path = "x.csv";
  cfg.seed_set = false;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.seed_set = true;
  cfg.replicates_path = "r.csv";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  const json j = cli::to_json(fit_config("x.csv", {0.1, 0.0}));
  CHECK(cli::to_json(cli::run_config_from_json(j)) == j);
  json bad = j;
  bad["lamda_grid"] = {0, 1, 2};
  CHECK_THROWS_AS(cli::run_config_from_json(bad), ConfigError);
  bad = j;
  bad["B"] = "many";
  CHECK_THROWS_AS(cli::run_config_from_json(bad), ConfigError);

  std::ostringstream out, err;
  CHECK(cli::run(fit_config("/nonexistent/d.csv", {0.1, 0.0}), out, err) == 3);
  const json rec = json::parse(err.str());
  CHECK(rec["class"] == "data");
  CHECK(err.str().find('\n') == err.str().size() - 1);

  std::ostringstream out2, err2;
  cli::RunConfig unseeded = fit_config("d.csv", {0.1, 0.0});
  unseeded.seed_set = false;
  CHECK(cli::run(unseeded, out2, err2) == 2);
  CHECK(cli::exit_code(ErrorClass::estimation) == 4);

  const ParseError pe(7, "w1", "bad");
  const json prec = json::parse(cli::error_record(pe));
  CHECK(prec["row"] == 7);
  CHECK(prec["column"] == "w1");
}
