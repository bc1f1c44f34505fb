#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "simex/errors.hpp"
#include "simex/io.hpp"

using namespace simex;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("simex_io_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const {
    const auto p = (path / name).string();
    std::ofstream(p) << text;
    return p;
  }
};

}  // namespace

TEST_CASE("load dataset") {
  TempDir dir;
  SUBCASE("basic") {
    const Dataset d = io::load_dataset(dir.write("a.csv", "# comment\ny,w1,w2\n1,2,3\n4,5,6\n7,8,9.5\n"));
    CHECK(d.n() == 3);
    CHECK(d.p() == 2);
    CHECK(d.y[2] == 7.0);
    CHECK(d.w(2, 1) == 9.5);
  }
  SUBCASE("column order and extra columns") {
    const Dataset d = io::load_dataset(dir.write("b.csv", "id,w2,y,w1\r\na,1,2,3\r\nb,4,5,6\r\n"));
    CHECK(d.y[1] == 5.0);
    CHECK(d.w(1, 0) == 6.0);
    CHECK(d.w(1, 1) == 4.0);
  }
  SUBCASE("missing response") {
    CHECK_THROWS_AS(io::load_dataset(dir.write("c.csv", "w1,w2\n1,2\n")), MissingColumn);
    CHECK_THROWS_AS(io::load_dataset(dir.write("d.csv", "y,x1\n1,2\n")), MissingColumn);
  }
  SUBCASE("non-finite value is reported with its row") {
    std::string text = "y,w1,w2\n";
    for (int r = 1; r <= 8; ++r) text += r == 7 ? "1,NaN,2\n" : "1,2,3\n";
    try {
      io::load_dataset(dir.write("e.csv", text));
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.row() == 7);
      CHECK(e.column() == "w1");
    }
    CHECK_THROWS_AS(io::load_dataset(dir.write("f.csv", "y,w1\n1,abc\n")), ParseError);
    CHECK_THROWS_AS(io::load_dataset(dir.write("g.csv", "y,w1\n1,inf\n")), ParseError);
    CHECK_THROWS_AS(io::load_dataset(dir.write("h.csv", "y,w1\n1\n")), ParseError);
  }
  CHECK_THROWS_AS(io::load_dataset((dir.path / "absent.csv").string()), InvalidData);
}

TEST_CASE("csv quoting") {
  CHECK(io::csv_field("plain") == "plain");
  CHECK(io::csv_field("a,b") == "\"a,b\"");
  CHECK(io::csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  const io::CsvTable t = io::parse_csv("a,b\n\"x,1\",\"line\nbreak\"\n\"q\"\"q\",\n");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "x,1");
  CHECK(t.rows[0][1] == "line\nbreak");
  CHECK(t.rows[1][0] == "q\"q");
  CHECK(t.rows[1][1] == "");
  const io::CsvTable back = io::parse_csv(io::csv_line({"h", "v"}) + io::csv_line({"a\"b,c", "d"}));
  CHECK(back.rows[0][0] == "a\"b,c");
  CHECK_THROWS_AS(io::parse_csv("a\n\"open\n"), ParseError);
}

TEST_CASE("dataset round trip is exact") {
  TempDir dir;
  Dataset d{oracle::standard_normal(25, 1, 3).col(0), oracle::standard_normal(25, 3, 4)};
  d.y[0] = 1e-300;
  d.w(1, 1) = -0.1;
  d.w(2, 2) = 1.0 / 3.0;
  const std::string path = (dir.path / "rt.csv").string();
  io::write_dataset(path, d);
  const Dataset back = io::load_dataset(path);
  CHECK((back.y.array() == d.y.array()).all());
  CHECK((back.w.array() == d.w.array()).all());
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
}

TEST_CASE("measurement error variance from replicates") {
  TempDir dir;
  SUBCASE("constant differences") {
    const auto m = io::sigma_u_from_replicates(
        dir.write("r.csv", "w1_rep1,w1_rep2,w2_rep1,w2_rep2\n1,1.5,0,0\n2,2.5,3,3\n-1,-0.5,2,2\n"), 2);
    CHECK(m.sigma_u(0, 0) == doctest::Approx(0.125));
    CHECK(m.sigma_u(1, 1) == 0.0);
    CHECK(m.sigma_u(0, 1) == 0.0);
  }
  SUBCASE("error-free coordinates need no columns") {
    const auto m = io::sigma_u_from_replicates(dir.write("s.csv", "w1_rep1,w1_rep2\n1,2\n3,4\n"), 2, {2});
    CHECK(m.sigma_u(0, 0) == doctest::Approx(0.5));
    CHECK(m.sigma_u(1, 1) == 0.0);
    CHECK_THROWS_AS(io::sigma_u_from_replicates(dir.write("t.csv", "w1_rep1,w1_rep2\n1,2\n"), 2), MissingColumn);
    CHECK_THROWS_AS(io::sigma_u_from_replicates(dir.write("u.csv", "w1_rep1,w1_rep2\n1,2\n"), 2, {3}), ConfigError);
  }
  SUBCASE("simulated replicates") {
    const int n = 100000;
    const double sigma2 = 0.25;
    std::mt19937_64 gen(123);
    std::normal_distribution<double> nd;
    std::string text = "w1_rep1,w1_rep2\n";
    for (int i = 0; i < n; ++i) {
      const double x = nd(gen);
      text += io::format_double(x + 0.5 * nd(gen)) + "," + io::format_double(x + 0.5 * nd(gen)) + "\n";
    }
    const auto m = io::sigma_u_from_replicates(dir.write("sim.csv", text), 1);
    CHECK(std::abs(m.sigma_u(0, 0) - sigma2) <= 3.0 * sigma2 * std::sqrt(2.0 / n));
  }
}
