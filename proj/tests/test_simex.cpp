#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "simex/errors.hpp"
#include "simex/mc.hpp"
#include "simex/simex.hpp"

using namespace simex;

namespace {

SimexConfig small_config(int B, std::uint64_t seed) {
  SimexConfig c;
  c.B = B;
  c.seed = seed;
  return c;
}

bool identical(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

TEST_CASE("measurement error spec") {
  Eigen::Matrix3d s;
  s << 0.5, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.2;
  const MeasurementErrorSpec me = MeasurementErrorSpec::from_covariance(s);
  CHECK((me.factor * me.factor.transpose() - s).cwiseAbs().maxCoeff() < 1e-10);

  const MeasurementErrorSpec diag = MeasurementErrorSpec::diagonal(Eigen::Vector2d(0.16, 0.0));
  CHECK(diag.factor(0, 0) == doctest::Approx(0.4));
  CHECK(diag.factor(1, 1) == 0.0);
  CHECK(MeasurementErrorSpec::diagonal(Eigen::Vector2d::Zero()).is_zero());

  Eigen::Matrix2d asym;
  asym << 1.0, 0.2, 0.1, 1.0;
  CHECK_THROWS_AS(MeasurementErrorSpec::from_covariance(asym), InvalidCovariance);
  Eigen::Matrix2d indefinite;
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(MeasurementErrorSpec::from_covariance(indefinite), InvalidCovariance);
  CHECK_THROWS_AS(MeasurementErrorSpec::diagonal(Eigen::Vector2d(-0.1, 0.0)), InvalidCovariance);
}

TEST_CASE("config validation") {
  SimexConfig c;
  CHECK_NOTHROW(c.validate());
  c.lambda_grid = {0.0, 1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.lambda_grid = {0.1, 1.0, 2.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.lambda_grid = {0.0, 1.0, 1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SimexConfig{};
  c.B = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const std::vector<double> grid = default_lambda_grid();
  REQUIRE(grid.size() == 11);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == doctest::Approx(2.0));
}

TEST_CASE("remeasure") {
  Dataset d{Eigen::VectorXd::Zero(3), oracle::standard_normal(3, 2, 1)};
  const Eigen::MatrixXd u = Eigen::MatrixXd::Ones(3, 2);
  const MeasurementErrorSpec me = MeasurementErrorSpec::diagonal(Eigen::Vector2d(0.16, 0.0));
  CHECK(identical(remeasure(d, me, 0.0, u), d.w));
  CHECK(identical(remeasure(d, MeasurementErrorSpec::diagonal(Eigen::Vector2d::Zero()), 1.7, u), d.w));
  const Eigen::MatrixXd w1 = remeasure(d, me, 1.0, u);
  CHECK(w1(0, 0) - d.w(0, 0) == doctest::Approx(0.4));
  CHECK(w1(0, 1) == d.w(0, 1));
  CHECK_THROWS_AS(remeasure(d, me, -0.1, u), ConfigError);
}

TEST_CASE("pseudo-errors are reproducible per replicate") {
  CHECK(identical(draw_pseudo_errors(10, 3, 7, 2), draw_pseudo_errors(10, 3, 7, 2)));
  CHECK_FALSE(identical(draw_pseudo_errors(10, 3, 7, 2), draw_pseudo_errors(10, 3, 7, 3)));
  CHECK_FALSE(identical(draw_pseudo_errors(10, 3, 7, 2), draw_pseudo_errors(10, 3, 8, 2)));
}

TEST_CASE("quadratic extrapolation") {
  const std::vector<double> grid = default_lambda_grid();
  Eigen::VectorXd constant = Eigen::VectorXd::Constant(11, 0.37);
  CHECK(std::abs(quadratic_extrapolate(grid, constant).at_minus_1 - 0.37) <= 1e-10);

  for (const std::vector<double>& g : {grid, std::vector<double>{0.0, 0.5, 3.0}}) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(g.size()));
    for (std::size_t m = 0; m < g.size(); ++m) v[static_cast<Eigen::Index>(m)] = 1 + 2 * g[m] + 3 * g[m] * g[m];
    const Extrapolation e = quadratic_extrapolate(g, v);
    CHECK(std::abs(e.at_minus_1 - 2.0) <= 1e-10);
    CHECK((e.fit.psi - Eigen::Vector3d(1, 2, 3)).cwiseAbs().maxCoeff() <= 1e-10);
  }

  SUBCASE("noisy series against the normal equations") {
    const Eigen::VectorXd noise = oracle::standard_normal(11, 1, 5);
    Eigen::VectorXd v(11);
    Eigen::Matrix3d xtx = Eigen::Matrix3d::Zero();
    Eigen::Vector3d xty = Eigen::Vector3d::Zero();
    for (int m = 0; m < 11; ++m) {
      const double l = grid[static_cast<std::size_t>(m)];
      v[m] = 0.5 - 0.2 * l + 0.03 * l * l + 0.01 * noise[m];
      const Eigen::Vector3d x(1.0, l, l * l);
      xtx += x * x.transpose();
      xty += v[m] * x;
    }
    const Eigen::Vector3d psi = xtx.inverse() * xty;
    const Extrapolation e = quadratic_extrapolate(grid, v);
    CHECK((e.fit.psi - psi).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(e.at_minus_1 == doctest::Approx(psi[0] - psi[1] + psi[2]).epsilon(1e-10));
  }
  CHECK_THROWS_AS(quadratic_extrapolate({0.0, 1.0}, Eigen::Vector2d(1, 2)), SingularDesign);
  CHECK_THROWS_AS(quadratic_extrapolate({0.0, 1.0, 1.0}, Eigen::Vector3d(1, 2, 3)), SingularDesign);
}

TEST_CASE("SIMEX without measurement error collapses to the naive fit") {
  const mc::SimulatedData sim = mc::generate(mc::DgpSpec::paper(100, 0.0), 41);
  const MeasurementErrorSpec me = MeasurementErrorSpec::diagonal(Eigen::Vector2d::Zero());
  const SimexConfig cfg = small_config(5, 3);
  const SimexBetaResult r = estimate_beta(sim.data, me, cfg);
  CHECK((r.beta_simex.beta - r.beta_naive.beta).cwiseAbs().maxCoeff() <= 1e-8);
  const std::vector<double> grid = default_link_grid(sim.data, r.beta_simex.beta);
  const LinkEstimate link = estimate_link(sim.data, me, cfg, r.beta_simex, grid);
  CHECK(link.grid.size() == 15);
  CHECK((link.g_simex - link.g_naive).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("link of exact linear data is the identity") {
  const Eigen::Vector2d beta(0.6, 0.8);
  Dataset d{Eigen::VectorXd(), oracle::standard_normal(150, 2, 77)};
  d.y = d.w * beta;
  const MeasurementErrorSpec me = MeasurementErrorSpec::diagonal(Eigen::Vector2d::Zero());
  const SimexConfig cfg = small_config(3, 1);
  const SimexBetaResult r = estimate_beta(d, me, cfg);
  CHECK((r.beta_simex.beta - beta).norm() < 1e-8);
  const std::vector<double> grid{-1.0, -0.3, 0.0, 0.4, 1.1};
  const LinkEstimate link = estimate_link(d, me, cfg, r.beta_simex, grid);
  REQUIRE(link.grid.size() == grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    CHECK(std::abs(link.g_simex[static_cast<Eigen::Index>(k)] - grid[k]) <= 1e-8);
}

TEST_CASE("SIMEX result invariants") {
  const mc::SimulatedData sim = mc::generate(mc::DgpSpec::paper(100, 0.4), 5);
  const MeasurementErrorSpec me = MeasurementErrorSpec::diagonal(Eigen::Vector2d(0.16, 0.0));
  const SimexBetaResult a = estimate_beta(sim.data, me, small_config(8, 10));
  const SimexBetaResult b = estimate_beta(sim.data, me, small_config(8, 10));
  const SimexBetaResult c = estimate_beta(sim.data, me, small_config(4, 99));

  CHECK(identical(a.beta_simex.beta, b.beta_simex.beta));
  CHECK(identical(a.profile.estimates, b.profile.estimates));
  CHECK(identical(a.profile.estimates.col(0), c.profile.estimates.col(0)));
  CHECK(identical(a.beta_naive.beta, c.beta_naive.beta));
  for (Eigen::Index m = 0; m < a.profile.estimates.cols(); ++m)
    CHECK(std::abs(a.profile.estimates.col(m).norm() - 1.0) <= 1e-10);
  CHECK(std::abs(a.beta_simex.beta.norm() - 1.0) <= 1e-10);
  CHECK((align_sign(a.profile.estimates.col(0), a.beta_naive.beta) - a.beta_naive.beta).norm() <= 1e-12);
  CHECK(a.extrapolants.size() == 2);
  CHECK(a.diagnostics.size() == 11);
  for (const LambdaDiagnostics& d : a.diagnostics) CHECK(d.solved + d.failed == 8);
}

TEST_CASE("SIMEX argument checks") {
  const mc::SimulatedData sim = mc::generate(mc::DgpSpec::paper(30, 0.4), 5);
  const MeasurementErrorSpec me3 = MeasurementErrorSpec::diagonal(Eigen::Vector3d::Constant(0.1));
  CHECK_THROWS_AS(estimate_beta(sim.data, me3, small_config(2, 1)), DimensionMismatch);
  Dataset bad = sim.data;
  bad.y[3] = std::nan("");
  CHECK_THROWS_AS(estimate_beta(bad, MeasurementErrorSpec::diagonal(Eigen::Vector2d::Zero()), small_config(2, 1)),
                  InvalidData);
}
