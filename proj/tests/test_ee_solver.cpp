#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "simex/bandwidth.hpp"
#include "simex/ee_solver.hpp"
#include "simex/errors.hpp"
#include "simex/mc.hpp"

using namespace simex;

namespace {

SolverConfig config(double h, double h1) {
  SolverConfig c;
  c.h = h;
  c.h1 = h1;
  return c;
}

Dataset linear_data(Eigen::Index n, const Eigen::VectorXd& beta, unsigned seed) {
  Dataset d;
  d.w = oracle::standard_normal(n, beta.size(), seed);
  d.y = d.w * beta;
  return d;
}

}  // namespace

TEST_CASE("initial beta") {
  const Eigen::Vector3d beta = Eigen::Vector3d(1.0, -2.0, 0.5).normalized();
  SUBCASE("exact linear data") {
    const UnitIndex b = initial_beta(linear_data(30, beta, 4));
    CHECK(b.anchor == 1);
    CHECK((b.beta + beta).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("constant response") {
    Dataset d = linear_data(30, beta, 4);
    d.y.setConstant(2.0);
    CHECK_THROWS_AS(initial_beta(d), ZeroSlope);
  }
  SUBCASE("collinear design") {
    Dataset d = linear_data(30, beta, 4);
    d.w.col(2) = 2.0 * d.w.col(0);
    CHECK_THROWS_AS(initial_beta(d), RankDeficient);
  }
  SUBCASE("quadratic-link design against the normal equations") {
    const mc::SimulatedData sim = mc::generate(mc::DgpSpec::paper(500, 0.0), 12);
    const Eigen::Index n = sim.data.n();
    Eigen::MatrixXd x(n, 3);
    x << Eigen::VectorXd::Ones(n), sim.data.w;
    const Eigen::Vector3d coef = (x.transpose() * x).ldlt().solve(x.transpose() * sim.data.y);
    Eigen::Vector2d slope = coef.tail<2>().normalized();
    if (slope[1] < 0) slope = -slope;
    const UnitIndex b = initial_beta(sim.data);
    CHECK((b.beta - slope).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(line_angle(b.beta, mc::DgpSpec::paper(500, 0.0).beta_true) < 0.1);
  }
}

TEST_CASE("estimating function") {
  SUBCASE("vanishes when the response is linear in the index") {
    const Eigen::Vector2d beta(0.6, 0.8);
    Dataset d = linear_data(60, beta, 6);
    d.y = (1.0 + 2.0 * d.y.array()).matrix();
    const EstimatingEquation ee = estimating_function({Eigen::VectorXd::Constant(1, 0.6), 1}, d, config(0.5, 0.8));
    CHECK(ee.q.norm() < 1e-12);
    CHECK(ee.objective < 1e-20);
  }
  SUBCASE("p = 2 instance against direct summation") {
    const Eigen::Index n = 40;
    Dataset d;
    d.w = oracle::standard_normal(n, 2, 21);
    d.y = (d.w.col(0) + 0.5 * d.w.col(1)).array().square().matrix() + 0.1 * oracle::standard_normal(n, 1, 22);
    const double a = 0.3, h = 0.9, h1 = 1.2;
    const Eigen::Vector2d beta(a, std::sqrt(1 - a * a));
    const Eigen::Vector2d jac(1.0, -a / std::sqrt(1 - a * a));
    const Eigen::VectorXd t = d.w * beta;
    double q = 0.0, bn = 0.0, g_obj = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = oracle::wls_line(t[i], t, d.y, h)[0];
      const double gp = oracle::wls_line(t[i], t, d.y, h1)[1];
      const double z = jac.dot(d.w.row(i));
      q += (d.y[i] - g) * gp * z / n;
      bn += gp * gp * z * z / n;
      g_obj += (d.y[i] - g) * (d.y[i] - g);
    }
    const EstimatingEquation ee = estimating_function({Eigen::VectorXd::Constant(1, a), 1}, d, config(h, h1));
    CHECK(ee.q[0] == doctest::Approx(q).epsilon(1e-10));
    CHECK(ee.bn(0, 0) == doctest::Approx(bn).epsilon(1e-10));
    CHECK(ee.objective == doctest::Approx(g_obj).epsilon(1e-10));
    CHECK(objective_G(beta, d, config(h, h1)) == doctest::Approx(g_obj).epsilon(1e-10));
  }
  SUBCASE("scoring matrix is positive semidefinite") {
    const mc::SimulatedData sim = mc::generate(mc::DgpSpec::paper(80, 0.3), 3);
    Dataset d = sim.data;
    d.w.conservativeResize(Eigen::NoChange, 4);
    d.w.rightCols(2) = oracle::standard_normal(80, 2, 9);
    const EstimatingEquation ee =
        estimating_function({Eigen::Vector3d(0.2, -0.1, 0.3), 0}, d, config(0.4, 0.6));
    CHECK((ee.bn - ee.bn.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(ee.bn).eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("solver") {
  SUBCASE("noiseless fixed point") {
    const Eigen::Vector2d beta(0.6, 0.8);
    const Dataset d = linear_data(100, beta, 31);
    const EESolution s = solve(d, config(0.4, 0.6), make_unit_index(beta));
    CHECK(s.converged);
    CHECK(s.iterations <= 2);
    CHECK(s.residual_norm <= 1e-6);
    CHECK((s.beta.beta - beta).norm() < 1e-8);
  }
  SUBCASE("single iteration from a far start") {
    const mc::SimulatedData sim = mc::generate(mc::DgpSpec::paper(100, 0.0), 8);
    SolverConfig cfg = config(0.2, 0.4);
    cfg.max_iter = 1;
    const EESolution s = solve(sim.data, cfg, make_unit_index(Eigen::Vector2d(1.0, -1.0)));
    CHECK_FALSE(s.converged);
    CHECK(s.iterations == 1);
    CHECK(std::abs(s.beta.beta.norm() - 1.0) <= 1e-12);
    CHECK(std::isfinite(s.residual_norm));
  }
  SUBCASE("invariants at rule-of-thumb bandwidths") {
    const mc::SimulatedData sim = mc::generate(mc::DgpSpec::paper(200, 0.0), 0);
    const UnitIndex start = initial_beta(sim.data);
    const BandwidthSet bw = rule_of_thumb(sim.data, start);
    const SolverConfig cfg = config(bw.h, bw.h1);
    const EESolution s = solve(sim.data, cfg, start);
    CHECK(s.converged);
    CHECK(s.residual_norm <= cfg.tol_residual);
    CHECK(std::abs(s.beta.beta.norm() - 1.0) <= 1e-12);
    double previous = objective_G(start.beta, sim.data, cfg);
    for (const SolverStep& step : s.trace) {
      if (step.descent) CHECK(step.objective <= previous + 1e-9);
      previous = step.objective;
    }
  }
  SUBCASE("agrees with the angle grid at moderate bandwidths") {
    const mc::SimulatedData sim = mc::generate(mc::DgpSpec::paper(200, 0.0), 0);
    const SolverConfig cfg = config(0.3, 0.5);
    const EESolution s = solve(sim.data, cfg, initial_beta(sim.data));
    CHECK(s.converged);
    const UnitIndex grid = mc::angle_grid_oracle(sim.data, cfg, 10000);
    CHECK(line_angle(grid.beta, s.beta.beta) <= 2e-3);
  }
}
