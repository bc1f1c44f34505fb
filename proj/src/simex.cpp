#include "simex/simex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "simex/errors.hpp"
#include "simex/parallel.hpp"
#include "simex/rng.hpp"

namespace simex {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kEigenClip = 1e-10;

void check_dimensions(const Dataset& data, const MeasurementErrorSpec& me) {
  data.validate();
  if (me.dim() != data.p())
    throw DimensionMismatch("measurement error covariance is " + std::to_string(me.dim()) +
                            "x" + std::to_string(me.dim()) + " but W has " +
                            std::to_string(data.p()) + " columns");
}

struct CellOutcome {
  bool ok = false;
  EESolution solution;
};

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

MeasurementErrorSpec MeasurementErrorSpec::from_covariance(const Eigen::MatrixXd& sigma_u) {
  if (sigma_u.rows() != sigma_u.cols() || sigma_u.rows() == 0)
    throw InvalidCovariance("measurement error covariance must be a nonempty square matrix");
  if (!sigma_u.allFinite()) throw InvalidCovariance("measurement error covariance is not finite");
  if ((sigma_u - sigma_u.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol)
    throw InvalidCovariance("measurement error covariance is not symmetric");

  MeasurementErrorSpec me;
  me.sigma_u = sigma_u;
  const Eigen::MatrixXd off = sigma_u - Eigen::MatrixXd(sigma_u.diagonal().asDiagonal());
  if (off.isZero(0.0)) {
    if ((sigma_u.diagonal().array() < -kEigenClip).any())
      throw InvalidCovariance("measurement error covariance has a negative variance");
    me.factor = sigma_u.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    return me;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma_u);
  if (eig.info() != Eigen::Success) throw InvalidCovariance("eigendecomposition failed");
  if (eig.eigenvalues().minCoeff() < -kEigenClip)
    throw InvalidCovariance("measurement error covariance is not positive semidefinite");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  me.factor = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  return me;
}

MeasurementErrorSpec MeasurementErrorSpec::diagonal(const Eigen::VectorXd& variances) {
  return from_covariance(variances.asDiagonal());
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 10; ++k) grid.push_back(0.2 * k);
  return grid;
}

void SimexConfig::validate() const {
  if (lambda_grid.size() < 3) throw ConfigError("lambda grid needs at least 3 points");
  if (lambda_grid.front() != 0.0) throw ConfigError("lambda grid must start at 0");
  for (std::size_t m = 1; m < lambda_grid.size(); ++m)
    if (!(lambda_grid[m] > lambda_grid[m - 1]) || !std::isfinite(lambda_grid[m]))
      throw ConfigError("lambda grid must be strictly increasing and finite");
  if (B < 1) throw ConfigError("B must be >= 1");
  if (solver.max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (!(solver.tol_step > 0.0) || !(solver.tol_residual > 0.0))
    throw ConfigError("solver tolerances must be positive");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction < 1.0))
    throw ConfigError("max_failure_fraction must lie in [0, 1)");
  if (bandwidths) bandwidths->validate();
}

SolverConfig SimexConfig::solver_config(const BandwidthSet& bw) const {
  SolverConfig sc;
  sc.max_iter = solver.max_iter;
  sc.tol_step = solver.tol_step;
  sc.tol_residual = solver.tol_residual;
  sc.h = bw.h;
  sc.h1 = bw.h1;
  sc.kernel = kernel;
  return sc;
}

BandwidthSet resolve_bandwidths(const Dataset& data, const UnitIndex& beta_int,
                                const SimexConfig& cfg) {
  return cfg.bandwidths ? *cfg.bandwidths : rule_of_thumb(data, beta_int);
}

Eigen::MatrixXd draw_pseudo_errors(Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                                   std::uint64_t b) {
  Engine engine = substream(seed, {0x51u, b});
  std::normal_distribution<double> normal;
  Eigen::MatrixXd u(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) u(i, j) = normal(engine);
  return u;
}

Eigen::MatrixXd remeasure(const Dataset& data, const MeasurementErrorSpec& me, double lambda,
                          const Eigen::MatrixXd& pseudo_errors) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  if (pseudo_errors.rows() != data.w.rows() || pseudo_errors.cols() != data.w.cols())
    throw DimensionMismatch("pseudo-errors must have the shape of W");
  if (me.dim() != data.p()) throw DimensionMismatch("covariance dimension does not match W");
  if (lambda == 0.0 || me.is_zero()) return data.w;
  return data.w + std::sqrt(lambda) * (pseudo_errors * me.factor.transpose());
}

Extrapolation quadratic_extrapolate(const std::vector<double>& lambda_grid,
                                    const Eigen::VectorXd& values) {
  const auto m = static_cast<Eigen::Index>(lambda_grid.size());
  if (values.size() != m) throw DimensionMismatch("lambda grid and values differ in length");
  if (std::set<double>(lambda_grid.begin(), lambda_grid.end()).size() < 3)
    throw SingularDesign("quadratic extrapolation needs at least 3 distinct lambda values");
  Eigen::MatrixXd design(m, 3);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double l = lambda_grid[static_cast<std::size_t>(k)];
    design(k, 0) = 1.0;
    design(k, 1) = l;
    design(k, 2) = l * l;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 3) throw SingularDesign("quadratic extrapolation design is rank deficient");
  Extrapolation out;
  out.fit.psi = qr.solve(values);
  if (!out.fit.psi.allFinite()) throw SingularDesign("extrapolant coefficients are not finite");
  out.at_minus_1 = out.fit.psi[0] - out.fit.psi[1] + out.fit.psi[2];
  return out;
}

SimexBetaResult estimate_beta(const Dataset& data, const MeasurementErrorSpec& me,
                              const SimexConfig& cfg) {
  cfg.validate();
  check_dimensions(data, me);

  SimexBetaResult res;
  res.beta_int = initial_beta(data);
  res.bandwidths = resolve_bandwidths(data, res.beta_int, cfg);
  const SolverConfig sc = cfg.solver_config(res.bandwidths);

  const auto& grid = cfg.lambda_grid;
  const std::size_t M = grid.size();
  const auto B = static_cast<std::size_t>(cfg.B);
  const Eigen::Index p = data.p();

  // lambda = 0 leaves W untouched, so every replicate shares one solve.
  CellOutcome naive;
  try {
    naive.solution = solve(data, sc, res.beta_int);
    naive.ok = true;
  } catch (const Error& e) {
    if (e.error_class() != ErrorClass::estimation) throw;
  }

  std::vector<std::vector<CellOutcome>> cells(B, std::vector<CellOutcome>(M));
  parallel_for(B, [&](std::size_t b) {
    auto& chain = cells[b];
    chain[0] = naive;
    UnitIndex warm = naive.ok ? naive.solution.beta : res.beta_int;
    const Eigen::MatrixXd u = draw_pseudo_errors(data.n(), p, cfg.seed, b);
    for (std::size_t m = 1; m < M; ++m) {
      const Dataset pseudo{data.y, remeasure(data, me, grid[m], u)};
      for (const UnitIndex* start : {&warm, &res.beta_int}) {
        try {
          chain[m].solution = solve(pseudo, sc, *start);
          chain[m].ok = true;
          break;
        } catch (const Error& e) {
          if (e.error_class() != ErrorClass::estimation) throw;
        }
      }
      if (chain[m].ok) warm = chain[m].solution.beta;
    }
  });

  res.profile.lambda_grid = grid;
  res.profile.estimates.resize(p, static_cast<Eigen::Index>(M));
  res.profile.raw_means.resize(p, static_cast<Eigen::Index>(M));
  for (std::size_t m = 0; m < M; ++m) {
    LambdaDiagnostics diag;
    diag.lambda = grid[m];
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
    double iterations = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const CellOutcome& cell = cells[b][m];
      if (!cell.ok) {
        ++diag.failed;
        continue;
      }
      ++diag.solved;
      if (!cell.solution.converged) ++diag.not_converged;
      iterations += cell.solution.iterations;
      sum += align_sign(cell.solution.beta.beta, res.beta_int.beta);
    }
    if (diag.solved == 0 || diag.failed > cfg.max_failure_fraction * static_cast<double>(B))
      throw TooManyFailures(std::to_string(diag.failed) + " of " + std::to_string(B) +
                            " estimation cells failed at lambda=" + std::to_string(grid[m]));
    diag.mean_iterations = iterations / diag.solved;
    // The shared lambda = 0 solve is used as is, so it cannot depend on B.
    const Eigen::VectorXd mean = m == 0 && naive.ok ? align_sign(naive.solution.beta.beta, res.beta_int.beta)
                                                    : Eigen::VectorXd(sum / static_cast<double>(diag.solved));
    res.profile.raw_means.col(static_cast<Eigen::Index>(m)) = mean;
    res.profile.estimates.col(static_cast<Eigen::Index>(m)) = mean.normalized();
    res.diagnostics.push_back(diag);
  }

  res.simex_raw.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const Extrapolation ex = quadratic_extrapolate(grid, res.profile.estimates.row(j).transpose());
    res.extrapolants.push_back(ex.fit);
    res.simex_raw[j] = ex.at_minus_1;
  }
  const Eigen::Index anchor = res.beta_int.anchor;
  res.beta_simex = res.simex_raw[anchor] != 0.0 ? make_unit_index(res.simex_raw, anchor)
                                                : make_unit_index(res.simex_raw);
  res.beta_naive = make_unit_index(res.profile.estimates.col(0), anchor);
  return res;
}

std::vector<double> default_link_grid(const Dataset& data, const Eigen::VectorXd& beta,
                                      int points, double lo, double hi) {
  if (points < 1) throw ConfigError("link grid needs at least one point");
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) throw ConfigError("link grid quantiles must satisfy 0 <= lo < hi <= 1");
  const Eigen::VectorXd t = data.w * beta;
  const std::vector<double> values(t.data(), t.data() + t.size());
  const double a = quantile(values, lo);
  const double b = quantile(values, hi);
  std::vector<double> grid;
  if (points == 1) return {0.5 * (a + b)};
  for (int k = 0; k < points; ++k) grid.push_back(a + (b - a) * k / (points - 1));
  return grid;
}

LinkEstimate estimate_link(const Dataset& data, const MeasurementErrorSpec& me,
                           const SimexConfig& cfg, const UnitIndex& beta_simex,
                           const std::vector<double>& grid) {
  cfg.validate();
  check_dimensions(data, me);
  if (grid.empty()) throw ConfigError("link evaluation grid is empty");
  if (beta_simex.dim() != data.p()) throw DimensionMismatch("index dimension does not match W");

  const BandwidthSet bw = cfg.bandwidths ? *cfg.bandwidths : rule_of_thumb(data, initial_beta(data));
  const KernelSpec spec{cfg.kernel, bw.h2};
  const std::size_t M = cfg.lambda_grid.size();
  const auto B = static_cast<std::size_t>(cfg.B);
  const std::size_t K = grid.size();

  // values[b][m][k]; NaN marks a smoothing failure.
  using Surface = std::vector<std::vector<double>>;
  auto smooth_all = [&](const Eigen::MatrixXd& w) {
    const LocalLinearSmoother smoother(w * beta_simex.beta, data.y);
    std::vector<double> out(K);
    for (std::size_t k = 0; k < K; ++k) {
      try {
        out[k] = smoother.fit(grid[k], spec).g_hat;
      } catch (const SingularFit&) {
        out[k] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    return out;
  };
  const std::vector<double> at_zero = smooth_all(data.w);
  std::vector<Surface> values(B, Surface(M));
  parallel_for(B, [&](std::size_t b) {
    values[b][0] = at_zero;
    const Eigen::MatrixXd u = draw_pseudo_errors(data.n(), data.p(), cfg.seed, b);
    for (std::size_t m = 1; m < M; ++m) values[b][m] = smooth_all(remeasure(data, me, cfg.lambda_grid[m], u));
  });

  LinkEstimate out;
  std::vector<Eigen::VectorXd> kept_rows;
  std::vector<double> simex_vals, naive_vals;
  for (std::size_t k = 0; k < K; ++k) {
    Eigen::VectorXd row(static_cast<Eigen::Index>(M));
    bool ok = true;
    for (std::size_t m = 0; m < M && ok; ++m) {
      double sum = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double v = values[b][m][k];
        if (std::isnan(v)) {
          ok = false;
          break;
        }
        sum += v;
      }
      row[static_cast<Eigen::Index>(m)] = sum / static_cast<double>(B);
    }
    if (!ok) {
      out.excluded.push_back(grid[k]);
      continue;
    }
    out.grid.push_back(grid[k]);
    kept_rows.push_back(row);
    simex_vals.push_back(quadratic_extrapolate(cfg.lambda_grid, row).at_minus_1);
    naive_vals.push_back(row[0]);
  }
  const auto kept = static_cast<Eigen::Index>(kept_rows.size());
  out.per_lambda.resize(kept, static_cast<Eigen::Index>(M));
  for (Eigen::Index k = 0; k < kept; ++k) out.per_lambda.row(k) = kept_rows[static_cast<std::size_t>(k)].transpose();
  out.g_simex = Eigen::Map<const Eigen::VectorXd>(simex_vals.data(), kept);
  out.g_naive = Eigen::Map<const Eigen::VectorXd>(naive_vals.data(), kept);
  return out;
}

}  // namespace simex
