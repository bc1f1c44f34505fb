#include "simex/ee_solver.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "simex/errors.hpp"

namespace simex {

namespace {

constexpr double kBnRidge = 1e-10;
constexpr int kMaxHalvings = 10;
// Re-anchor once the anchor coordinate falls below this share of the largest one.
constexpr double kAnchorShare = 0.5;

struct Evaluation {
  UnitIndex beta;
  Eigen::MatrixXd jac;
  EstimatingEquation ee;
};

Evaluation evaluate(const UnitIndex& beta, const Dataset& data, const SolverConfig& cfg) {
  Evaluation ev;
  ev.beta = beta;
  ev.jac = jacobian(reduce(beta));

  const Eigen::VectorXd t = data.w * beta.beta;
  const LocalLinearSmoother smoother(t, data.y);
  const auto fits = smoother.fit_design_points(cfg.h, cfg.h1, cfg.kernel);

  const Eigen::Index n = data.n();
  const Eigen::VectorXd resid = data.y - fits.g;
  const Eigen::VectorXd score_w = resid.cwiseProduct(fits.g_prime);  // [y - g] g'
  const Eigen::VectorXd info_w = fits.g_prime.cwiseAbs2();             // g'^2
  const double objective = resid.squaredNorm();
  const Eigen::MatrixXd z = data.w * ev.jac;
  const double inv_n = 1.0 / static_cast<double>(n);
  ev.ee.q = z.transpose() * score_w * inv_n;
  ev.ee.bn = z.transpose() * info_w.asDiagonal() * z * inv_n;
  ev.ee.objective = objective;
  return ev;
}

Eigen::VectorXd scoring_direction(const Evaluation& ev) {
  const Eigen::MatrixXd& bn = ev.ee.bn;
  const double trace = bn.trace();
  if (!(trace > 0.0) || !std::isfinite(trace))
    throw SingularBn("scoring matrix has nonpositive or non-finite trace");
  Eigen::MatrixXd guarded = bn;
  guarded.diagonal().array() += kBnRidge * trace;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(guarded);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw SingularBn("scoring matrix is not positive definite");
  const Eigen::VectorXd x = ldlt.solve(ev.ee.q);
  if (!x.allFinite()) throw SingularBn("scoring step is not finite");
  return ev.jac * x;
}

UnitIndex reanchored(const Eigen::VectorXd& v, Eigen::Index anchor) {
  const Eigen::VectorXd unit = v.normalized();
  const double largest = unit.cwiseAbs().maxCoeff();
  if (unit[anchor] > 0.0 && unit[anchor] >= kAnchorShare * largest) {
    UnitIndex u;
    u.beta = unit;
    u.anchor = anchor;
    return u;
  }
  return make_unit_index(unit);
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (!(tol_step > 0.0) || !(tol_residual > 0.0)) throw ConfigError("solver tolerances must be positive");
  if (!(h > 0.0) || !(h1 > 0.0) || !std::isfinite(h) || !std::isfinite(h1))
    throw ConfigError("solver bandwidths must be positive and finite");
}

UnitIndex initial_beta(const Dataset& data) {
  data.validate();
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  if (n <= p) throw RankDeficient("initial OLS needs n > p");
  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = data.w;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p + 1) throw RankDeficient("design matrix (1, W) is rank deficient");
  const Eigen::VectorXd coef = qr.solve(data.y);
  const Eigen::VectorXd slope = coef.tail(p);

  // Slope small relative to the scale of y per unit spread of W counts as zero.
  const Eigen::VectorXd centred_y = data.y.array() - data.y.mean();
  const double y_scale = centred_y.cwiseAbs().maxCoeff() + 1e-300;
  const double w_spread = (data.w.colwise().maxCoeff() - data.w.colwise().minCoeff()).maxCoeff();
  if (!(slope.norm() * w_spread > 1e-10 * y_scale) || centred_y.cwiseAbs().maxCoeff() == 0.0)
    throw ZeroSlope("linear fit of y on W has zero slope; no index direction");
  return make_unit_index(slope);
}

EstimatingEquation estimating_function(const ReducedIndex& v, const Dataset& data,
                                       const SolverConfig& cfg) {
  cfg.validate();
  if (data.n() < data.p() + 2) throw DimensionMismatch("pseudo-dataset needs n >= p + 2");
  if (v.dim() != data.p()) throw DimensionMismatch("index dimension does not match W");
  return evaluate(expand(v), data, cfg).ee;
}

double objective_G(const Eigen::VectorXd& beta, const Dataset& data, const SolverConfig& cfg) {
  const Eigen::VectorXd t = data.w * beta;
  const LocalLinearSmoother smoother(t, data.y);
  const KernelSpec spec{cfg.kernel, cfg.h};
  double g = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double r = data.y[i] - smoother.fit(t[i], spec).g_hat;
    g += r * r;
  }
  return g;
}

EESolution solve(const Dataset& data, const SolverConfig& cfg, const UnitIndex& start) {
  cfg.validate();
  if (start.dim() != data.p()) throw DimensionMismatch("start index dimension does not match W");

  Evaluation cur = evaluate(start, data, cfg);
  EESolution sol;
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    if (cur.ee.q.norm() <= cfg.tol_residual) {
      sol.converged = true;
      break;
    }
    const Eigen::VectorXd step = scoring_direction(cur);

    bool descent = false;
    double scale = 1.0;
    Evaluation next;
    std::optional<Evaluation> best_residual;
    for (int halving = 0; halving <= kMaxHalvings; ++halving, scale *= 0.5) {
      try {
        next = evaluate(reanchored(cur.beta.beta + scale * step, cur.beta.anchor), data, cfg);
      } catch (const SingularFit&) {
        continue;
      } catch (const OutOfBall&) {
        continue;
      }
      if (next.ee.objective <= cur.ee.objective) {
        descent = true;
        break;
      }
      if (!best_residual || next.ee.q.norm() < best_residual->ee.q.norm()) best_residual = next;
    }
    if (!descent) {
      // G is only piecewise smooth in beta and Q is not exactly its gradient;
      // without a descent step fall back to the trial that most reduces |Q|.
      if (!best_residual || !(best_residual->ee.q.norm() < cur.ee.q.norm())) {
        sol.converged = step.norm() <= cfg.tol_step;
        break;
      }
      next = std::move(*best_residual);
    }
    sol.trace.push_back({next.ee.objective, next.ee.q.norm(), descent});

    const double moved = (align_sign(next.beta.beta, cur.beta.beta) - cur.beta.beta).norm();
    cur = std::move(next);
    ++sol.iterations;
    if (moved <= cfg.tol_step) {
      sol.converged = true;
      break;
    }
  }
  sol.beta = cur.beta;
  sol.residual_norm = cur.ee.q.norm();
  sol.objective = cur.ee.objective;
  if (!sol.converged && sol.residual_norm <= cfg.tol_residual) sol.converged = true;
  return sol;
}

}  // namespace simex
