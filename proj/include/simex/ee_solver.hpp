#pragma once

#include <vector>

#include <Eigen/Dense>

#include "simex/dataset.hpp"
#include "simex/kernel.hpp"
#include "simex/sphere.hpp"

namespace simex {

struct SolverConfig {
  int max_iter = 100;
  double tol_step = 1e-8;
  double tol_residual = 1e-6;
  double h = 0.0;   // bandwidth for g_hat
  double h1 = 0.0;  // bandwidth for g_hat'
  KernelFamily kernel = KernelFamily::epanechnikov;

  void validate() const;
};

struct SolverStep {
  double objective = 0.0;
  double residual_norm = 0.0;
  bool descent = false;  // false when no halving decreased G and the best residual-reducing trial was taken
};

struct EESolution {
  UnitIndex beta;
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
  double objective = 0.0;  // least-squares objective G at beta
  std::vector<SolverStep> trace;
};

/// OLS of y on (1, W); the slope normalised with its largest-|.| coordinate positive.
/// Throws RankDeficient for a collinear design and ZeroSlope for a vanishing slope.
UnitIndex initial_beta(const Dataset& data);

/// Estimating function and its scoring matrix at one index value.
struct EstimatingEquation {
  Eigen::VectorXd q;   // (p-1): n^{-1} sum_i [y_i - g(t_i)] g'(t_i) J^T w_i
  Eigen::MatrixXd bn;  // (p-1)x(p-1): n^{-1} sum_i g'(t_i)^2 J^T w_i w_i^T J
  double objective = 0.0;
};

EstimatingEquation estimating_function(const ReducedIndex& v, const Dataset& data,
                                       const SolverConfig& cfg);

/// Profile least-squares objective G(beta) = sum_i [y_i - g_hat(beta; beta^T w_i)]^2
/// with g_hat smoothed at bandwidth h.
double objective_G(const Eigen::VectorXd& beta, const Dataset& data, const SolverConfig& cfg);

/// Fisher scoring on the estimating equation with step-halving on G.
/// Non-convergence is reported through EESolution::converged.
EESolution solve(const Dataset& data, const SolverConfig& cfg, const UnitIndex& start);

}  // namespace simex
