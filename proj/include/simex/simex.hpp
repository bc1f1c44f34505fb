#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "simex/bandwidth.hpp"
#include "simex/dataset.hpp"
#include "simex/ee_solver.hpp"
#include "simex/kernel.hpp"
#include "simex/sphere.hpp"

namespace simex {

/// Known covariance of the additive Gaussian measurement error and a square
/// root factor with factor * factor^T = sigma_u.
struct MeasurementErrorSpec {
  Eigen::MatrixXd sigma_u;
  Eigen::MatrixXd factor;

  /// Symmetric eigendecomposition square root; eigenvalues within -1e-10 of
  /// zero are clipped. Throws InvalidCovariance otherwise.
  static MeasurementErrorSpec from_covariance(const Eigen::MatrixXd& sigma_u);
  static MeasurementErrorSpec diagonal(const Eigen::VectorXd& variances);

  Eigen::Index dim() const { return sigma_u.rows(); }
  bool is_zero() const { return factor.isZero(0.0); }
};

struct SolverTolerances {
  int max_iter = 100;
  double tol_step = 1e-8;
  double tol_residual = 1e-6;
};

std::vector<double> default_lambda_grid();

struct SimexConfig {
  std::vector<double> lambda_grid = default_lambda_grid();
  int B = 50;
  KernelFamily kernel = KernelFamily::epanechnikov;
  std::optional<BandwidthSet> bandwidths;  // rule of thumb when unset
  SolverTolerances solver;
  std::uint64_t seed = 0;
  double max_failure_fraction = 0.2;

  void validate() const;
  SolverConfig solver_config(const BandwidthSet& bw) const;
};

/// Bandwidths configured in cfg, or the rule of thumb around beta_int.
BandwidthSet resolve_bandwidths(const Dataset& data, const UnitIndex& beta_int,
                                const SimexConfig& cfg);

/// Standard normal pseudo-errors U_b (n x p) of replicate b, shared by every lambda.
Eigen::MatrixXd draw_pseudo_errors(Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                                   std::uint64_t b);

/// W + sqrt(lambda) U L^T, so each row gains covariance lambda * sigma_u.
Eigen::MatrixXd remeasure(const Dataset& data, const MeasurementErrorSpec& me, double lambda,
                          const Eigen::MatrixXd& pseudo_errors);

/// psi_1 + psi_2 lambda + psi_3 lambda^2.
struct ExtrapolantFit {
  Eigen::Vector3d psi = Eigen::Vector3d::Zero();

  double operator()(double lambda) const { return psi[0] + psi[1] * lambda + psi[2] * lambda * lambda; }
};

struct Extrapolation {
  ExtrapolantFit fit;
  double at_minus_1 = 0.0;
};

/// Least-squares quadratic in lambda, evaluated at lambda = -1.
/// Throws SingularDesign with fewer than three distinct lambdas.
Extrapolation quadratic_extrapolate(const std::vector<double>& lambda_grid,
                                    const Eigen::VectorXd& values);

struct LambdaProfile {
  std::vector<double> lambda_grid;
  Eigen::MatrixXd estimates;  // p x M, sign-aligned b-averages, renormalised
  Eigen::MatrixXd raw_means;  // p x M, b-averages before renormalisation
};

struct LambdaDiagnostics {
  double lambda = 0.0;
  int solved = 0;
  int failed = 0;
  int not_converged = 0;
  double mean_iterations = 0.0;
};

struct SimexBetaResult {
  UnitIndex beta_simex;
  UnitIndex beta_naive;
  UnitIndex beta_int;
  Eigen::VectorXd simex_raw;  // extrapolated vector before renormalisation
  LambdaProfile profile;
  std::vector<ExtrapolantFit> extrapolants;  // one per component
  BandwidthSet bandwidths;
  std::vector<LambdaDiagnostics> diagnostics;
};

/// SIMEX estimate of the index: simulate, solve per (b, lambda), average over b,
/// extrapolate each component to lambda = -1.
SimexBetaResult estimate_beta(const Dataset& data, const MeasurementErrorSpec& me,
                              const SimexConfig& cfg);

struct LinkEstimate {
  std::vector<double> grid;
  Eigen::VectorXd g_simex;
  Eigen::VectorXd g_naive;
  Eigen::MatrixXd per_lambda;  // grid x M, b-averaged g_hat(lambda; t0)
  std::vector<double> excluded;  // requested points dropped after smoothing failures
};

/// `points` equidistant values between the lo and hi quantiles of beta^T W.
std::vector<double> default_link_grid(const Dataset& data, const Eigen::VectorXd& beta,
                                      int points = 15, double lo = 0.05, double hi = 0.95);

/// SIMEX estimate of the link on `grid`, smoothing beta_simex^T W_b(lambda) with h2.
LinkEstimate estimate_link(const Dataset& data, const MeasurementErrorSpec& me,
                           const SimexConfig& cfg, const UnitIndex& beta_simex,
                           const std::vector<double>& grid);

}  // namespace simex
