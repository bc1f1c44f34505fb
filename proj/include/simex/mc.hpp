#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "simex/bandwidth.hpp"
#include "simex/dataset.hpp"
#include "simex/ee_solver.hpp"
#include "simex/simex.hpp"

namespace simex::mc {

enum class LinkKind { paper_quadratic };

/// g(t) = -2 (t - 1)^2 + 1.
double true_link(LinkKind link, double t);

/// Y = g(beta^T X) + eps, W = X + U with X ~ N(0, I_p), eps ~ N(0, sigma_eps^2)
/// and U ~ N(0, diag(sigma_u^2, 0, ..., 0)).
struct DgpSpec {
  int n = 100;
  Eigen::VectorXd beta_true;
  double sigma_u = 0.0;
  double sigma_eps = 0.2;
  LinkKind link = LinkKind::paper_quadratic;

  /// beta = (sqrt(3)/3, sqrt(6)/3).
  static DgpSpec paper(int n, double sigma_u);

  void validate() const;
  Eigen::VectorXd error_variances() const;
};

struct SimulatedData {
  Dataset data;
  Eigen::MatrixXd latent_x;
};

SimulatedData generate(const DgpSpec& dgp, std::uint64_t seed);

/// Builds a dataset from given latent covariates and noise draws.
SimulatedData assemble(const DgpSpec& dgp, const Eigen::MatrixXd& latent_x,
                       const Eigen::VectorXd& eps, const Eigen::MatrixXd& u);

double rmse(const Eigen::VectorXd& g_hat, const Eigen::VectorXd& g_true);

/// Minimiser of G over beta(theta) = (cos theta, sin theta), theta = k pi / grid_size.
/// Ties go to the smallest theta. Requires p = 2.
UnitIndex angle_grid_oracle(const Dataset& data, const SolverConfig& cfg, int grid_size);

struct StudyCell {
  int n = 100;
  double sigma_u = 0.4;
};

struct StudyOptions {
  int reps = 100;
  BandwidthMethod bandwidth = BandwidthMethod::rule_of_thumb;
  bool link = true;
  int link_grid_points = 15;
  CvOptions cv;
  int cv_candidates = 10;
};

struct ComponentSummary {
  double bias = 0.0;
  double sd = 0.0;      // divisor reps
  double mc_se = 0.0;   // sd / sqrt(reps)
};

struct RmseSummary {
  double mean = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct MethodSummary {
  std::vector<ComponentSummary> components;
  Eigen::MatrixXd estimates;  // reps x p, aligned to beta_true
  RmseSummary rmse;
  std::vector<double> rmse_values;
  Eigen::VectorXd mean_curve;  // replication average of g_hat on link_grid
};

struct CellReport {
  StudyCell cell;
  BandwidthMethod bandwidth = BandwidthMethod::rule_of_thumb;
  int reps = 0;
  int failed_reps = 0;
  bool flagged = false;  // more than 20% of replications failed
  MethodSummary simex;
  MethodSummary naive;
  std::vector<double> link_grid;
  Eigen::VectorXd true_curve;
};

struct McReport {
  std::uint64_t seed = 0;
  int reps = 0;
  std::vector<CellReport> cells;
  double runtime_seconds = 0.0;
};

/// Bias/SD study over (n, sigma_u) cells of the quadratic-link design.
McReport run_study(const std::vector<StudyCell>& cells, const StudyOptions& options,
                   const SimexConfig& cfg_template, std::uint64_t seed);

/// Mean and divisor-n SD of each column.
std::vector<ComponentSummary> summarize(const Eigen::MatrixXd& estimates,
                                        const Eigen::VectorXd& truth);

}  // namespace simex::mc
