#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace simex {

enum class KernelFamily { epanechnikov };

struct KernelSpec {
  KernelFamily family = KernelFamily::epanechnikov;
  double bandwidth = 1.0;

  void validate() const;
};

/// Unscaled kernel K(v); zero outside (-1, 1).
double kernel_unit(double v, KernelFamily family = KernelFamily::epanechnikov);

/// Scaled kernel K_h(u) = K(u / h) / h.
double kernel_eval(double u, const KernelSpec& spec);

struct KernelMoments {
  double s0 = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
};

/// S_l = n^{-1} sum_i (t_i - t0)^l K_h(t_i - t0), l = 0..3. No bandwidth inflation.
KernelMoments moments_S(double t0, const Eigen::VectorXd& index_values, const KernelSpec& spec);

struct LocalLinearFit {
  double g_hat = 0.0;
  double g_prime_hat = 0.0;
  std::size_t effective_n = 0;
  double bandwidth_used = 0.0;
};

/// Bandwidth inflation applied when a neighbourhood is degenerate.
inline constexpr double kInflationFactor = 1.5;
inline constexpr int kMaxInflations = 8;

/// Local linear estimate of g(t0) and g'(t0). Throws SingularFit when fewer than
/// two distinct index values carry weight even after maximal inflation.
LocalLinearFit local_linear_fit(double t0, const Eigen::VectorXd& index_values,
                                const Eigen::VectorXd& responses, const KernelSpec& spec);

/// Hat-matrix rows of the local linear smoother: g_hat = m . y, g_prime_hat = m_tilde . y.
struct SmootherWeights {
  Eigen::VectorXd m;
  Eigen::VectorXd m_tilde;
  double bandwidth_used = 0.0;
};

SmootherWeights smoother_weights(double t0, const Eigen::VectorXd& index_values,
                                 const KernelSpec& spec);

/// Local linear smoother over a fixed sample, sorted once so that each
/// evaluation only touches observations inside the kernel window.
class LocalLinearSmoother {
 public:
  LocalLinearSmoother(const Eigen::VectorXd& index_values, const Eigen::VectorXd& responses);

  LocalLinearFit fit(double t0, const KernelSpec& spec) const;

  /// g_hat with bandwidth h and g_hat' with bandwidth h1 at every observed index
  /// value, in the original observation order. One sliding-window sweep; falls
  /// back to fit() where a window needs inflation.
  struct DesignFits {
    Eigen::VectorXd g;
    Eigen::VectorXd g_prime;
  };
  DesignFits fit_design_points(double h, double h1, KernelFamily family = KernelFamily::epanechnikov) const;

  std::size_t size() const { return t_.size(); }

 private:
  std::vector<double> t_;
  std::vector<double> y_;
  std::vector<std::size_t> order_;  // sorted position -> original observation
};

}  // namespace simex
