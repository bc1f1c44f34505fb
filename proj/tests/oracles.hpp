#pragma once

// Brute-force reference computations used to cross-check the library.

#include <cmath>
#include <random>

#include <Eigen/Dense>

namespace oracle {

inline double epan(double u) { return std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0; }

/// Intercept and slope of the kernel-weighted least-squares line around t0.
inline Eigen::Vector2d wls_line(double t0, const Eigen::VectorXd& t, const Eigen::VectorXd& y, double h) {
  Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double k = epan((t[i] - t0) / h) / h;
    const Eigen::Vector2d x(1.0, t[i] - t0);
    a += k * x * x.transpose();
    b += k * y[i] * x;
  }
  return a.fullPivLu().solve(b);
}

/// Hat-matrix rows (intercept, slope) of the same fit.
inline Eigen::MatrixXd wls_hat_rows(double t0, const Eigen::VectorXd& t, double h) {
  const Eigen::Index n = t.size();
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = t[i] - t0;
    k[i] = epan((t[i] - t0) / h) / h;
  }
  const Eigen::MatrixXd xtk = x.transpose() * k.asDiagonal();
  return (xtk * x).fullPivLu().solve(xtk);  // 2 x n
}

inline Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(gen);
  return m;
}

}  // namespace oracle
