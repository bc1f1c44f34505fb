#pragma once

#include <Eigen/Dense>

namespace simex {

/// Response y and error-prone surrogates W (one row per observation).
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd w;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return w.cols(); }

  /// Throws DimensionMismatch / InvalidData when shapes or values are unusable.
  void validate() const;
};

}  // namespace simex
