#pragma once

#include <Eigen/Dense>

namespace simex {

/// Unit-norm index direction with an anchor coordinate that is strictly positive.
struct UnitIndex {
  Eigen::VectorXd beta;
  Eigen::Index anchor = 0;

  Eigen::Index dim() const { return beta.size(); }
};

/// The index with its anchor coordinate deleted; lives in the open unit ball of R^{p-1}.
struct ReducedIndex {
  Eigen::VectorXd beta_r;
  Eigen::Index anchor = 0;

  Eigen::Index dim() const { return beta_r.size() + 1; }
};

Eigen::Index largest_abs_coordinate(const Eigen::VectorXd& v);

/// Normalises v and anchors it at its largest-|.| coordinate, flipping the sign
/// so that coordinate is positive.
UnitIndex make_unit_index(const Eigen::VectorXd& v);

/// Normalises v and flips its sign so that coordinate `anchor` is positive.
/// Throws OutOfBall if that coordinate is zero.
UnitIndex make_unit_index(const Eigen::VectorXd& v, Eigen::Index anchor);

ReducedIndex reduce(const UnitIndex& u);

/// Reinserts (1 - |beta_r|^2)^{1/2} at the anchor. Throws OutOfBall when |beta_r| >= 1.
UnitIndex expand(const ReducedIndex& v);

/// p x (p-1) derivative of expand with respect to beta_r.
Eigen::MatrixXd jacobian(const ReducedIndex& v);

/// candidate or -candidate, whichever has nonnegative inner product with reference.
Eigen::VectorXd align_sign(const Eigen::VectorXd& candidate, const Eigen::VectorXd& reference);

/// Angle in [0, pi/2] between the lines spanned by a and b.
double line_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace simex
