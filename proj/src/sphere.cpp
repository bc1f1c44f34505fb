#include "simex/sphere.hpp"

#include <cmath>
#include <string>

#include "simex/errors.hpp"

namespace simex {

namespace {

double anchor_value(const Eigen::VectorXd& beta_r) {
  const double sq = beta_r.squaredNorm();
  if (!(sq < 1.0))
    throw OutOfBall("reduced index has norm " + std::to_string(std::sqrt(sq)) + " >= 1");
  return std::sqrt(1.0 - sq);
}

}  // namespace

Eigen::Index largest_abs_coordinate(const Eigen::VectorXd& v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  return idx;
}

UnitIndex make_unit_index(const Eigen::VectorXd& v) {
  return make_unit_index(v, largest_abs_coordinate(v));
}

UnitIndex make_unit_index(const Eigen::VectorXd& v, Eigen::Index anchor) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw OutOfBall("cannot normalise a zero or non-finite vector");
  if (anchor < 0 || anchor >= v.size()) throw ConfigError("anchor coordinate out of range");
  if (v[anchor] == 0.0) throw OutOfBall("anchor coordinate is zero");
  UnitIndex u;
  u.beta = v / norm;
  if (u.beta[anchor] < 0.0) u.beta = -u.beta;
  u.anchor = anchor;
  return u;
}

ReducedIndex reduce(const UnitIndex& u) {
  const Eigen::Index p = u.beta.size();
  ReducedIndex r;
  r.anchor = u.anchor;
  r.beta_r.resize(p - 1);
  for (Eigen::Index s = 0, k = 0; s < p; ++s)
    if (s != u.anchor) r.beta_r[k++] = u.beta[s];
  return r;
}

UnitIndex expand(const ReducedIndex& v) {
  const double a = anchor_value(v.beta_r);
  const Eigen::Index p = v.dim();
  UnitIndex u;
  u.anchor = v.anchor;
  u.beta.resize(p);
  for (Eigen::Index s = 0, k = 0; s < p; ++s) u.beta[s] = (s == v.anchor) ? a : v.beta_r[k++];
  return u;
}

Eigen::MatrixXd jacobian(const ReducedIndex& v) {
  const double a = anchor_value(v.beta_r);
  const Eigen::Index p = v.dim();
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(p, p - 1);
  for (Eigen::Index s = 0, k = 0; s < p; ++s) {
    if (s == v.anchor)
      j.row(s) = -v.beta_r.transpose() / a;
    else
      j(s, k++) = 1.0;
  }
  return j;
}

Eigen::VectorXd align_sign(const Eigen::VectorXd& candidate, const Eigen::VectorXd& reference) {
  return candidate.dot(reference) < 0.0 ? Eigen::VectorXd(-candidate) : candidate;
}

double line_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ua = a.normalized();
  const Eigen::VectorXd ub = b.normalized();
  const double c = ua.dot(ub);
  return std::atan2((ub - c * ua).norm(), std::abs(c));
}

}  // namespace simex
