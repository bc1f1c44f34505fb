#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "simex/dataset.hpp"
#include "simex/sphere.hpp"

namespace simex {

struct MeasurementErrorSpec;
struct SimexConfig;

enum class BandwidthMethod { rule_of_thumb, cross_validation, fixed };

std::string to_string(BandwidthMethod m);
BandwidthMethod bandwidth_method_from_string(const std::string& s);

/// h smooths g, h1 smooths g', h2 smooths the extrapolated link.
struct BandwidthSet {
  double h = 0.0;
  double h1 = 0.0;
  double h2 = 0.0;
  BandwidthMethod method = BandwidthMethod::fixed;

  void validate() const;
};

/// h = c n^{-1/4} (ln n)^{-1/2}, h1 = h2 = c n^{-1/5}.
BandwidthSet rule_of_thumb_from_scale(double c, Eigen::Index n);

/// Rule of thumb with c the sample SD (divisor n-1) of beta_int^T W.
/// Throws DegenerateIndex when the index has zero spread.
BandwidthSet rule_of_thumb(const Dataset& data, const UnitIndex& beta_int);

/// h = h_opt n^{-1/20} (ln n)^{-1/2}, h1 = h2 = h_opt.
BandwidthSet bandwidths_from_cv_optimum(double h_opt, Eigen::Index n);

/// `count` log-spaced values spanning [0.3, 3] x the rule-of-thumb h1.
std::vector<double> default_cv_candidates(const Dataset& data, const UnitIndex& beta_int,
                                          int count = 10);

/// Index of the smallest non-disqualified score; ties go to the smaller candidate.
/// Throws ConfigError when every candidate is disqualified.
std::size_t select_min_score(const std::vector<double>& candidates,
                             const std::vector<double>& scores,
                             const std::vector<bool>& disqualified);

struct CvOptions {
  int folds = 10;
  bool leave_one_out = false;
  double max_failure_fraction = 0.2;
};

struct CvPoint {
  double h = 0.0;
  double score = 0.0;  // mean squared held-out prediction error
  int failed_folds = 0;
  bool disqualified = false;
};

struct CvResult {
  double h_opt = 0.0;
  BandwidthSet bandwidths;
  std::vector<CvPoint> curve;
};

/// Cross-validated SIMEX bandwidth. Each candidate runs the full SIMEX fit of
/// beta and g on the training folds and scores y against the extrapolated link
/// at the held-out W (the latent X is unobservable).
CvResult cv_bandwidth(const Dataset& data, const MeasurementErrorSpec& me, const SimexConfig& cfg,
                      const std::vector<double>& candidates, const CvOptions& options = {});

}  // namespace simex
