#include "simex/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "simex/errors.hpp"
#include "simex/parallel.hpp"
#include "simex/rng.hpp"
#include "simex/simex.hpp"

namespace simex {

std::string to_string(BandwidthMethod m) {
  switch (m) {
    case BandwidthMethod::rule_of_thumb:
      return "RT";
    case BandwidthMethod::cross_validation:
      return "CV";
    case BandwidthMethod::fixed:
      return "fixed";
  }
  return "fixed";
}

BandwidthMethod bandwidth_method_from_string(const std::string& s) {
  if (s == "RT" || s == "rt") return BandwidthMethod::rule_of_thumb;
  if (s == "CV" || s == "cv") return BandwidthMethod::cross_validation;
  if (s == "fixed") return BandwidthMethod::fixed;
  throw ConfigError("unknown bandwidth method '" + s + "' (expected RT, CV or fixed)");
}

void BandwidthSet::validate() const {
  for (double v : {h, h1, h2})
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("bandwidths must be positive and finite");
}

BandwidthSet rule_of_thumb_from_scale(double c, Eigen::Index n) {
  const double nn = static_cast<double>(n);
  BandwidthSet bw;
  bw.h = c * std::pow(nn, -0.25) / std::sqrt(std::log(nn));
  bw.h1 = c * std::pow(nn, -0.2);
  bw.h2 = bw.h1;
  bw.method = BandwidthMethod::rule_of_thumb;
  return bw;
}

BandwidthSet rule_of_thumb(const Dataset& data, const UnitIndex& beta_int) {
  const Eigen::Index n = data.n();
  if (n < 3) throw DimensionMismatch("rule of thumb needs n >= 3");
  const Eigen::VectorXd t = data.w * beta_int.beta;
  const double var = (t.array() - t.mean()).square().sum() / static_cast<double>(n - 1);
  if (!(var > 1e-20 * t.squaredNorm() / static_cast<double>(n))) throw DegenerateIndex("index values beta_int^T W have zero variance");
  return rule_of_thumb_from_scale(std::sqrt(var), n);
}

BandwidthSet bandwidths_from_cv_optimum(double h_opt, Eigen::Index n) {
  const double nn = static_cast<double>(n);
  BandwidthSet bw;
  bw.h = h_opt * std::pow(nn, -0.05) / std::sqrt(std::log(nn));
  bw.h1 = h_opt;
  bw.h2 = h_opt;
  bw.method = BandwidthMethod::cross_validation;
  return bw;
}

std::vector<double> default_cv_candidates(const Dataset& data, const UnitIndex& beta_int, int count) {
  if (count < 2) throw ConfigError("need at least two CV candidates");
  const double base = rule_of_thumb(data, beta_int).h1;
  std::vector<double> out;
  const double lo = std::log(0.3 * base);
  const double hi = std::log(3.0 * base);
  for (int k = 0; k < count; ++k) out.push_back(std::exp(lo + (hi - lo) * k / (count - 1)));
  return out;
}

std::size_t select_min_score(const std::vector<double>& candidates,
                             const std::vector<double>& scores,
                             const std::vector<bool>& disqualified) {
  if (candidates.size() != scores.size() || candidates.size() != disqualified.size())
    throw DimensionMismatch("candidates, scores and disqualification flags differ in length");
  std::size_t best = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (disqualified[i] || !std::isfinite(scores[i])) continue;
    if (best == candidates.size() || scores[i] < scores[best] ||
        (scores[i] == scores[best] && candidates[i] < candidates[best]))
      best = i;
  }
  if (best == candidates.size()) throw ConfigError("every bandwidth candidate was disqualified");
  return best;
}

CvResult cv_bandwidth(const Dataset& data, const MeasurementErrorSpec& me, const SimexConfig& cfg,
                      const std::vector<double>& candidates, const CvOptions& options) {
  data.validate();
  cfg.validate();
  if (candidates.size() < 2) throw ConfigError("cross-validation needs at least two candidates");
  for (double h : candidates)
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("bandwidth candidates must be positive");

  const Eigen::Index n = data.n();
  const int folds = options.leave_one_out ? static_cast<int>(n) : options.folds;
  if (folds < 2 || folds > n) throw ConfigError("number of CV folds must lie in [2, n]");

  // Shuffled fold labels, fixed by the seed.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (!options.leave_one_out) {
    Engine engine = substream(cfg.seed, {0xCFu});
    std::shuffle(order.begin(), order.end(), engine);
  }
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    fold_of[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(folds));

  struct FoldScore {
    bool ok = false;
    double sse = 0.0;
    int scored = 0;
  };
  const std::size_t C = candidates.size();
  const auto F = static_cast<std::size_t>(folds);
  std::vector<FoldScore> scores(C * F);

  parallel_for(C * F, [&](std::size_t job) {
    const std::size_t c = job / F;
    const int fold = static_cast<int>(job % F);
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < n; ++i) (fold_of[static_cast<std::size_t>(i)] == fold ? test : train).push_back(i);
    Dataset tr{data.y(train), data.w(train, Eigen::all)};
    SimexConfig fold_cfg = cfg;
    fold_cfg.bandwidths = bandwidths_from_cv_optimum(candidates[c], n);
    FoldScore& out = scores[job];
    try {
      const SimexBetaResult fit = estimate_beta(tr, me, fold_cfg);
      std::vector<double> points;
      for (Eigen::Index i : test) points.push_back(data.w.row(i).dot(fit.beta_simex.beta));
      const LinkEstimate link = estimate_link(tr, me, fold_cfg, fit.beta_simex, points);
      // Map surviving grid points back to their observations.
      std::size_t kept = 0;
      for (std::size_t k = 0; k < points.size() && kept < link.grid.size(); ++k) {
        if (link.grid[kept] != points[k]) continue;
        const double r = data.y[test[k]] - link.g_simex[static_cast<Eigen::Index>(kept)];
        out.sse += r * r;
        ++out.scored;
        ++kept;
      }
      out.ok = out.scored > 0;
    } catch (const Error& e) {
      if (e.error_class() != ErrorClass::estimation && e.error_class() != ErrorClass::data) throw;
    }
  });

  CvResult res;
  std::vector<double> values(C);
  std::vector<bool> disqualified(C);
  for (std::size_t c = 0; c < C; ++c) {
    CvPoint pt;
    pt.h = candidates[c];
    double sse = 0.0;
    int scored = 0;
    for (std::size_t f = 0; f < F; ++f) {
      const FoldScore& s = scores[c * F + f];
      if (!s.ok) {
        ++pt.failed_folds;
        continue;
      }
      sse += s.sse;
      scored += s.scored;
    }
    pt.disqualified = scored == 0 || pt.failed_folds > options.max_failure_fraction * static_cast<double>(F);
    pt.score = scored > 0 ? sse / scored : std::numeric_limits<double>::infinity();
    values[c] = pt.score;
    disqualified[c] = pt.disqualified;
    res.curve.push_back(pt);
  }
  const std::size_t best = select_min_score(candidates, values, disqualified);
  res.h_opt = candidates[best];
  res.bandwidths = bandwidths_from_cv_optimum(res.h_opt, n);
  return res;
}

}  // namespace simex
