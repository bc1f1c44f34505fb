#include "simex/mc.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "simex/errors.hpp"
#include "simex/parallel.hpp"
#include "simex/rng.hpp"

namespace simex::mc {

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

RmseSummary summarize_rmse(std::vector<double> values) {
  RmseSummary s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.median = quantile_sorted(values, 0.5);
  s.q25 = quantile_sorted(values, 0.25);
  s.q75 = quantile_sorted(values, 0.75);
  return s;
}

std::uint64_t cell_key(const StudyCell& cell) {
  return mix64(static_cast<std::uint64_t>(cell.n)) ^ std::bit_cast<std::uint64_t>(cell.sigma_u);
}

struct RepOutcome {
  bool ok = false;
  Eigen::VectorXd simex;
  Eigen::VectorXd naive;
  Eigen::VectorXd curve_simex;  // NaN where the point was excluded
  Eigen::VectorXd curve_naive;
  double rmse_simex = 0.0;
  double rmse_naive = 0.0;
};

MethodSummary collect(const std::vector<RepOutcome>& reps, bool simex_side,
                      const Eigen::VectorXd& truth, std::size_t grid_points, bool link) {
  MethodSummary out;
  std::vector<const RepOutcome*> ok;
  for (const auto& r : reps)
    if (r.ok) ok.push_back(&r);
  const auto count = static_cast<Eigen::Index>(ok.size());
  out.estimates.resize(count, truth.size());
  for (Eigen::Index k = 0; k < count; ++k)
    out.estimates.row(k) = (simex_side ? ok[static_cast<std::size_t>(k)]->simex : ok[static_cast<std::size_t>(k)]->naive).transpose();
  out.components = summarize(out.estimates, truth);
  if (!link) return out;

  out.mean_curve = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_points));
  for (std::size_t g = 0; g < grid_points; ++g) {
    double sum = 0.0;
    int used = 0;
    for (const RepOutcome* r : ok) {
      const double v = (simex_side ? r->curve_simex : r->curve_naive)[static_cast<Eigen::Index>(g)];
      if (std::isnan(v)) continue;
      sum += v;
      ++used;
    }
    out.mean_curve[static_cast<Eigen::Index>(g)] = used > 0 ? sum / used : std::numeric_limits<double>::quiet_NaN();
  }
  for (const RepOutcome* r : ok) out.rmse_values.push_back(simex_side ? r->rmse_simex : r->rmse_naive);
  out.rmse = summarize_rmse(out.rmse_values);
  return out;
}

}  // namespace

double true_link(LinkKind link, double t) {
  switch (link) {
    case LinkKind::paper_quadratic:
      return -2.0 * (t - 1.0) * (t - 1.0) + 1.0;
  }
  return 0.0;
}

DgpSpec DgpSpec::paper(int n, double sigma_u) {
  DgpSpec d;
  d.n = n;
  d.beta_true = Eigen::Vector2d(std::sqrt(3.0) / 3.0, std::sqrt(6.0) / 3.0);
  d.sigma_u = sigma_u;
  return d;
}

void DgpSpec::validate() const {
  if (n < 4) throw ConfigError("simulation needs n >= 4");
  if (beta_true.size() < 2) throw ConfigError("beta_true needs p >= 2");
  if (std::abs(beta_true.norm() - 1.0) > 1e-12) throw ConfigError("beta_true must have unit norm");
  if (!(sigma_u >= 0.0) || !(sigma_eps >= 0.0)) throw ConfigError("noise scales must be nonnegative");
}

Eigen::VectorXd DgpSpec::error_variances() const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(beta_true.size());
  v[0] = sigma_u * sigma_u;
  return v;
}

SimulatedData assemble(const DgpSpec& dgp, const Eigen::MatrixXd& latent_x,
                       const Eigen::VectorXd& eps, const Eigen::MatrixXd& u) {
  if (latent_x.cols() != dgp.beta_true.size() || u.rows() != latent_x.rows() ||
      u.cols() != latent_x.cols() || eps.size() != latent_x.rows())
    throw DimensionMismatch("latent covariates, noise and measurement errors disagree in shape");
  SimulatedData out;
  out.latent_x = latent_x;
  const Eigen::VectorXd index = latent_x * dgp.beta_true;
  out.data.y.resize(index.size());
  for (Eigen::Index i = 0; i < index.size(); ++i) out.data.y[i] = true_link(dgp.link, index[i]) + eps[i];
  out.data.w = latent_x + u;
  return out;
}

SimulatedData generate(const DgpSpec& dgp, std::uint64_t seed) {
  dgp.validate();
  Engine engine(seed);
  std::normal_distribution<double> normal;
  const Eigen::Index n = dgp.n;
  const Eigen::Index p = dgp.beta_true.size();
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd eps(n);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = normal(engine);
    eps[i] = dgp.sigma_eps * normal(engine);
    u(i, 0) = dgp.sigma_u * normal(engine);
  }
  return assemble(dgp, x, eps, u);
}

double rmse(const Eigen::VectorXd& g_hat, const Eigen::VectorXd& g_true) {
  if (g_hat.size() != g_true.size()) throw DimensionMismatch("rmse inputs differ in length");
  if (g_hat.size() == 0) throw DimensionMismatch("rmse needs at least one grid point");
  return std::sqrt((g_hat - g_true).squaredNorm() / static_cast<double>(g_hat.size()));
}

UnitIndex angle_grid_oracle(const Dataset& data, const SolverConfig& cfg, int grid_size) {
  if (data.p() != 2) throw DimensionMismatch("angle grid oracle requires p = 2");
  if (grid_size < 1) throw ConfigError("grid_size must be positive");
  double best = std::numeric_limits<double>::infinity();
  Eigen::Vector2d best_beta(1.0, 0.0);
  for (int k = 0; k < grid_size; ++k) {
    const double theta = std::acos(-1.0) * k / grid_size;
    const Eigen::Vector2d beta(std::cos(theta), std::sin(theta));
    double g = std::numeric_limits<double>::infinity();
    try {
      g = objective_G(beta, data, cfg);
    } catch (const SingularFit&) {
    }
    if (g < best) {
      best = g;
      best_beta = beta;
    }
  }
  return make_unit_index(best_beta);
}

std::vector<ComponentSummary> summarize(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& truth) {
  std::vector<ComponentSummary> out(static_cast<std::size_t>(truth.size()));
  const auto reps = static_cast<double>(estimates.rows());
  if (estimates.rows() == 0) return out;
  for (Eigen::Index j = 0; j < truth.size(); ++j) {
    const Eigen::VectorXd col = estimates.col(j);
    const double mean = col.mean();
    ComponentSummary& s = out[static_cast<std::size_t>(j)];
    s.bias = mean - truth[j];
    s.sd = std::sqrt((col.array() - mean).square().sum() / reps);
    s.mc_se = s.sd / std::sqrt(reps);
  }
  return out;
}

McReport run_study(const std::vector<StudyCell>& cells, const StudyOptions& options,
                   const SimexConfig& cfg_template, std::uint64_t seed) {
  if (options.reps < 1) throw ConfigError("reps must be >= 1");
  cfg_template.validate();
  const auto started = std::chrono::steady_clock::now();

  McReport report;
  report.seed = seed;
  report.reps = options.reps;
  const auto R = static_cast<std::size_t>(options.reps);

  for (const StudyCell& cell : cells) {
    const DgpSpec dgp = DgpSpec::paper(cell.n, cell.sigma_u);
    const MeasurementErrorSpec me = MeasurementErrorSpec::diagonal(dgp.error_variances());
    const std::uint64_t key = cell_key(cell);

    std::vector<SimulatedData> samples;
    samples.reserve(R);
    std::vector<double> pooled_index;
    for (std::size_t r = 0; r < R; ++r) {
      samples.push_back(generate(dgp, substream_seed(seed, {key, r, 0})));
      const Eigen::VectorXd t = samples.back().latent_x * dgp.beta_true;
      pooled_index.insert(pooled_index.end(), t.data(), t.data() + t.size());
    }

    CellReport cr;
    cr.cell = cell;
    cr.bandwidth = options.bandwidth;
    cr.reps = options.reps;
    if (options.link) {
      std::sort(pooled_index.begin(), pooled_index.end());
      const double lo = quantile_sorted(pooled_index, 0.05);
      const double hi = quantile_sorted(pooled_index, 0.95);
      const int K = options.link_grid_points;
      cr.true_curve.resize(K);
      for (int k = 0; k < K; ++k) {
        const double t = K == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * k / (K - 1);
        cr.link_grid.push_back(t);
        cr.true_curve[k] = true_link(dgp.link, t);
      }
    }

    std::vector<RepOutcome> outcomes(R);
    parallel_for(R, [&](std::size_t r) {
      const Dataset& data = samples[r].data;
      SimexConfig cfg = cfg_template;
      cfg.seed = substream_seed(seed, {key, r, 1});
      RepOutcome& out = outcomes[r];
      try {
        if (options.bandwidth == BandwidthMethod::rule_of_thumb) {
          cfg.bandwidths.reset();
        } else if (options.bandwidth == BandwidthMethod::cross_validation) {
          const std::vector<double> candidates =
              default_cv_candidates(data, initial_beta(data), options.cv_candidates);
          cfg.bandwidths = cv_bandwidth(data, me, cfg, candidates, options.cv).bandwidths;
        }
        const SimexBetaResult fit = estimate_beta(data, me, cfg);
        out.simex = align_sign(fit.beta_simex.beta, dgp.beta_true);
        out.naive = align_sign(fit.beta_naive.beta, dgp.beta_true);
        if (options.link) {
          cfg.bandwidths = fit.bandwidths;
          const LinkEstimate link = estimate_link(data, me, cfg, fit.beta_simex, cr.link_grid);
          const auto K = static_cast<Eigen::Index>(cr.link_grid.size());
          out.curve_simex = Eigen::VectorXd::Constant(K, std::numeric_limits<double>::quiet_NaN());
          out.curve_naive = out.curve_simex;
          Eigen::VectorXd truth_kept(static_cast<Eigen::Index>(link.grid.size()));
          for (std::size_t k = 0, kept = 0; k < cr.link_grid.size() && kept < link.grid.size(); ++k) {
            if (link.grid[kept] != cr.link_grid[k]) continue;
            const auto ki = static_cast<Eigen::Index>(k);
            const auto kk = static_cast<Eigen::Index>(kept);
            out.curve_simex[ki] = link.g_simex[kk];
            out.curve_naive[ki] = link.g_naive[kk];
            truth_kept[kk] = cr.true_curve[ki];
            ++kept;
          }
          if (link.grid.empty()) throw SingularFit("link estimate failed at every grid point");
          out.rmse_simex = rmse(link.g_simex, truth_kept);
          out.rmse_naive = rmse(link.g_naive, truth_kept);
        }
        out.ok = true;
      } catch (const Error& e) {
        if (e.error_class() == ErrorClass::config) throw;
        out.ok = false;
      }
    });

    for (const auto& o : outcomes)
      if (!o.ok) ++cr.failed_reps;
    cr.flagged = cr.failed_reps > 0.2 * options.reps;
    cr.simex = collect(outcomes, true, dgp.beta_true, cr.link_grid.size(), options.link);
    cr.naive = collect(outcomes, false, dgp.beta_true, cr.link_grid.size(), options.link);
    report.cells.push_back(std::move(cr));
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace simex::mc
