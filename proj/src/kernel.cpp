#include "simex/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "simex/errors.hpp"

namespace simex {

namespace {

// Windows whose weighted design has 1 - corr^2 below this are degenerate.
constexpr double kMinRelativeDet = 1e-12;

// Unnormalised kernel-weighted sums in scaled coordinates. The common factors
// 1/n and 1/h cancel in every ratio used below.
struct WindowSums {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  double c0 = 0.0, c1 = 0.0;
  std::size_t count = 0;

  void add(double u, double y) {
    const double k = kernel_unit(u);
    if (k <= 0.0) return;
    add_weighted(k, u, y);
  }

  void add_weighted(double k, double u, double y) {
    const double ku = k * u;
    s0 += k;
    s1 += ku;
    s2 += ku * u;
    c0 += k * y;
    c1 += ku * y;
    ++count;
  }

  bool usable() const {
    return count >= 2 && s0 * s2 - s1 * s1 > kMinRelativeDet * s0 * s2;
  }
};

struct NormalSystem {
  double d00, d11, off, det;
};

NormalSystem normal_system(const WindowSums& w) {
  return {w.s0, w.s2, w.s1, w.s0 * w.s2 - w.s1 * w.s1};
}

[[noreturn]] void throw_singular(double t0, double h) {
  throw SingularFit("local linear fit at t0=" + std::to_string(t0) +
                    " has fewer than two distinct weighted points (bandwidth up to " +
                    std::to_string(h) + ")");
}

// Calls accumulate(h, sums) for h, 1.5h, ... until the window is usable.
template <class Accumulate>
std::pair<WindowSums, double> inflate_until_usable(double t0, double h0, Accumulate accumulate) {
  double h = h0;
  for (int attempt = 0; attempt <= kMaxInflations; ++attempt) {
    WindowSums sums;
    accumulate(h, sums);
    if (sums.usable()) {
      const NormalSystem ns = normal_system(sums);
      if (ns.det > 0.0 && std::isfinite(ns.det)) return {sums, h};
    }
    h *= kInflationFactor;
  }
  throw_singular(t0, h / kInflationFactor);
}

LocalLinearFit finish(const WindowSums& w, double h) {
  const NormalSystem ns = normal_system(w);
  LocalLinearFit fit;
  fit.g_hat = (ns.d11 * w.c0 - ns.off * w.c1) / ns.det;
  fit.g_prime_hat = (ns.d00 * w.c1 - ns.off * w.c0) / ns.det / h;
  fit.effective_n = w.count;
  fit.bandwidth_used = h;
  return fit;
}

void check_same_length(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw DimensionMismatch("index values and responses differ in length");
  if (a.size() < 2) throw DimensionMismatch("local linear fit needs at least two observations");
}

}  // namespace

void KernelSpec::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw ConfigError("kernel bandwidth must be positive and finite");
}

double kernel_unit(double v, KernelFamily family) {
  switch (family) {
    case KernelFamily::epanechnikov:
      return std::abs(v) < 1.0 ? 0.75 * (1.0 - v * v) : 0.0;
  }
  return 0.0;
}

double kernel_eval(double u, const KernelSpec& spec) {
  spec.validate();
  return kernel_unit(u / spec.bandwidth, spec.family) / spec.bandwidth;
}

KernelMoments moments_S(double t0, const Eigen::VectorXd& index_values, const KernelSpec& spec) {
  spec.validate();
  if (index_values.size() == 0) throw DimensionMismatch("moments_S needs a nonempty sample");
  KernelMoments m;
  for (Eigen::Index i = 0; i < index_values.size(); ++i) {
    const double d = index_values[i] - t0;
    const double k = kernel_eval(d, spec);
    m.s0 += k;
    m.s1 += d * k;
    m.s2 += d * d * k;
    m.s3 += d * d * d * k;
  }
  const double n = static_cast<double>(index_values.size());
  m.s0 /= n;
  m.s1 /= n;
  m.s2 /= n;
  m.s3 /= n;
  return m;
}

LocalLinearFit local_linear_fit(double t0, const Eigen::VectorXd& index_values,
                                const Eigen::VectorXd& responses, const KernelSpec& spec) {
  spec.validate();
  check_same_length(index_values, responses);
  auto [sums, h] = inflate_until_usable(t0, spec.bandwidth, [&](double bw, WindowSums& s) {
    for (Eigen::Index i = 0; i < index_values.size(); ++i)
      s.add((index_values[i] - t0) / bw, responses[i]);
  });
  return finish(sums, h);
}

SmootherWeights smoother_weights(double t0, const Eigen::VectorXd& index_values,
                                 const KernelSpec& spec) {
  spec.validate();
  const Eigen::Index n = index_values.size();
  if (n < 2) throw DimensionMismatch("smoother weights need at least two observations");
  auto [sums, h] = inflate_until_usable(t0, spec.bandwidth, [&](double bw, WindowSums& s) {
    for (Eigen::Index i = 0; i < n; ++i) s.add((index_values[i] - t0) / bw, 0.0);
  });
  const NormalSystem ns = normal_system(sums);
  SmootherWeights out;
  out.m.resize(n);
  out.m_tilde.resize(n);
  out.bandwidth_used = h;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = (index_values[i] - t0) / h;
    const double k = kernel_unit(u);
    out.m[i] = k * (ns.d11 - u * ns.off) / ns.det;
    out.m_tilde[i] = k * (ns.d00 * u - ns.off) / ns.det / h;
  }
  return out;
}

LocalLinearSmoother::LocalLinearSmoother(const Eigen::VectorXd& index_values,
                                         const Eigen::VectorXd& responses) {
  check_same_length(index_values, responses);
  const auto n = static_cast<std::size_t>(index_values.size());
  std::vector<std::pair<double, std::size_t>> keyed(n);
  for (std::size_t i = 0; i < n; ++i) keyed[i] = {index_values[static_cast<Eigen::Index>(i)], i};
  std::sort(keyed.begin(), keyed.end());
  t_.reserve(n);
  y_.reserve(n);
  order_.reserve(n);
  for (const auto& [t, i] : keyed) {
    t_.push_back(t);
    y_.push_back(responses[static_cast<Eigen::Index>(i)]);
    order_.push_back(i);
  }
}

LocalLinearFit LocalLinearSmoother::fit(double t0, const KernelSpec& spec) const {
  auto [sums, h] = inflate_until_usable(t0, spec.bandwidth, [&](double bw, WindowSums& s) {
    auto first = std::lower_bound(t_.begin(), t_.end(), t0 - bw);
    auto last = std::upper_bound(first, t_.end(), t0 + bw);
    for (auto it = first; it != last; ++it) {
      const auto i = static_cast<std::size_t>(it - t_.begin());
      s.add((t_[i] - t0) / bw, y_[i]);
    }
  });
  return finish(sums, h);
}

LocalLinearSmoother::DesignFits LocalLinearSmoother::fit_design_points(double h, double h1,
                                                                     KernelFamily family) const {
  KernelSpec{family, h}.validate();
  KernelSpec{family, h1}.validate();
  const std::size_t n = t_.size();
  DesignFits out{Eigen::VectorXd(static_cast<Eigen::Index>(n)),
                 Eigen::VectorXd(static_cast<Eigen::Index>(n))};

  // Sliding window [lo, hi) of points strictly inside (t0 - bw, t0 + bw).
  auto sweep = [&](double bw, auto&& store) {
    const double inv = 1.0 / bw;
    std::size_t lo = 0, hi = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double t0 = t_[k];
      while (t_[lo] <= t0 - bw) ++lo;
      while (hi < n && t_[hi] < t0 + bw) ++hi;
      WindowSums sums;
      for (std::size_t j = lo; j < hi; ++j) {
        const double u = (t_[j] - t0) * inv;
        sums.add_weighted(0.75 * (1.0 - u * u), u, y_[j]);
      }
      const bool ok = family == KernelFamily::epanechnikov && sums.usable();
      store(static_cast<Eigen::Index>(order_[k]), ok ? finish(sums, bw) : fit(t0, {family, bw}));
    }
  };
  sweep(h, [&](Eigen::Index i, const LocalLinearFit& f) { out.g[i] = f.g_hat; });
  sweep(h1, [&](Eigen::Index i, const LocalLinearFit& f) { out.g_prime[i] = f.g_prime_hat; });
  return out;
}

}  // namespace simex
