#include "covertime/excursions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "covertime/stats.hpp"

namespace covertime::excursions {

namespace {

constexpr int kKernelBins = 12;

double clip_delta(double delta) {
  const double hi = 0.5 - 1e-12;
  return std::min(std::max(delta, 1e-12), hi);
}

}  // namespace

double mean_cycle_exact(double R, double r) {
  if (!(0.0 < r && r < R && R < 0.5))
    throw std::domain_error("mean_cycle_exact: need 0 < r < R < 1/2");
  return std::log(R / r) / std::numbers::pi;
}

CycleStats equilibrium_cycles(const torus::TorusPoint& center, double R,
                              double r, int n, int burn_in,
                              const torus::SimConfig& config, Rng& rng) {
  if (!(0.0 < r && r < R && R < 0.5))
    throw std::domain_error("equilibrium_cycles: need 0 < r < R < 1/2");
  if (n < 1) throw std::domain_error("equilibrium_cycles: need n >= 1");
  if (burn_in < 0) burn_in = 0;

  // One cycle is departure -> return -> departure, so n + burn_in cycles need
  // n + burn_in + 1 departures.
  const double budget = static_cast<double>(n + burn_in + 1);
  const auto trace =
      torus::excursion_decompose(center, R, r, budget, config, rng);

  CycleStats out;
  out.burn_in = burn_in;
  out.cycle_times.reserve(static_cast<std::size_t>(n));
  out.out_in_legs.reserve(static_cast<std::size_t>(n));
  out.in_out_legs.reserve(static_cast<std::size_t>(n));
  double last_departure = -1.0;
  double last_return = -1.0;
  int completed = 0;
  for (const auto& ev : trace.events) {
    if (ev.kind == torus::EventKind::kReturn) {
      last_return = ev.time;
      continue;
    }
    if (last_departure >= 0.0) {
      ++completed;
      if (completed > burn_in) {
        out.cycle_times.push_back(ev.time - last_departure);
        out.out_in_legs.push_back(last_return - last_departure);
        out.in_out_legs.push_back(ev.time - last_return);
      }
    }
    last_departure = ev.time;
  }
  out.n_cycles = static_cast<int>(out.cycle_times.size());
  return out;
}

double minorization_q(double R, double r) {
  if (!(0.0 < r && r < R && R < 0.5))
    throw std::domain_error("minorization_q: need 0 < r < R < 1/2");
  const double q = (R - r) / (R + r);
  return q * q;
}

harness::TestReport minorization_kernel_check(const torus::TorusPoint& center,
                                              double R, double r,
                                              std::int64_t N, Rng& rng) {
  const double q = minorization_q(R, r);
  if (N < kKernelBins * 50)
    throw std::domain_error("minorization_kernel_check: N too small");

  // Exit locations of B(center, R) started from the worst point of the inner
  // circle; by rotational symmetry of the kernel any point on it will do.
  const torus::TorusPoint z = torus::wrap({center.x + r, center.y});
  std::vector<std::int64_t> counts(kKernelBins, 0);
  for (std::int64_t i = 0; i < N; ++i) {
    const auto b = torus::disc_exit_sample(center, R, z, rng);
    const auto d = torus::minimal_delta(center, b);
    const double phi = std::atan2(d[1], d[0]);  // in [-pi, pi]
    int bin = static_cast<int>((phi + std::numbers::pi) /
                               (2.0 * std::numbers::pi) * kKernelBins);
    bin = std::clamp(bin, 0, kKernelBins - 1);
    ++counts[static_cast<std::size_t>(bin)];
  }
  const auto min_it = std::min_element(counts.begin(), counts.end());
  const double p_min = static_cast<double>(*min_it) / static_cast<double>(N);
  const double min_ratio = p_min * kKernelBins;
  const double se = kKernelBins *
                    std::sqrt(std::max(p_min * (1.0 - p_min), 1.0 / N) /
                              static_cast<double>(N));

  harness::TestReport rep;
  rep.name = "minorization_kernel";
  rep.statistic = min_ratio;
  rep.p_value = std::min(1.0, std::max(0.0, stats::norm_cdf((min_ratio - q) / se)));
  rep.n = N;
  rep.pass = min_ratio >= q - 3.0 * se;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "min angular-bin ratio %.4f vs q=%.4f (3 SE = %.4f)", min_ratio,
                q, 3.0 * se);
  rep.detail = buf;
  return rep;
}

ConcentrationReport concentration_experiment(const torus::TorusPoint& center,
                                             double R, double r,
                                             const std::vector<int>& n_list,
                                             double delta, std::int64_t N,
                                             const torus::SimConfig& config,
                                             Rng& rng) {
  if (n_list.empty())
    throw std::domain_error("concentration_experiment: empty n_list");
  if (N < 1) throw std::domain_error("concentration_experiment: need N >= 1");
  const double mu = mean_cycle_exact(R, r);
  ConcentrationReport rep;
  rep.n_list = n_list;
  rep.delta = clip_delta(delta);
  rep.samples_per_n = N;

  constexpr int kBurnIn = 50;
  for (const int n : n_list) {
    if (n < 1) throw std::domain_error("concentration_experiment: n >= 1");
    // Non-overlapping blocks of n post-burn-in cycles: by the renewal
    // structure of the departure chain each block sum is a fresh copy of the
    // n-th departure time started from (near-)equilibrium.
    const auto cycles = equilibrium_cycles(
        center, R, r, static_cast<int>(N) * n, kBurnIn, config, rng);
    std::int64_t failures = 0;
    stats::MeanAcc acc;
    for (std::int64_t b = 0; b < N; ++b) {
      double sum = 0.0;
      for (int j = 0; j < n; ++j)
        sum += cycles.cycle_times[static_cast<std::size_t>(b * n + j)];
      const double rel = sum / (mu * n) - 1.0;
      if (std::abs(rel) > rep.delta) ++failures;
      acc.add(sum);
    }
    const double rate = static_cast<double>(failures) / static_cast<double>(N);
    const auto wi = stats::wilson_interval(failures, N, 0.95);
    rep.failure_rate.push_back(rate);
    rep.wilson_lo.push_back(wi.lo);
    rep.wilson_hi.push_back(wi.hi);
    rep.rel_sd.push_back(acc.sd() / (mu * n));
  }

  rep.nonincreasing = true;
  for (std::size_t i = 0; i + 1 < rep.failure_rate.size(); ++i) {
    const double p1 = rep.failure_rate[i], p2 = rep.failure_rate[i + 1];
    const double se = std::sqrt((p1 * (1.0 - p1) + p2 * (1.0 - p2)) /
                                static_cast<double>(N));
    if (p2 > p1 + 2.0 * se) rep.nonincreasing = false;
  }

  // Least-squares slope of log rel_sd on log n (CLT predicts -1/2).
  stats::MeanAcc lx, ly;
  double sxy = 0.0, sxx = 0.0;
  std::vector<std::array<double, 2>> pts;
  for (std::size_t i = 0; i < rep.n_list.size(); ++i)
    if (rep.rel_sd[i] > 0.0)
      pts.push_back({std::log(static_cast<double>(rep.n_list[i])),
                     std::log(rep.rel_sd[i])});
  if (pts.size() >= 2) {
    for (const auto& p : pts) {
      lx.add(p[0]);
      ly.add(p[1]);
    }
    for (const auto& p : pts) {
      sxy += (p[0] - lx.mean) * (p[1] - ly.mean);
      sxx += (p[0] - lx.mean) * (p[0] - lx.mean);
    }
    rep.loglog_slope = sxy / sxx;
  } else {
    rep.loglog_slope = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

KhasminskiiReport khasminskii_check(const torus::TorusPoint& center, double r,
                                    int n_max, std::int64_t N,
                                    const torus::SimConfig& config, Rng& rng) {
  if (n_max < 1 || n_max > 4)
    throw std::domain_error("khasminskii_check: n_max must lie in 1..4");
  if (!(0.0 < r && r < 0.5))
    throw std::domain_error("khasminskii_check: need 0 < r < 1/2");
  if (N < 2) throw std::domain_error("khasminskii_check: need N >= 2");

  constexpr int kGridSide = 4;
  KhasminskiiReport rep;
  rep.grid_side = kGridSide;
  rep.n_per_site = N;
  rep.moments.assign(static_cast<std::size_t>(n_max), 0.0);
  rep.bounds.assign(static_cast<std::size_t>(n_max), 0.0);
  rep.moment_se.assign(static_cast<std::size_t>(n_max), 0.0);

  std::vector<double> site_mean;
  std::vector<std::vector<double>> site_samples;
  for (int i = 0; i < kGridSide; ++i) {
    for (int j = 0; j < kGridSide; ++j) {
      const torus::TorusPoint z =
          torus::wrap({(i + 0.5) / kGridSide, (j + 0.5) / kGridSide});
      if (torus::distance(z, center) <= r) continue;  // already inside
      std::vector<double> h(static_cast<std::size_t>(N));
      stats::MeanAcc acc;
      for (std::int64_t k = 0; k < N; ++k) {
        h[static_cast<std::size_t>(k)] =
            torus::ball_hit_time_em(center, r, z, config, rng);
        acc.add(h[static_cast<std::size_t>(k)]);
      }
      site_mean.push_back(acc.mean);
      site_samples.push_back(std::move(h));
    }
  }
  if (site_mean.empty())
    throw std::domain_error("khasminskii_check: every grid start inside ball");

  rep.sup_mean = *std::max_element(site_mean.begin(), site_mean.end());

  rep.pass = true;
  double factorial = 1.0;
  for (int k = 1; k <= n_max; ++k) {
    factorial *= k;
    double worst = 0.0, worst_se = 0.0;
    for (const auto& samples : site_samples) {
      stats::MeanAcc acc;
      for (const double h : samples) acc.add(std::pow(h, k));
      if (acc.mean > worst) {
        worst = acc.mean;
        worst_se = acc.sem();
      }
    }
    const double bound = factorial * std::pow(rep.sup_mean, k);
    rep.moments[static_cast<std::size_t>(k - 1)] = worst;
    rep.bounds[static_cast<std::size_t>(k - 1)] = bound;
    rep.moment_se[static_cast<std::size_t>(k - 1)] = worst_se;
    if (worst > bound + 3.0 * worst_se) rep.pass = false;
  }
  return rep;
}

}  // namespace covertime::excursions
