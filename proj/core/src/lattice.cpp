#include "covertime/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "covertime/bridges.hpp"
#include "covertime/stats.hpp"

namespace covertime::lattice {

namespace {

double degree(int v, int L) { return (v == 0 || v == L) ? 1.0 : 2.0; }

std::string fmt(double x) { return harness::format_double(x); }

}  // namespace

LatticeRun ctrw_run(int L, double t, StopKind stop, Rng& rng) {
  if (L < 2) throw std::invalid_argument("ctrw_run: L must be >= 2");
  if (!(t >= 0.0)) throw std::invalid_argument("ctrw_run: t must be >= 0");
  LatticeRun run;
  run.L = L;
  run.stop_kind = stop;
  run.budget = t;
  run.local_times.assign(static_cast<std::size_t>(L) + 1, 0.0);
  run.edge_traversals.assign(static_cast<std::size_t>(L), 0);
  const std::int64_t target_returns =
      static_cast<std::int64_t>(std::floor(t));
  if (t == 0.0 || (stop == StopKind::kReturns && target_returns == 0)) return run;

  std::vector<double> raw_time(static_cast<std::size_t>(L) + 1, 0.0);
  int pos = 0;
  std::int64_t returns = 0;
  for (;;) {
    double hold = rng.exponential(1.0);
    if (stop == StopKind::kInverseLocalTime && pos == 0 &&
        raw_time[0] + hold >= t) {
      // Stop exactly when local time t accrues at the origin.
      const double used = t - raw_time[0];
      raw_time[0] = t;
      run.elapsed += used;
      break;
    }
    raw_time[static_cast<std::size_t>(pos)] += hold;
    run.elapsed += hold;
    int next;
    if (pos == 0) {
      next = 1;
    } else if (pos == L) {
      next = L - 1;
    } else {
      next = rng.bernoulli(0.5) ? pos + 1 : pos - 1;
    }
    if (next == pos + 1) ++run.edge_traversals[static_cast<std::size_t>(pos)];
    pos = next;
    if (stop == StopKind::kReturns && pos == 0) {
      ++returns;
      if (returns == target_returns) break;
    }
  }
  for (int v = 0; v <= L; ++v)
    run.local_times[static_cast<std::size_t>(v)] =
        raw_time[static_cast<std::size_t>(v)] / degree(v, L);
  return run;
}

double conditional_traversal_pmf(double u, double u2, std::int64_t m) {
  if (!(u > 0.0) || !(u2 > 0.0))
    throw std::domain_error("conditional_traversal_pmf: need u, u2 > 0");
  if (m < 1) throw std::invalid_argument("conditional_traversal_pmf: m >= 1");
  const double z = u * u2;
  const double lm = static_cast<double>(m);
  const double logp = lm * std::log(z) - std::lgamma(lm + 1.0) -
                      std::lgamma(lm) - stats::log_bessel_series(z);
  return std::exp(logp);
}

harness::TestReport ray_knight_marginal_check(int L, double t, int vertex,
                                              std::int64_t N, Rng& rng) {
  if (vertex < 0 || vertex > L)
    throw std::invalid_argument("ray_knight_marginal_check: vertex in [0,L]");
  harness::TestReport rep;
  rep.name = "ray_knight_marginal";
  rep.n = N;
  if (vertex == 0) {
    rep.statistic = 0.0;
    rep.p_value = 1.0;
    rep.pass = true;
    rep.detail = "degenerate: both marginals are the constant t";
    return rep;
  }
  std::vector<double> walk_side;
  std::vector<double> besq_side;
  walk_side.reserve(static_cast<std::size_t>(N));
  besq_side.reserve(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i) {
    LatticeRun run = ctrw_run(L, t, StopKind::kInverseLocalTime, rng);
    walk_side.push_back(run.local_times[static_cast<std::size_t>(vertex)]);
    bridges::PathSample path = bridges::besq_sample(
        0, 2.0 * t, static_cast<double>(vertex), vertex, rng);
    besq_side.push_back(0.5 * path.values.back());
  }
  stats::KsResult ks = stats::ks_two_sample(std::move(walk_side),
                                            std::move(besq_side));
  rep.statistic = ks.d;
  rep.p_value = ks.p;
  rep.pass = ks.p > 0.01;
  rep.detail = "L_l at tau(t) vs half a dim-0 squared Bessel from 2t at time l";
  return rep;
}

harness::TestReport conditioned_gamma_check(int L, std::int64_t t,
                                            std::int64_t N, Rng& rng) {
  if (t < 0 || t > 10 * static_cast<std::int64_t>(L) * L)
    throw std::invalid_argument("conditioned_gamma_check: need t <= 10 L^2");
  harness::TestReport rep;
  rep.name = "conditioned_gamma";
  std::vector<double> conditioned;
  for (std::int64_t i = 0; i < N; ++i) {
    LatticeRun run = ctrw_run(L, static_cast<double>(t), StopKind::kReturns, rng);
    if (run.local_times[static_cast<std::size_t>(L)] == 0.0)
      conditioned.push_back(run.local_times[1]);
  }
  rep.n = static_cast<std::int64_t>(conditioned.size());
  if (conditioned.empty()) {
    rep.pass = false;
    rep.p_value = 0.0;
    rep.detail = "inconclusive: no runs with vertex L unvisited";
    return rep;
  }
  const double shape = static_cast<double>(t);
  const double scale = static_cast<double>(L - 1) / static_cast<double>(L);
  stats::MeanAcc acc;
  for (double x : conditioned) acc.add(x);
  const double target_mean = shape * scale;
  const double mean_dev = std::abs(acc.mean - target_mean);
  const bool mean_ok = mean_dev <= 3.0 * acc.sem();
  stats::KsResult ks = stats::ks_one_sample(
      std::move(conditioned),
      [&](double x) { return stats::gamma_cdf(x, shape, scale); });
  rep.statistic = ks.d;
  rep.p_value = ks.p;
  rep.pass = ks.p > 0.01 && mean_ok;
  rep.detail = "mean " + fmt(acc.mean) + " vs " + fmt(target_mean) + " (3 SE " +
               fmt(3.0 * acc.sem()) + ")";
  return rep;
}

harness::TestReport conditional_pmf_check(int L, double t, int l,
                                          std::int64_t N, Rng& rng) {
  if (l < 1 || l > L - 1)
    throw std::invalid_argument("conditional_pmf_check: need 1 <= l <= L-1");
  harness::TestReport rep;
  rep.name = "conditional_traversal_pmf";
  struct Obs {
    double z;
    std::int64_t m;
  };
  std::vector<Obs> obs;
  for (std::int64_t i = 0; i < N; ++i) {
    LatticeRun run = ctrw_run(L, t, StopKind::kReturns, rng);
    const double u = run.local_times[static_cast<std::size_t>(l)];
    const double u2 = run.local_times[static_cast<std::size_t>(l) + 1];
    if (u2 > 0.0)
      obs.push_back({u * u2, run.edge_traversals[static_cast<std::size_t>(l)]});
  }
  rep.n = static_cast<std::int64_t>(obs.size());
  if (obs.size() < 500) {
    rep.pass = false;
    rep.p_value = 0.0;
    rep.detail = "inconclusive: too few conditioning events";
    return rep;
  }
  std::sort(obs.begin(), obs.end(),
            [](const Obs& a, const Obs& b) { return a.z < b.z; });
  const std::size_t n_bins = std::max<std::size_t>(1, obs.size() / 500);
  double total_stat = 0.0;
  int total_dof = 0;
  std::size_t start = 0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    const std::size_t stop = b + 1 == n_bins
                                 ? obs.size()
                                 : obs.size() * (b + 1) / n_bins;
    double zbar = 0.0;
    std::int64_t mmax = 1;
    for (std::size_t i = start; i < stop; ++i) {
      zbar += obs[i].z;
      mmax = std::max(mmax, obs[i].m);
    }
    const auto count = static_cast<double>(stop - start);
    zbar /= count;
    std::vector<std::int64_t> hist(static_cast<std::size_t>(mmax), 0);
    for (std::size_t i = start; i < stop; ++i)
      ++hist[static_cast<std::size_t>(obs[i].m - 1)];
    std::vector<double> expected(static_cast<std::size_t>(mmax), 0.0);
    double covered = 0.0;
    for (std::int64_t m = 1; m <= mmax; ++m) {
      const double pm = conditional_traversal_pmf(zbar, 1.0, m);
      expected[static_cast<std::size_t>(m - 1)] = pm * count;
      covered += pm;
    }
    // Push the (tiny) pmf tail beyond the observed range into the last cell
    // so totals match.
    expected[static_cast<std::size_t>(mmax - 1)] += (1.0 - covered) * count;
    stats::Chi2Result c2 = stats::chi2_goodness(hist, expected);
    total_stat += c2.stat;
    total_dof += c2.dof;
    start = stop;
  }
  rep.statistic = total_stat;
  rep.p_value = total_dof > 0 ? stats::chi2_sf(total_stat, total_dof) : 1.0;
  rep.pass = rep.p_value > 0.01;
  rep.detail = "bins=" + std::to_string(n_bins) +
               " dof=" + std::to_string(total_dof);
  return rep;
}

harness::TestReport conditional_loctime_ld_check(int L, double t, int l,
                                                 std::int64_t N, Rng& rng) {
  if (l < 1 || l > L - 1)
    throw std::invalid_argument("conditional_loctime_ld_check: 1 <= l <= L-1");
  harness::TestReport rep;
  rep.name = "conditional_loctime";
  std::vector<double> sim;
  std::vector<double> matched;
  stats::MeanAcc dev;
  sim.reserve(static_cast<std::size_t>(N));
  matched.reserve(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i) {
    LatticeRun run = ctrw_run(L, t, StopKind::kReturns, rng);
    const std::int64_t shape =
        run.edge_traversals[static_cast<std::size_t>(l) - 1] +
        run.edge_traversals[static_cast<std::size_t>(l)];
    const double lt = run.local_times[static_cast<std::size_t>(l)];
    sim.push_back(lt);
    matched.push_back(shape == 0 ? 0.0 : rng.gamma_int(shape, 0.5));
    dev.add(lt - 0.5 * static_cast<double>(shape));
  }
  rep.n = N;
  const bool mean_ok = std::abs(dev.mean) <= 3.0 * dev.sem();
  stats::KsResult ks = stats::ks_two_sample(std::move(sim), std::move(matched));
  rep.statistic = ks.d;
  rep.p_value = ks.p;
  rep.pass = ks.p > 0.01 && mean_ok;
  rep.detail = "conditional mean deviation " + fmt(dev.mean) + " (3 SE " +
               fmt(3.0 * dev.sem()) + ")";
  return rep;
}

}  // namespace covertime::lattice
