#include "covertime/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "covertime/stats.hpp"

namespace covertime::experiments {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Points per axis: ceil(1/h), with a relative guard so that a spacing
// intended as an exact divisor of 1 does not round up and create a wrap
// duplicate at coordinate ~1.
double axis_count_d(double spacing) {
  return std::ceil((1.0 - 1e-9) / spacing);
}

// Barriers on the traversal counts for the three counting modes, encoded as
// generation-indexed bounds on T_l (the curves bound sqrt(T_l), so they are
// squared here; a nonpositive lower curve is vacuous).
std::pair<gw::Barrier, gw::Barrier> counting_barriers(const CountingSpec& spec) {
  const int L = spec.sys.L;
  switch (spec.mode) {
    case CountingMode::kUntruncated:
      return {[](int) { return -gw::kNoBound; },
              [](int) { return gw::kNoBound; }};
    case CountingMode::kUpperTruncated: {
      const auto bar = scales::barriers(L, spec.sys.s);
      return {[bar](int l) {
                const double a = bar.alpha(l);
                return a > 0.0 ? a * a : -gw::kNoBound;
              },
              [](int) { return gw::kNoBound; }};
    }
    case CountingMode::kLowerTruncated: {
      const auto bar = scales::barriers(L, spec.sys.s);
      const int lo = scales::l0_effective(L);
      const int hi = L - lo;
      return {[bar, lo, hi](int l) {
                if (l < lo || l > hi) return -gw::kNoBound;
                const double c = bar.gamma(l);
                return c > 0.0 ? c * c : -gw::kNoBound;
              },
              [bar, lo, hi](int l) {
                if (l < lo || l > hi) return gw::kNoBound;
                const double d = bar.delta(l);
                // delta < 0 is unreachable on the cutoff range, but encode it
                // honestly as an impossible event rather than clamping.
                return d >= 0.0 ? d * d : -1.0;
              }};
    }
  }
  throw std::logic_error("counting_barriers: unknown mode");
}

bool profile_satisfies(const gw::TraversalProfile& prof, const gw::Barrier& lower,
                       const gw::Barrier& upper) {
  const int L = static_cast<int>(prof.counts.size());
  if (prof.counts[static_cast<std::size_t>(L) - 1] != 0) return false;
  for (int l = 0; l < L; ++l) {
    const double c = static_cast<double>(prof.counts[static_cast<std::size_t>(l)]);
    if (c < lower(l) || c > upper(l)) return false;
  }
  return true;
}

int wrap_index(int i, int K) {
  const int m = i % K;
  return m < 0 ? m + K : m;
}

}  // namespace

Grid build_grid(const scales::ScaleSystem& sys, int l, std::int64_t max_points) {
  if (l < 0 || l > sys.L)
    throw std::invalid_argument("build_grid: level must be in 0..L");
  const double h = sys.spacing_factor * sys.r(l);
  const double kd = axis_count_d(h);
  const double total_d = kd * kd;
  if (!(total_d <= static_cast<double>(max_points)))
    throw std::invalid_argument(
        "build_grid: level-" + std::to_string(l) + " grid needs " +
        std::to_string(total_d) +
        " points, over the cap; use a larger spacing factor or raise the cap");
  const int K = static_cast<int>(kd);
  Grid g;
  g.level = l;
  g.spacing = h;
  g.points.reserve(static_cast<std::size_t>(K) * static_cast<std::size_t>(K));
  // i * h < 1 for i < K, so the coordinates are distinct mod 1 by
  // construction and no wrap deduplication is needed.
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      g.points.push_back({static_cast<double>(i) * h, static_cast<double>(j) * h});
  return g;
}

double grid_point_count(const scales::ScaleSystem& sys, int l) {
  if (l < 0 || l > sys.L)
    throw std::invalid_argument("grid_point_count: level must be in 0..L");
  const double kd = axis_count_d(sys.spacing_factor * sys.r(l));
  return kd * kd;
}

Estimate counting_variable_estimate(const CountingSpec& spec,
                                    CountingEngine engine, std::int64_t N,
                                    const torus::SimConfig& config, Rng& rng) {
  const int L = spec.sys.L;
  if (L < 3) throw std::invalid_argument("counting_variable_estimate: L >= 3");
  if (!(spec.t >= 0.0))
    throw std::invalid_argument("counting_variable_estimate: t >= 0");

  Estimate est;
  est.grid_points = grid_point_count(spec.sys, L);

  if (engine == CountingEngine::kGwExact) {
    if (spec.mode == CountingMode::kUntruncated) {
      est.per_point = gw::extinction_prob(L, spec.t);
    } else {
      const auto [lower, upper] = counting_barriers(spec);
      gw::DpOptions opts;
      opts.condition_extinct = true;  // joint with the unvisited-ball event
      est.per_point =
          gw::barrier_prob_dp_full(L, spec.t, lower, upper, opts).probability;
    }
    est.value = est.grid_points * est.per_point;
    est.stderr_ = 0.0;
    est.n = 0;
    return est;
  }

  if (L > 6)
    throw std::invalid_argument(
        "counting_variable_estimate: the torus-mc engine is limited to L <= 6 "
        "(per-profile cost grows like e^{2L}); use gw-exact");
  if (N <= 0) throw std::invalid_argument("counting_variable_estimate: N >= 1");

  const auto [lower, upper] = counting_barriers(spec);
  // The per-point event probability does not depend on the center, so one
  // center pooled over N profiles estimates every grid point at once.
  const torus::TorusPoint center{0.5, 0.5};
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < N; ++i) {
    const auto prof = torus::traversal_profile(
        center, spec.sys, spec.t, torus::ProfileMode::kTimedEm, config, rng);
    if (profile_satisfies(prof, lower, upper)) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(N);
  est.per_point = p;
  est.value = est.grid_points * p;
  est.stderr_ = est.grid_points *
                std::sqrt(std::max(p * (1.0 - p), 1.0 / static_cast<double>(N)) /
                          static_cast<double>(N));
  est.n = N;
  return est;
}

IndependenceReport two_point_independence_check(const scales::ScaleSystem& sys,
                                                double separation, double t,
                                                std::int64_t N,
                                                const torus::SimConfig& config,
                                                Rng& rng) {
  const int L = sys.L;
  if (N < 8) throw std::invalid_argument("two_point_independence_check: N >= 8");
  if (!(separation >= 0.0 && separation <= 0.5))
    throw std::invalid_argument(
        "two_point_independence_check: separation in [0, 1/2]");

  // Shrink both scale families to top radius ~0.2 so that separations beyond
  // 2 r_0 exist on the torus; the profile laws depend only on radius ratios.
  constexpr double kTargetR0 = 0.2;
  const double base_r0 = torus::geometry_scale_factor(sys) * sys.r(0);
  const double shrink = base_r0 > kTargetR0 ? kTargetR0 / base_r0 : 1.0;

  const torus::TorusPoint y{0.25, 0.25};
  const torus::TorusPoint z = torus::wrap({y.x + separation, y.y});

  IndependenceReport rep;
  rep.n = N;
  rep.separation = torus::distance(y, z);
  rep.effective_r0 = base_r0 * shrink;
  rep.disjoint = rep.separation > 2.0 * rep.effective_r0;

  // T_0 = floor(t) on both sides; correlations start at generation 1.
  const int gens = L - 1;
  std::vector<std::array<double, 5>> acc(
      static_cast<std::size_t>(gens), {0.0, 0.0, 0.0, 0.0, 0.0});
  for (std::int64_t i = 0; i < N; ++i) {
    const auto [py, pz] =
        torus::paired_traversal_profiles(y, z, sys, t, shrink, config, rng);
    for (int l = 1; l < L; ++l) {
      const double a = static_cast<double>(py.counts[static_cast<std::size_t>(l)]);
      const double b = static_cast<double>(pz.counts[static_cast<std::size_t>(l)]);
      auto& m = acc[static_cast<std::size_t>(l - 1)];
      m[0] += a;
      m[1] += b;
      m[2] += a * a;
      m[3] += b * b;
      m[4] += a * b;
    }
  }

  rep.correlation.resize(static_cast<std::size_t>(gens), kNan);
  rep.se.assign(static_cast<std::size_t>(gens),
                1.0 / std::sqrt(static_cast<double>(N - 3)));
  bool all_ok = true;
  const double n = static_cast<double>(N);
  for (int g = 0; g < gens; ++g) {
    const auto& m = acc[static_cast<std::size_t>(g)];
    const double va = m[2] / n - (m[0] / n) * (m[0] / n);
    const double vb = m[3] / n - (m[1] / n) * (m[1] / n);
    const double cov = m[4] / n - (m[0] / n) * (m[1] / n);
    if (va > 0.0 && vb > 0.0) {
      const double corr = cov / std::sqrt(va * vb);
      rep.correlation[static_cast<std::size_t>(g)] = corr;
      if (std::abs(corr) > 3.0 * rep.se[static_cast<std::size_t>(g)])
        all_ok = false;
    }
    // Constant margins carry no correlation information; left as NaN and
    // excluded from the pass decision.
  }
  rep.pass = !rep.disjoint || all_ok;
  return rep;
}

PackingReport packing_domination_check(const scales::ScaleSystem& sys, int l,
                                       double t, std::int64_t N,
                                       const torus::SimConfig& config,
                                       Rng& rng) {
  const int L = sys.L;
  if (l < 1 || l + 1 > L)
    throw std::invalid_argument("packing_domination_check: scale l in 1..L-1");
  if (N <= 0) throw std::invalid_argument("packing_domination_check: N >= 1");

  const double factor = scales::modified_radius_factor(L);
  const double kappa = torus::packing_geometry_scale(sys, factor);
  // y_prime is the nearest point of the packing grid, whose spacing is the
  // grid fraction of r_{l + log L} = r_l / L, in simulated units.
  const double h = sys.spacing_factor * kappa * sys.r(l) / static_cast<double>(L);
  const torus::TorusPoint y{0.3, 0.7};
  const torus::TorusPoint y_prime =
      torus::wrap({std::round(y.x / h) * h, std::round(y.y / h) * h});

  PackingReport rep;
  rep.n = N;
  rep.factor = factor;
  rep.separation = torus::distance(y, y_prime);

  std::vector<std::int64_t> hat_samples;
  hat_samples.reserve(static_cast<std::size_t>(N));
  double sum_tilde = 0.0, sum_hat = 0.0;
  for (std::int64_t i = 0; i < N; ++i) {
    const auto c =
        torus::packing_coupled_counters(y, y_prime, sys, l, t, factor, config, rng);
    rep.degenerate = c.degenerate;
    if (c.t_hat > c.t_tilde) ++rep.violations;
    sum_tilde += static_cast<double>(c.t_tilde);
    sum_hat += static_cast<double>(c.t_hat);
    hat_samples.push_back(c.t_hat);
  }
  rep.mean_t_tilde = sum_tilde / static_cast<double>(N);
  rep.mean_t_hat = sum_hat / static_cast<double>(N);

  if (!rep.degenerate) {
    try {
      auto params = gw::compound_params_from_scales(sys, l);
      params.n = static_cast<std::int64_t>(std::floor(t));
      std::int64_t max_v = 0;
      std::vector<std::int64_t> draws;
      draws.reserve(static_cast<std::size_t>(N));
      for (std::int64_t i = 0; i < N; ++i) {
        draws.push_back(gw::compound_sample(params, rng));
        max_v = std::max(max_v, draws.back());
      }
      for (const auto v : hat_samples) max_v = std::max(max_v, v);
      std::vector<std::int64_t> ha(static_cast<std::size_t>(max_v) + 1, 0);
      std::vector<std::int64_t> hb(static_cast<std::size_t>(max_v) + 1, 0);
      for (const auto v : hat_samples) ++ha[static_cast<std::size_t>(v)];
      for (const auto v : draws) ++hb[static_cast<std::size_t>(v)];
      rep.compound_p_value = stats::chi2_two_sample(ha, hb).p;
    } catch (const std::domain_error&) {
      rep.compound_p_value = -1.0;
    }
  }
  return rep;
}

CoverResult cover_time_estimate(double eps, double grid_spacing,
                                const torus::SimConfig& config,
                                std::int64_t n_runs, Rng& rng,
                                std::int64_t max_steps) {
  if (!(eps > 0.0 && eps <= 0.125))
    throw std::invalid_argument("cover_time_estimate: eps in (0, 1/8]");
  if (!(grid_spacing > 0.0 && grid_spacing <= eps))
    throw std::invalid_argument("cover_time_estimate: grid_spacing in (0, eps]");
  if (n_runs <= 0) throw std::invalid_argument("cover_time_estimate: n_runs >= 1");

  torus::SimConfig cfg = config;
  cfg.dt = std::min(config.dt, eps * eps / 50.0);
  cfg.dt_policy = torus::DtPolicy::kFixed;

  CoverResult res;
  res.eps = eps;
  res.dt = cfg.dt;
  res.times.reserve(static_cast<std::size_t>(n_runs));

  const int K = static_cast<int>(axis_count_d(grid_spacing));
  const std::size_t cells = static_cast<std::size_t>(K) * static_cast<std::size_t>(K);
  // Index window wide enough to reach every center within eps, including
  // across the short wrap gap at the seam.
  const int w = static_cast<int>(std::ceil(eps / grid_spacing)) + 1;

  std::vector<std::uint8_t> visited(cells);
  for (std::int64_t run = 0; run < n_runs; ++run) {
    std::fill(visited.begin(), visited.end(), 0);
    std::int64_t remaining = static_cast<std::int64_t>(cells);

    const auto mark = [&](const torus::TorusPoint& p) {
      const int ci = static_cast<int>(std::floor(p.x / grid_spacing));
      const int cj = static_cast<int>(std::floor(p.y / grid_spacing));
      for (int di = -w; di <= w; ++di) {
        const int i = wrap_index(ci + di, K);
        for (int dj = -w; dj <= w; ++dj) {
          const int j = wrap_index(cj + dj, K);
          auto& cell = visited[static_cast<std::size_t>(i) *
                                   static_cast<std::size_t>(K) +
                               static_cast<std::size_t>(j)];
          if (cell) continue;
          const torus::TorusPoint z{static_cast<double>(i) * grid_spacing,
                                    static_cast<double>(j) * grid_spacing};
          if (torus::distance(z, p) <= eps) {
            cell = 1;
            --remaining;
          }
        }
      }
    };

    const torus::TorusPoint start{0.5, 0.5};
    mark(start);
    double cover_time = kNan;
    if (remaining == 0) {
      cover_time = 0.0;  // eps-balls of a tiny grid can cover from the start
    } else {
      std::int64_t steps = 0;
      torus::em_path(start, std::numeric_limits<double>::max() / 4.0, cfg, rng,
                     [&](double time, const torus::TorusPoint& p) {
                       mark(p);
                       if (remaining == 0) {
                         cover_time = time;
                         return false;
                       }
                       return ++steps < max_steps;
                     });
    }
    if (std::isnan(cover_time)) ++res.incomplete;
    res.times.push_back(cover_time);
  }
  return res;
}

Heatmap occupation_heatmap(double T, double radius, int resolution,
                           const torus::SimConfig& config, Rng& rng) {
  if (resolution < 1 || resolution > 1024)
    throw std::invalid_argument("occupation_heatmap: resolution in 1..1024");
  if (!(radius > 0.0)) throw std::invalid_argument("occupation_heatmap: radius > 0");
  if (!(T >= 0.0)) throw std::invalid_argument("occupation_heatmap: T >= 0");

  Heatmap h;
  h.resolution = resolution;
  h.radius = std::min(radius, 0.5 - 1e-9);
  h.T = T;
  h.values.assign(
      static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution),
      0.0);
  if (T == 0.0) return h;

  const double res_d = static_cast<double>(resolution);
  const int w = static_cast<int>(std::ceil(h.radius * res_d)) + 1;
  double prev_time = 0.0;
  const torus::TorusPoint start{rng.uniform(), rng.uniform()};
  // Each step's duration is attributed to the ball around its endpoint.
  torus::em_path(start, T, config, rng,
                 [&](double time, const torus::TorusPoint& p) {
                   const double dt = time - prev_time;
                   prev_time = time;
                   const int ci = static_cast<int>(std::floor(p.x * res_d));
                   const int cj = static_cast<int>(std::floor(p.y * res_d));
                   for (int di = -w; di <= w; ++di) {
                     const int i = wrap_index(ci + di, resolution);
                     for (int dj = -w; dj <= w; ++dj) {
                       const int j = wrap_index(cj + dj, resolution);
                       const torus::TorusPoint z{(i + 0.5) / res_d,
                                                 (j + 0.5) / res_d};
                       if (torus::distance(z, p) <= h.radius)
                         h.values[static_cast<std::size_t>(i) *
                                      static_cast<std::size_t>(resolution) +
                                  static_cast<std::size_t>(j)] += dt;
                     }
                   }
                   return true;
                 });

  const double scale = 1.0 / (std::numbers::pi * h.radius * h.radius);
  for (auto& v : h.values) v *= scale;
  return h;
}

std::string heatmap_to_csv(const Heatmap& h) {
  std::string out;
  out.reserve(h.values.size() * 12);
  char buf[32];
  for (int i = 0; i < h.resolution; ++i) {
    for (int j = 0; j < h.resolution; ++j) {
      std::snprintf(buf, sizeof(buf), "%.10g", h.value(i, j));
      if (j) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string heatmap_to_pgm(const Heatmap& h) {
  double max_v = 0.0;
  for (const double v : h.values) max_v = std::max(max_v, v);
  std::string out = "P2\n" + std::to_string(h.resolution) + " " +
                    std::to_string(h.resolution) + "\n255\n";
  for (int i = 0; i < h.resolution; ++i) {
    for (int j = 0; j < h.resolution; ++j) {
      const int g = max_v > 0.0
                        ? static_cast<int>(std::lround(255.0 * h.value(i, j) / max_v))
                        : 0;
      if (j) out += ' ';
      out += std::to_string(g);
    }
    out += '\n';
  }
  return out;
}

}  // namespace covertime::experiments
