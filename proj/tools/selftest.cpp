#include "selftest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "covertime/bridges.hpp"
#include "covertime/excursions.hpp"
#include "covertime/experiments.hpp"
#include "covertime/gw.hpp"
#include "covertime/lattice.hpp"
#include "covertime/parallel.hpp"
#include "covertime/rng.hpp"
#include "covertime/scales.hpp"
#include "covertime/stats.hpp"
#include "covertime/torus.hpp"

namespace covertime::harness {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct Ctx {
  std::uint64_t seed = 0;
  std::uint64_t sub = 0;
  Report rows;
  bool pass = true;

  void row(const std::string& quantity, double value, double se = kNan,
           std::int64_t n = 0) {
    rows.add(Row{"selftest", quantity, value, se, n, seed, sub});
  }
  void require(bool ok) { pass = pass && ok; }
};

double binom_se(double p, std::int64_t n) {
  const double nd = static_cast<double>(n);
  return std::sqrt(std::max(p * (1.0 - p), 1.0 / nd) / nd);
}

double mean_of(const std::vector<double>& v, double* sem = nullptr) {
  stats::MeanAcc acc;
  for (const double x : v) acc.add(x);
  if (sem) *sem = acc.sem();
  return acc.mean;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Aligned histograms over {0, ..., max(a, b)} for two-sample chi-square.
std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> aligned_hist(
    const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  std::int64_t hi = 0;
  for (const auto v : a) hi = std::max(hi, v);
  for (const auto v : b) hi = std::max(hi, v);
  std::vector<std::int64_t> ha(static_cast<std::size_t>(hi) + 1, 0);
  std::vector<std::int64_t> hb(static_cast<std::size_t>(hi) + 1, 0);
  for (const auto v : a) ++ha[static_cast<std::size_t>(v)];
  for (const auto v : b) ++hb[static_cast<std::size_t>(v)];
  return {std::move(ha), std::move(hb)};
}

// 1. Annulus exit law: EM frequency within 3 SE of the logarithmic-ratio
// formula, and the exact sampler's parameter equals the formula to 1e-12.
void criterion_01(Ctx& c, Rng& rng) {
  const double r = 0.05, rho = 0.1, R = 0.2;
  const double p = std::log(R / rho) / std::log(R / r);
  const double exact_delta = std::abs(torus::annulus_hit_prob(r, rho, R) - p);

  torus::SimConfig cfg;
  cfg.dt = 1e-6;
  cfg.dt_policy = torus::DtPolicy::kFixed;
  const std::int64_t N = 10000;
  const torus::TorusPoint center{0.5, 0.5};
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < N; ++i)
    if (torus::annulus_first_hit_em(center, r, rho, R, cfg, rng)) ++hits;
  const double freq = static_cast<double>(hits) / static_cast<double>(N);
  const double se = binom_se(p, N);

  c.require(exact_delta <= 1e-12);
  c.require(std::abs(freq - p) <= 3.0 * se);
  c.row("criterion_01_formula", p);
  c.row("criterion_01_exact_sampler_delta", exact_delta);
  c.row("criterion_01_em_frequency", freq, se, N);
}

// 2. Exact-untimed traversal profiles match the branching law generation by
// generation (chi-square, Bonferroni over the generations).
void criterion_02(Ctx& c, Rng& rng) {
  const int L = 6;
  const double t = 20.0;
  const std::int64_t N = 10000;
  const auto sys = scales::make_scale_system(L, 0.0);
  const torus::SimConfig cfg;
  const torus::TorusPoint center{0.5, 0.5};

  std::vector<std::vector<std::int64_t>> walk(static_cast<std::size_t>(L)),
      branch(static_cast<std::size_t>(L));
  for (std::int64_t i = 0; i < N; ++i) {
    const auto prof = torus::traversal_profile(
        center, sys, t, torus::ProfileMode::kExactUntimed, cfg, rng);
    for (int l = 0; l < L; ++l)
      walk[static_cast<std::size_t>(l)].push_back(
          prof.counts[static_cast<std::size_t>(l)]);
  }
  for (std::int64_t i = 0; i < N; ++i) {
    const auto prof = gw::gw_sample(t, L - 1, rng);
    for (int l = 0; l < L; ++l)
      branch[static_cast<std::size_t>(l)].push_back(
          prof.counts[static_cast<std::size_t>(l)]);
  }

  // Generation 0 is the shared deterministic count; 1..L-1 carry the law.
  const double alpha = 0.01 / static_cast<double>(L);
  double min_p = 1.0;
  for (int l = 1; l < L; ++l) {
    const auto [ha, hb] = aligned_hist(walk[static_cast<std::size_t>(l)],
                                       branch[static_cast<std::size_t>(l)]);
    const auto res = stats::chi2_two_sample(ha, hb);
    min_p = std::min(min_p, res.p);
    c.row("criterion_02_chi2_p_gen" + std::to_string(l), res.p, kNan, N);
    c.require(res.p > alpha);
  }
  c.row("criterion_02_min_p", min_p, kNan, N);
}

// 3. Extinction probability: generating-function iteration matches the closed
// form on the full (L, t) grid; the conditioned DP with vacuous barriers
// reproduces it on a subgrid; MC frequency agrees at (6, 40).
void criterion_03(Ctx& c, Rng& rng) {
  double max_err_pgf = 0.0;
  for (int L = 2; L <= 20; ++L)
    for (int t = 1; t <= 200; ++t)
      max_err_pgf = std::max(
          max_err_pgf,
          std::abs(gw::extinction_prob(L, t) - gw::extinction_prob_pgf(L, t)));

  double max_err_dp = 0.0;
  const std::array<int, 5> ts = {1, 7, 40, 113, 200};
  for (int L = 2; L <= 20; ++L) {
    for (const int t : ts) {
      gw::DpOptions opts;
      opts.condition_extinct = true;
      const auto dp = gw::barrier_prob_dp_full(L, t, {}, {}, opts);
      max_err_dp = std::max(
          max_err_dp, std::abs(dp.probability - gw::extinction_prob(L, t)));
    }
  }

  const std::int64_t N = 100000;
  std::int64_t extinct = 0;
  for (std::int64_t i = 0; i < N; ++i)
    if (gw::gw_sample(40.0, 5, rng).counts.back() == 0) ++extinct;
  const double p = gw::extinction_prob(6, 40.0);
  const double freq = static_cast<double>(extinct) / static_cast<double>(N);
  const double se = binom_se(p, N);

  c.require(max_err_pgf <= 1e-12);
  c.require(max_err_dp <= 1e-12);
  c.require(std::abs(freq - p) <= 3.0 * se);
  c.row("criterion_03_max_err_pgf", max_err_pgf);
  c.row("criterion_03_max_err_dp", max_err_dp);
  c.row("criterion_03_mc_frequency", freq, se, N);
  c.row("criterion_03_formula", p);
}

// 4. Brownian-bridge linear-barrier probability by grid MC with exact
// between-grid crossing corrections, against 1 - exp(-2ab/T).
void criterion_04(Ctx& c, Rng& rng) {
  const double T = 10.0, a = 2.0, b = 3.0;
  const auto mc = bridges::bb_linear_barrier_mc(T, a, b, 2048, 100000, rng);
  const double exact = bridges::bb_linear_barrier_prob(T, a, b);
  c.require(std::abs(mc.value - exact) <= 0.01);
  c.row("criterion_04_mc", mc.value, mc.stderr_, mc.n);
  c.row("criterion_04_formula", exact);
}

// 5. Squared-Bessel identities: additivity in the dimension/start pair, and
// the d = 1 bridge to zero against the squared Brownian bridge.
void criterion_05(Ctx& c, Rng& rng) {
  const std::int64_t N = 10000;
  const double T = 2.0;
  const int M = 32;
  std::vector<double> sum_parts, direct;
  sum_parts.reserve(static_cast<std::size_t>(N));
  direct.reserve(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i) {
    const double part = bridges::besq_sample(1, 1.0, T, M, rng).values.back() +
                        bridges::besq_sample(2, 1.0, T, M, rng).values.back();
    sum_parts.push_back(part);
    direct.push_back(bridges::besq_sample(3, 2.0, T, M, rng).values.back());
  }
  const auto ks_add = stats::ks_two_sample(sum_parts, direct);

  const double Tb = 1.0;
  const int Mb = 64;
  std::vector<double> besq_mid, bb_mid;
  besq_mid.reserve(static_cast<std::size_t>(N));
  bb_mid.reserve(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i) {
    besq_mid.push_back(
        bridges::besq_bridge_to_zero_sample(1, 1.0, Tb, Mb, rng)
            .values[static_cast<std::size_t>(Mb / 2)]);
    const double w =
        bridges::bb_sample(1.0, 0.0, Tb, Mb, rng).values[static_cast<std::size_t>(Mb / 2)];
    bb_mid.push_back(w * w);
  }
  const auto ks_bridge = stats::ks_two_sample(besq_mid, bb_mid);

  c.require(ks_add.p > 0.01);
  c.require(ks_bridge.p > 0.01);
  c.row("criterion_05_ks_additivity_p", ks_add.p, kNan, N);
  c.row("criterion_05_ks_bridge_p", ks_bridge.p, kNan, N);
}

// 6. Dimension-change reweighting: the weighted d = 1 bridge estimator of the
// early-interval survival event matches the direct d = 0 bridge estimate.
void criterion_06(Ctx& c, Rng& rng) {
  const double x = 4.0, T = 10.0, S = 5.0;
  const int M = 4096;
  const std::int64_t N = 100000;

  stats::MeanAcc direct;
  for (std::int64_t i = 0; i < N; ++i) {
    const auto path = bridges::besq_bridge_to_zero_sample(0, x, T, M, rng);
    bool alive = true;
    for (std::size_t j = 0; j < path.grid.size() && path.grid[j] <= S; ++j) {
      if (path.values[j] <= 0.0) {
        alive = false;
        break;
      }
    }
    direct.add(alive ? 1.0 : 0.0);
  }

  stats::MeanAcc weighted;
  for (std::int64_t i = 0; i < N; ++i) {
    const auto path = bridges::besq_bridge_to_zero_sample(1, x, T, M, rng);
    weighted.add(bridges::rn_weight_zero_vs_one(path, S, x));
  }

  const double se =
      std::sqrt(direct.sem() * direct.sem() + weighted.sem() * weighted.sem());
  c.require(std::abs(direct.mean - weighted.mean) <= 3.0 * se);
  c.row("criterion_06_direct", direct.mean, direct.sem(), N);
  c.row("criterion_06_reweighted", weighted.mean, weighted.sem(), N);
}

// 7. Ray-Knight marginal: lattice local time vs half a d = 0 squared Bessel.
void criterion_07(Ctx& c, Rng& rng) {
  const auto rep = lattice::ray_knight_marginal_check(8, 5.0, 3, 10000, rng);
  c.require(rep.pass);
  c.row("criterion_07_ks_p", rep.p_value, kNan, rep.n);
  c.row("criterion_07_ks_stat", rep.statistic, kNan, rep.n);
}

// 8. Conditional edge-traversal pmf given the endpoint local times.
void criterion_08(Ctx& c, Rng& rng) {
  const auto rep = lattice::conditional_pmf_check(6, 8.0, 3, 20000, rng);
  c.require(rep.pass);
  c.row("criterion_08_chi2_p", rep.p_value, kNan, rep.n);
  c.row("criterion_08_chi2_stat", rep.statistic, kNan, rep.n);
}

// 9. Conditioned gamma law of the level-1 local time.
void criterion_09(Ctx& c, Rng& rng) {
  const auto rep = lattice::conditioned_gamma_check(6, 10, 30000, rng);
  c.require(rep.pass);
  c.row("criterion_09_ks_p", rep.p_value, kNan, rep.n);
}

// 10. Equilibrium mean cycle time against log(R/r)/pi, with the sqrt(dt)
// discretization error removed by two-step-size (dt, dt/4) extrapolation,
// plus the leg decomposition consistency.
void criterion_10(Ctx& c, Rng& rng) {
  const double R = 0.25;
  const double r = 0.25 / std::numbers::e;
  const double target = excursions::mean_cycle_exact(R, r);
  const int n = 200000;
  const int burn = 50;
  const torus::TorusPoint center{0.5, 0.5};

  torus::SimConfig coarse;
  coarse.dt = 6.4e-4;
  coarse.dt_policy = torus::DtPolicy::kProximityScaled;
  torus::SimConfig fine = coarse;
  fine.dt = 1.6e-4;

  const auto cyc_c = excursions::equilibrium_cycles(center, R, r, n, burn, coarse, rng);
  const auto cyc_f = excursions::equilibrium_cycles(center, R, r, n, burn, fine, rng);
  double sem_c = 0.0, sem_f = 0.0;
  const double m_c = mean_of(cyc_c.cycle_times, &sem_c);
  const double m_f = mean_of(cyc_f.cycle_times, &sem_f);

  // Error ~ b sqrt(dt): with dt_f = dt_c/4, m* = 2 m_f - m_c cancels b.
  const double m_star = 2.0 * m_f - m_c;
  const double se_star = std::sqrt(4.0 * sem_f * sem_f + sem_c * sem_c);

  double sem_oi = 0.0, sem_io = 0.0;
  const double m_oi = mean_of(cyc_f.out_in_legs, &sem_oi);
  const double m_io = mean_of(cyc_f.in_out_legs, &sem_io);
  const double legs_gap = std::abs(m_f - m_oi - m_io);
  const double legs_se =
      std::sqrt(sem_f * sem_f + sem_oi * sem_oi + sem_io * sem_io);

  c.require(std::abs(m_star - target) <= 0.03 * target);
  c.require(legs_gap <= legs_se);
  c.row("criterion_10_extrapolated", m_star, se_star, n);
  c.row("criterion_10_target", target);
  c.row("criterion_10_coarse", m_c, sem_c, n);
  c.row("criterion_10_fine", m_f, sem_f, n);
  c.row("criterion_10_legs_gap", legs_gap, legs_se, n);
}

// 11. Disc exit-time calibration from the center: mean within 2% of R^2/2.
void criterion_11(Ctx& c, Rng& rng) {
  const double R = 0.2;
  const torus::TorusPoint center{0.5, 0.5};
  torus::SimConfig cfg;
  cfg.dt = 1e-6;
  cfg.dt_policy = torus::DtPolicy::kFixed;
  const std::int64_t N = 20000;
  stats::MeanAcc acc;
  for (std::int64_t i = 0; i < N; ++i)
    acc.add(torus::disc_exit_time_em(center, R, center, cfg, rng));
  const double exact = R * R / 2.0;
  c.require(std::abs(acc.mean - exact) <= 0.02 * exact);
  c.row("criterion_11_mc_mean", acc.mean, acc.sem(), N);
  c.row("criterion_11_formula", exact);
}

// 12. Conditioned tube-probability order: the DP tube probability divided by
// l0/L should sit in one window [c1, c2], c2/c1 <= 10, across L = 20,40,80.
// At these sizes the conditioned chain's fluctuations exceed the tube width
// by a growing margin, the probability decays much faster than l0/L, and the
// window check fails; it is kept as an honest red marker of that gap.
void criterion_12(Ctx& c, Rng& rng) {
  const torus::SimConfig cfg;
  std::vector<double> ratios;
  for (const int L : {20, 40, 80}) {
    const double t = scales::excursion_budget(L, 0.0);
    experiments::CountingSpec spec;
    spec.mode = experiments::CountingMode::kLowerTruncated;
    spec.t = t;
    spec.sys = scales::make_scale_system(L, 0.0);
    const auto est = experiments::counting_variable_estimate(
        spec, experiments::CountingEngine::kGwExact, 0, cfg, rng);
    const double conditional = est.per_point / gw::extinction_prob(L, t);
    const int l0 = scales::l0_effective(L);
    const double ratio = conditional / (static_cast<double>(l0) / L);
    ratios.push_back(ratio);
    c.row("criterion_12_tube_conditional_L" + std::to_string(L), conditional);
    c.row("criterion_12_ratio_L" + std::to_string(L), ratio);
  }
  const double c1 = *std::min_element(ratios.begin(), ratios.end());
  const double c2 = *std::max_element(ratios.begin(), ratios.end());
  c.require(c1 > 0.0 && std::isfinite(c2) && c2 / c1 <= 10.0);
  c.row("criterion_12_window_spread", c1 > 0.0 ? c2 / c1 : kNan);
}

// 13. Compound lower-tail large-deviation bound is never exceeded.
void criterion_13(Ctx& c, Rng& rng) {
  gw::CompoundParams params;
  params.n = 100;
  params.p = 0.2;
  params.q = 0.2;
  const std::int64_t N = 1000000;
  const std::array<double, 3> thetas = {25.0, 50.0, 75.0};
  std::array<std::int64_t, 3> below = {0, 0, 0};
  for (std::int64_t i = 0; i < N; ++i) {
    const auto x = static_cast<double>(gw::compound_sample(params, rng));
    for (std::size_t k = 0; k < thetas.size(); ++k)
      if (x <= thetas[k]) ++below[k];
  }
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    const double emp = static_cast<double>(below[k]) / static_cast<double>(N);
    const double se = binom_se(emp, N);
    const double bound = gw::ld_bound_compound(params, thetas[k]);
    c.require(emp <= bound + 3.0 * se);
    const auto tag = std::to_string(static_cast<int>(thetas[k]));
    c.row("criterion_13_empirical_theta" + tag, emp, se, N);
    c.row("criterion_13_bound_theta" + tag, bound);
  }
}

// 14. Cover-time subleading sign: the median deficit
// 2 log(1/eps) - C_eps / ((1/pi) log(1/eps)) is positive and nondecreasing
// in log(1/eps) across eps = 2^-4, 2^-5, 2^-6 (within 2 SE).
void criterion_14(Ctx& c, Rng& rng) {
  const std::array<int, 3> ks = {4, 5, 6};
  std::array<double, 3> deficit{}, se{};
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double eps = std::pow(2.0, -ks[i]);
    const double log_inv = static_cast<double>(ks[i]) * std::numbers::ln2;
    torus::SimConfig cfg;
    cfg.dt = 1.0;  // clamped to eps^2/50 inside
    const auto res =
        experiments::cover_time_estimate(eps, eps / 2.0, cfg, 50, rng);
    c.require(res.incomplete == 0);
    double sem = 0.0;
    mean_of(res.times, &sem);
    const double med = median_of(res.times);
    const double denom = log_inv / std::numbers::pi;
    deficit[i] = 2.0 * log_inv - med / denom;
    // Asymptotic SE of a sample median: 1.2533 * sd / sqrt(n).
    se[i] = 1.2533 * sem / denom;
    const auto tag = std::to_string(ks[i]);
    c.row("criterion_14_median_cover_2e" + tag, med, kNan, 50);
    c.row("criterion_14_deficit_2e" + tag, deficit[i], se[i], 50);
  }
  for (std::size_t i = 0; i < ks.size(); ++i) c.require(deficit[i] > 0.0);
  for (std::size_t i = 0; i + 1 < ks.size(); ++i) {
    const double gap = deficit[i + 1] - deficit[i];
    const double gap_se = std::sqrt(se[i] * se[i] + se[i + 1] * se[i + 1]);
    c.require(gap >= -2.0 * gap_se);
    c.row("criterion_14_step_" + std::to_string(i), gap, gap_se);
  }
}

using CriterionFn = void (*)(Ctx&, Rng&);

struct Criterion {
  const char* name;
  CriterionFn fn;
};

constexpr std::array<Criterion, 14> kCriteria = {{
    {"criterion_01_annulus_exit", criterion_01},
    {"criterion_02_traversal_branching", criterion_02},
    {"criterion_03_extinction", criterion_03},
    {"criterion_04_bridge_barrier", criterion_04},
    {"criterion_05_besq_identities", criterion_05},
    {"criterion_06_rn_reweighting", criterion_06},
    {"criterion_07_ray_knight", criterion_07},
    {"criterion_08_conditional_pmf", criterion_08},
    {"criterion_09_conditioned_gamma", criterion_09},
    {"criterion_10_mean_cycle", criterion_10},
    {"criterion_11_disc_exit_time", criterion_11},
    {"criterion_12_tube_order", criterion_12},
    {"criterion_13_compound_ld_bound", criterion_13},
    {"criterion_14_cover_deficit", criterion_14},
}};

}  // namespace

Report run_selftest(std::uint64_t seed, int workers, bool& all_pass) {
  const auto results = run_indexed<Ctx>(
      static_cast<std::int64_t>(kCriteria.size()), workers,
      [seed](std::int64_t i) {
        Ctx ctx;
        ctx.seed = seed;
        ctx.sub = static_cast<std::uint64_t>(i);
        Rng rng(substream(seed, ctx.sub));
        kCriteria[static_cast<std::size_t>(i)].fn(ctx, rng);
        return ctx;
      });

  Report out;
  all_pass = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& ctx = results[i];
    all_pass = all_pass && ctx.pass;
    out.add(Row{"selftest", kCriteria[i].name, ctx.pass ? 1.0 : 0.0, kNan, 0,
                seed, static_cast<std::uint64_t>(i)});
    out.add(ctx.rows);
  }
  return out;
}

}  // namespace covertime::harness
