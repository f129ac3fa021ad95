#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "covertime/gw.hpp"
#include "covertime/rng.hpp"
#include "covertime/scales.hpp"
#include "covertime/stats.hpp"
#include "covertime/torus.hpp"

namespace {

using namespace covertime;
constexpr double kPi = 3.14159265358979323846;

double binom_se(double p, std::int64_t n) {
  return std::sqrt(std::max(p * (1.0 - p), 1.0 / static_cast<double>(n)) /
                   static_cast<double>(n));
}

std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> aligned_hist(
    const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  std::int64_t top = 0;
  for (auto v : a) top = std::max(top, v);
  for (auto v : b) top = std::max(top, v);
  std::vector<std::int64_t> ha(static_cast<std::size_t>(top) + 1, 0);
  std::vector<std::int64_t> hb(static_cast<std::size_t>(top) + 1, 0);
  for (auto v : a) ++ha[static_cast<std::size_t>(v)];
  for (auto v : b) ++hb[static_cast<std::size_t>(v)];
  return {std::move(ha), std::move(hb)};
}

}  // namespace

TEST_CASE("torus metric: wrap, symmetry, bound, triangle inequality") {
  CHECK(torus::distance({0.95, 0.5}, {0.05, 0.5}) == doctest::Approx(0.1).epsilon(1e-12));
  Rng rng(substream(kDefaultSeed, 401));
  for (int i = 0; i < 10000; ++i) {
    const torus::TorusPoint a{rng.uniform(), rng.uniform()};
    const torus::TorusPoint b{rng.uniform(), rng.uniform()};
    const torus::TorusPoint c{rng.uniform(), rng.uniform()};
    const double ab = torus::distance(a, b);
    CHECK(ab == doctest::Approx(torus::distance(b, a)).epsilon(1e-12));
    CHECK(ab <= std::sqrt(2.0) / 2.0 + 1e-12);
    CHECK(ab <= torus::distance(a, c) + torus::distance(c, b) + 1e-12);
  }
}

TEST_CASE("torus metric: minimal image components") {
  const auto d = torus::minimal_delta({0.9, 0.1}, {0.1, 0.9});
  CHECK(d[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(-0.2).epsilon(1e-12));
  for (double v : d) {
    CHECK(v >= -0.5);
    CHECK(v < 0.5);
  }
}

TEST_CASE("euler step: increment variance matches dt per coordinate") {
  Rng rng(substream(kDefaultSeed, 402));
  const double dt = 1e-4;
  const std::int64_t N = 100000;
  stats::MeanAcc acc;
  torus::TorusPoint p{0.5, 0.5};
  for (std::int64_t i = 0; i < N; ++i) {
    const auto q = torus::em_step(p, dt, rng);
    const auto d = torus::minimal_delta(p, q);
    acc.add(d[0] * d[0]);
    acc.add(d[1] * d[1]);
    p = q;
  }
  CHECK(std::fabs(acc.mean - dt) <= 3.0 * acc.sem());
}

TEST_CASE("euler path: fixed stepping and early stop") {
  Rng rng(substream(kDefaultSeed, 403));
  torus::SimConfig cfg;
  cfg.dt = 1e-3;
  int steps = 0;
  double last = 0.0;
  torus::em_path({0.2, 0.2}, 1.0, cfg, rng,
                 [&](double t, const torus::TorusPoint&) {
                   ++steps;
                   last = t;
                   return steps < 100;
                 });
  CHECK(steps == 100);
  CHECK(last == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("euler path: proximity scaling shrinks the step near a circle") {
  Rng rng(substream(kDefaultSeed, 404));
  torus::SimConfig cfg;
  cfg.dt = 1e-4;
  cfg.dt_policy = torus::DtPolicy::kProximityScaled;
  torus::TrackedCircles tracked;
  tracked.center = {0.5, 0.5};
  tracked.radii = {0.1};
  tracked.rho_ref = 0.1;
  double first = -1.0;
  torus::em_path({0.65, 0.5}, 1.0, cfg, rng,
                 [&](double t, const torus::TorusPoint&) {
                   first = t;
                   return false;
                 },
                 &tracked);
  // Start distance to the circle is 0.05, so the fraction is (0.05/0.1)^2.
  CHECK(first == doctest::Approx(cfg.dt * 0.25).epsilon(1e-9));
}

TEST_CASE("disc exit: uniform angles from the center") {
  Rng rng(substream(kDefaultSeed, 405));
  const torus::TorusPoint c{0.5, 0.5};
  const double R = 0.2;
  const int bins = 36;
  std::vector<std::int64_t> obs(bins, 0);
  const std::int64_t N = 100000;
  for (std::int64_t i = 0; i < N; ++i) {
    const auto p = torus::disc_exit_sample(c, R, c, rng);
    const auto d = torus::minimal_delta(c, p);
    CHECK(std::sqrt(d[0] * d[0] + d[1] * d[1]) == doctest::Approx(R).epsilon(1e-9));
    const double ang = std::atan2(d[1], d[0]) + kPi;
    int b = static_cast<int>(ang / (2.0 * kPi) * bins);
    if (b == bins) b = 0;
    ++obs[static_cast<std::size_t>(b)];
  }
  std::vector<double> expected(bins, static_cast<double>(N) / bins);
  const auto res = stats::chi2_goodness(obs, expected);
  CHECK(res.p > 0.01);
}

TEST_CASE("disc exit: kernel normalization at several eccentricities") {
  const double R = 0.2;
  for (double frac : {0.0, 0.5, 0.9}) {
    const double rho = frac * R;
    const int K = 20000;
    double sum = 0.0;
    for (int i = 0; i < K; ++i) {
      const double phi = (i + 0.5) * 2.0 * kPi / K;
      sum += torus::disc_exit_density(R, rho, phi);
    }
    sum /= K;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("disc exit: off-center semicircle mass matches the kernel") {
  Rng rng(substream(kDefaultSeed, 406));
  const torus::TorusPoint c{0.5, 0.5};
  const double R = 0.2;
  const torus::TorusPoint u{0.5 + R / 2.0, 0.5};  // rho = R/2 along +x
  const std::int64_t N = 100000;
  std::int64_t near = 0;
  for (std::int64_t i = 0; i < N; ++i) {
    const auto p = torus::disc_exit_sample(c, R, u, rng);
    const auto d = torus::minimal_delta(c, p);
    near += d[0] > 0.0;  // exit on the semicircle nearest the start
  }
  const int K = 20000;
  double target = 0.0;
  for (int i = 0; i < K; ++i) {
    const double phi = -kPi / 2.0 + (i + 0.5) * kPi / K;
    target += torus::disc_exit_density(R, R / 2.0, phi);
  }
  target /= 2.0 * K;  // quadrature of the kernel over |phi| < pi/2
  const double emp = static_cast<double>(near) / static_cast<double>(N);
  CHECK(std::fabs(emp - target) <= 3.0 * binom_se(target, N));
}

TEST_CASE("annulus: hit probability closed forms") {
  const double r = 0.04, R = 0.2;
  CHECK(torus::annulus_hit_prob(r, std::sqrt(r * R), R) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(torus::annulus_hit_prob(0.2 / std::exp(2.0), 0.2 / std::exp(1.0), 0.2) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(torus::multiscale_hit_prob(0, 1, 5) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK_THROWS_AS(torus::annulus_hit_prob(0.1, 0.05, 0.2), std::domain_error);
}

TEST_CASE("annulus: exact Bernoulli sampler tracks the formula") {
  Rng rng(substream(kDefaultSeed, 407));
  const double r = 0.05, rho = 0.1, R = 0.2;
  const double p = torus::annulus_hit_prob(r, rho, R);
  const std::int64_t N = 100000;
  std::int64_t inner = 0;
  for (std::int64_t i = 0; i < N; ++i)
    inner += torus::annulus_first_hit({0.5, 0.5}, r, rho, R, rng);
  const double emp = static_cast<double>(inner) / static_cast<double>(N);
  CHECK(std::fabs(emp - p) <= 3.0 * binom_se(p, N));
}

TEST_CASE("annulus: discretized walk agrees with the exact coin") {
  Rng rng(substream(kDefaultSeed, 408));
  const double r = 0.05, rho = 0.1, R = 0.2;
  torus::SimConfig cfg;
  cfg.dt = 1e-5;
  const std::int64_t N = 2000;
  std::int64_t inner = 0;
  for (std::int64_t i = 0; i < N; ++i)
    inner += torus::annulus_first_hit_em({0.5, 0.5}, r, rho, R, cfg, rng);
  const double emp = static_cast<double>(inner) / static_cast<double>(N);
  const double p = torus::annulus_hit_prob(r, rho, R);
  CHECK(std::fabs(emp - p) <= 3.0 * binom_se(p, N) + 0.01);
}

TEST_CASE("disc exit time: mean matches R^2/2 from the center") {
  Rng rng(substream(kDefaultSeed, 409));
  torus::SimConfig cfg;
  cfg.dt = 1e-5;
  const double R = 0.2;
  stats::MeanAcc acc;
  for (int i = 0; i < 1500; ++i)
    acc.add(torus::disc_exit_time_em({0.5, 0.5}, R, {0.5, 0.5}, cfg, rng));
  const double target = R * R / 2.0;
  CHECK(std::fabs(acc.mean - target) <= 3.0 * acc.sem() + 0.025 * target);
}

TEST_CASE("excursion decomposition: alternation and departure count") {
  Rng rng(substream(kDefaultSeed, 410));
  torus::SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.dt_policy = torus::DtPolicy::kProximityScaled;
  for (double t : {1.0, 4.7}) {
    const auto log = torus::excursion_decompose({0.5, 0.5}, 0.25, 0.1, t, cfg, rng);
    REQUIRE(!log.events.empty());
    std::int64_t departures = 0;
    double prev = 0.0;
    for (std::size_t i = 0; i < log.events.size(); ++i) {
      const auto& ev = log.events[i];
      const bool expect_return = i % 2 == 0;
      CHECK((ev.kind == torus::EventKind::kReturn) == expect_return);
      CHECK(ev.time > prev);
      prev = ev.time;
      departures += ev.kind == torus::EventKind::kDeparture;
    }
    CHECK(departures == static_cast<std::int64_t>(std::floor(t)));
    CHECK(log.events.back().kind == torus::EventKind::kDeparture);
  }
}

TEST_CASE("traversal profile: exact mode seeds the first generation") {
  Rng rng(substream(kDefaultSeed, 411));
  const auto sys = scales::make_scale_system(5, 0.0);
  torus::SimConfig cfg;
  for (double t : {1.0, 6.5}) {
    const auto prof = torus::traversal_profile({0.5, 0.5}, sys, t,
                                               torus::ProfileMode::kExactUntimed, cfg, rng);
    CHECK(prof.counts[0] == static_cast<std::int64_t>(std::floor(t)));
    bool dead = false;
    for (auto c : prof.counts) {
      if (dead) CHECK(c == 0);
      dead = dead || c == 0;
    }
  }
}

TEST_CASE("traversal profile: exact mode reproduces the branching law") {
  Rng rng(substream(kDefaultSeed, 412));
  const int L = 6;
  const double t = 20.0;
  const std::int64_t N = 4000;
  const auto sys = scales::make_scale_system(L, 0.0);
  torus::SimConfig cfg;
  std::vector<std::vector<std::int64_t>> walk(4), chain(4);
  for (std::int64_t i = 0; i < N; ++i) {
    const auto prof = torus::traversal_profile({0.5, 0.5}, sys, t,
                                               torus::ProfileMode::kExactUntimed, cfg, rng);
    const auto ref = gw::gw_sample(t, L - 1, rng);
    for (int l = 1; l <= 4; ++l) {
      walk[static_cast<std::size_t>(l) - 1].push_back(prof.counts[static_cast<std::size_t>(l)]);
      chain[static_cast<std::size_t>(l) - 1].push_back(ref.counts[static_cast<std::size_t>(l)]);
    }
  }
  for (int l = 0; l < 4; ++l) {
    const auto [ha, hb] = aligned_hist(walk[static_cast<std::size_t>(l)],
                                       chain[static_cast<std::size_t>(l)]);
    const auto res = stats::chi2_two_sample(ha, hb);
    CHECK(res.p > 0.01 / 4.0);
  }
}

TEST_CASE("traversal profile: timed simulation matches the exact chain") {
  Rng rng(substream(kDefaultSeed, 413));
  const int L = 4;
  const double t = 10.0;
  const std::int64_t N = 800;
  const auto sys = scales::make_scale_system(L, 0.0);
  torus::SimConfig cfg;
  cfg.dt = 2e-4;
  cfg.dt_policy = torus::DtPolicy::kProximityScaled;
  std::vector<std::vector<std::int64_t>> timed(3), exact(3);
  for (std::int64_t i = 0; i < N; ++i) {
    const auto a = torus::traversal_profile({0.5, 0.5}, sys, t,
                                            torus::ProfileMode::kTimedEm, cfg, rng);
    const auto b = torus::traversal_profile({0.5, 0.5}, sys, t,
                                            torus::ProfileMode::kExactUntimed, cfg, rng);
    CHECK(a.counts[0] == static_cast<std::int64_t>(std::floor(t)));
    for (int l = 1; l < L; ++l) {
      timed[static_cast<std::size_t>(l) - 1].push_back(a.counts[static_cast<std::size_t>(l)]);
      exact[static_cast<std::size_t>(l) - 1].push_back(b.counts[static_cast<std::size_t>(l)]);
    }
  }
  for (int l = 0; l < L - 1; ++l) {
    const auto [ha, hb] = aligned_hist(timed[static_cast<std::size_t>(l)],
                                       exact[static_cast<std::size_t>(l)]);
    const auto res = stats::chi2_two_sample(ha, hb);
    CHECK(res.p > 0.01 / 3.0);
  }
}

TEST_CASE("geometry rescale: top radius capped at 0.45") {
  const auto small = scales::make_scale_system(3, 0.0);
  const double f_small = torus::geometry_scale_factor(small);
  CHECK(f_small * small.r(0) <= 0.45 + 1e-12);
  const auto big = scales::make_scale_system(200, 0.0);
  CHECK(torus::geometry_scale_factor(big) == doctest::Approx(1.0));
  const double fp = torus::packing_geometry_scale(big, 0.5);
  CHECK(fp * std::max(big.r(0), big.r(1) / 0.5) <= 0.45 + 1e-12);
}

TEST_CASE("paired profiles: coincident centers give identical counts") {
  Rng rng(substream(kDefaultSeed, 414));
  const auto sys = scales::make_scale_system(4, 0.0);
  torus::SimConfig cfg;
  cfg.dt = 5e-4;
  cfg.dt_policy = torus::DtPolicy::kProximityScaled;
  for (int rep = 0; rep < 20; ++rep) {
    const auto [a, b] = torus::paired_traversal_profiles({0.3, 0.7}, {0.3, 0.7}, sys,
                                                         4.0, 1.0, cfg, rng);
    CHECK(a.counts == b.counts);
  }
}

TEST_CASE("packing counters: unit factor collapses the coupling") {
  Rng rng(substream(kDefaultSeed, 415));
  const auto sys = scales::make_scale_system(5, 0.0);
  torus::SimConfig cfg;
  cfg.dt = 5e-4;
  cfg.dt_policy = torus::DtPolicy::kProximityScaled;
  for (int rep = 0; rep < 20; ++rep) {
    const auto res = torus::packing_coupled_counters({0.4, 0.6}, {0.4, 0.6}, sys, 2,
                                                     6.0, 1.0, cfg, rng);
    CHECK_FALSE(res.degenerate);
    CHECK(res.t_hat == res.t_tilde);
  }
}

TEST_CASE("occupation fraction: long runs split evenly across the torus") {
  Rng rng(substream(kDefaultSeed, 416));
  torus::SimConfig cfg;
  cfg.dt = 1e-3;
  double in_half = 0.0, total = 0.0;
  torus::em_path({0.25, 0.25}, 200.0, cfg, rng,
                 [&](double, const torus::TorusPoint& p) {
                   in_half += p.x < 0.5;
                   total += 1.0;
                   return true;
                 });
  CHECK(std::fabs(in_half / total - 0.5) < 0.1);
}
