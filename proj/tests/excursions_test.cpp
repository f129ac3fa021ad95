#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "covertime/excursions.hpp"
#include "covertime/rng.hpp"
#include "covertime/stats.hpp"
#include "covertime/torus.hpp"

namespace {

using namespace covertime;
constexpr double kPi = 3.14159265358979323846;
const torus::TorusPoint kCenter{0.5, 0.5};

}  // namespace

TEST_CASE("exact cycle mean: logarithmic ratio law") {
  CHECK(excursions::mean_cycle_exact(0.25, 0.25 / std::exp(1.0)) ==
        doctest::Approx(1.0 / kPi).epsilon(1e-12));
  CHECK(excursions::mean_cycle_exact(0.4, 0.1) ==
        doctest::Approx(std::log(4.0) / kPi).epsilon(1e-12));
}

TEST_CASE("equilibrium cycles: legs add up pathwise and times are positive") {
  Rng rng(substream(kDefaultSeed, 501));
  torus::SimConfig cfg;
  cfg.dt = 4e-4;
  cfg.dt_policy = torus::DtPolicy::kProximityScaled;
  const auto stats =
      excursions::equilibrium_cycles(kCenter, 0.25, 0.25 / std::exp(1.0), 400, 20, cfg, rng);
  REQUIRE(stats.n_cycles == 400);
  REQUIRE(stats.cycle_times.size() == 400);
  REQUIRE(stats.out_in_legs.size() == 400);
  REQUIRE(stats.in_out_legs.size() == 400);
  for (std::size_t i = 0; i < stats.cycle_times.size(); ++i) {
    CHECK(stats.cycle_times[i] > 0.0);
    CHECK(stats.out_in_legs[i] > 0.0);
    CHECK(stats.in_out_legs[i] > 0.0);
    CHECK(stats.out_in_legs[i] + stats.in_out_legs[i] ==
          doctest::Approx(stats.cycle_times[i]).epsilon(1e-9));
  }
}

TEST_CASE("equilibrium cycles: mean matches the exact identity") {
  Rng rng(substream(kDefaultSeed, 502));
  const double R = 0.25, r = 0.25 / std::exp(1.0);
  const double target = excursions::mean_cycle_exact(R, r);

  torus::SimConfig coarse;
  coarse.dt = 2e-4;
  coarse.dt_policy = torus::DtPolicy::kProximityScaled;
  torus::SimConfig fine = coarse;
  fine.dt = 1e-4;

  stats::MeanAcc mc, mf;
  const auto sc = excursions::equilibrium_cycles(kCenter, R, r, 12000, 50, coarse, rng);
  for (double v : sc.cycle_times) mc.add(v);
  const auto sf = excursions::equilibrium_cycles(kCenter, R, r, 12000, 50, fine, rng);
  for (double v : sf.cycle_times) mf.add(v);

  // The fine run carries the smaller boundary-detection bias; allow the
  // counting band plus sampling noise.
  CHECK(std::fabs(mf.mean - target) <= 0.03 * target + 3.0 * mf.sem());
  // Halving dt moves the estimate by at most its own noise plus a 1% drift.
  const double joint = std::sqrt(mc.sem() * mc.sem() + mf.sem() * mf.sem());
  CHECK(std::fabs(mc.mean - mf.mean) <= 3.0 * joint + 0.01 * target);
}

TEST_CASE("equilibrium cycles: inward leg mean approaches (R^2 - r^2)/2") {
  Rng rng(substream(kDefaultSeed, 503));
  const double R = 0.25, r = 0.25 / std::exp(1.0);
  torus::SimConfig cfg;
  cfg.dt = 1e-4;
  cfg.dt_policy = torus::DtPolicy::kProximityScaled;
  const auto st = excursions::equilibrium_cycles(kCenter, R, r, 8000, 50, cfg, rng);
  stats::MeanAcc acc;
  for (double v : st.in_out_legs) acc.add(v);
  const double target = (R * R - r * r) / 2.0;
  CHECK(std::fabs(acc.mean - target) <= 0.03 * target + 3.0 * acc.sem());
}

TEST_CASE("minorization constant: closed form and limits") {
  CHECK(excursions::minorization_q(0.2, 0.1) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  CHECK(excursions::minorization_q(0.2, 1e-9) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(excursions::minorization_q(0.2, 0.15) < excursions::minorization_q(0.2, 0.05));
}

TEST_CASE("minorization kernel: worst-start exit law dominates q x uniform") {
  Rng rng(substream(kDefaultSeed, 504));
  const auto rep = excursions::minorization_kernel_check(kCenter, 0.2, 0.1, 20000, rng);
  INFO(rep.detail);
  CHECK(rep.pass);
}

TEST_CASE("departure concentration: failure rates fall and spread decays") {
  Rng rng(substream(kDefaultSeed, 505));
  torus::SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.dt_policy = torus::DtPolicy::kProximityScaled;
  const std::vector<int> ns{50, 200, 800};
  const auto rep =
      excursions::concentration_experiment(kCenter, 0.25, 0.25 / std::exp(1.0), ns,
                                           0.5, 100, cfg, rng);
  REQUIRE(rep.n_list == ns);
  CHECK(rep.nonincreasing);
  CHECK(rep.failure_rate.back() <= 0.02);
  // Independent-block scaling: sd(D_n)/(n mu) ~ n^{-1/2}.
  CHECK(rep.loglog_slope == doctest::Approx(-0.5).epsilon(0.3));
  for (std::size_t i = 0; i + 1 < rep.rel_sd.size(); ++i)
    CHECK(rep.rel_sd[i + 1] < rep.rel_sd[i]);
}

TEST_CASE("hitting moments: kac bound at r = 0.05") {
  Rng rng(substream(kDefaultSeed, 506));
  torus::SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.dt_policy = torus::DtPolicy::kProximityScaled;
  const auto rep = excursions::khasminskii_check(kCenter, 0.05, 2, 150, cfg, rng);
  CHECK(rep.pass);
  REQUIRE(rep.moments.size() == 2);
  CHECK(rep.moments[0] <= rep.bounds[0] + 3.0 * rep.moment_se[0]);
  CHECK(rep.moments[1] <= rep.bounds[1] + 3.0 * rep.moment_se[1]);
  CHECK(rep.sup_mean > 0.0);
}

TEST_CASE("hitting moments: sup-mean scales with log(1/r)") {
  Rng rng(substream(kDefaultSeed, 507));
  torus::SimConfig cfg;
  cfg.dt = 2e-3;
  cfg.dt_policy = torus::DtPolicy::kProximityScaled;
  std::vector<double> ratio;
  for (double r : {0.1, 0.05, 0.025}) {
    const auto rep = excursions::khasminskii_check(kCenter, r, 1, 120, cfg, rng);
    ratio.push_back(rep.sup_mean / std::log(1.0 / r));
  }
  double lo = ratio[0], hi = ratio[0];
  for (double v : ratio) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi / lo < 2.0);
}
