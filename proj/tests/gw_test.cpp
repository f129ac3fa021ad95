#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "covertime/gw.hpp"
#include "covertime/rng.hpp"
#include "covertime/scales.hpp"
#include "covertime/stats.hpp"

namespace {

using namespace covertime;

double binom_se(double p, std::int64_t n) {
  return std::sqrt(std::max(p * (1.0 - p), 1.0 / static_cast<double>(n)) /
                   static_cast<double>(n));
}

// Aligned per-value counts over {0..max(a,b)} for two integer samples.
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

TEST_CASE("offspring law: geometric-half point masses and mean") {
  Rng rng(substream(kDefaultSeed, 101));
  const std::int64_t N = 1000000;
  std::int64_t zeros = 0, threes = 0;
  stats::MeanAcc acc;
  for (std::int64_t i = 0; i < N; ++i) {
    const auto k = gw::offspring_sample(rng);
    zeros += k == 0;
    threes += k == 3;
    acc.add(static_cast<double>(k));
  }
  const double p0 = static_cast<double>(zeros) / static_cast<double>(N);
  const double p3 = static_cast<double>(threes) / static_cast<double>(N);
  CHECK(std::fabs(p0 - 0.5) <= 3.0 * binom_se(0.5, N));
  CHECK(std::fabs(p3 - 1.0 / 16.0) <= 3.0 * binom_se(1.0 / 16.0, N));
  // Offspring variance is 2, so 3 SE of the mean is 3 sqrt(2/N).
  CHECK(std::fabs(acc.mean - 1.0) <= 3.0 * std::sqrt(2.0 / static_cast<double>(N)));
}

TEST_CASE("traversal chain: deterministic first generation and t = 0") {
  Rng rng(substream(kDefaultSeed, 102));
  const auto zero = gw::gw_sample(0.0, 4, rng);
  REQUIRE(zero.counts.size() == 5);
  for (auto c : zero.counts) CHECK(c == 0);
  for (double t : {1.0, 2.5, 7.9}) {
    const auto prof = gw::gw_sample(t, 3, rng);
    CHECK(prof.counts[0] == static_cast<std::int64_t>(std::floor(t)));
  }
}

TEST_CASE("traversal chain: both founders childless with probability 1/4") {
  Rng rng(substream(kDefaultSeed, 103));
  const std::int64_t N = 1000000;
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < N; ++i)
    hits += gw::gw_sample(2.0, 1, rng).counts[1] == 0;
  const double p = static_cast<double>(hits) / static_cast<double>(N);
  CHECK(std::fabs(p - 0.25) <= 3.0 * binom_se(0.25, N));
}

TEST_CASE("traversal chain: zero is absorbing") {
  Rng rng(substream(kDefaultSeed, 104));
  for (int rep = 0; rep < 2000; ++rep) {
    const auto prof = gw::gw_sample(3.0, 8, rng);
    bool dead = false;
    for (auto c : prof.counts) {
      if (dead) CHECK(c == 0);
      dead = dead || c == 0;
    }
  }
}

TEST_CASE("traversal chain: one-step conditional mean is the parent count") {
  Rng rng(substream(kDefaultSeed, 105));
  stats::MeanAcc acc;
  for (int rep = 0; rep < 200000; ++rep) {
    const auto prof = gw::gw_sample(4.0, 2, rng);
    if (prof.counts[1] == 2) acc.add(static_cast<double>(prof.counts[2]));
  }
  REQUIRE(acc.n > 1000);
  CHECK(std::fabs(acc.mean - 2.0) <= 3.0 * acc.sem());
}

TEST_CASE("extinction probability: closed form") {
  CHECK(gw::extinction_prob(5, 0.0) == doctest::Approx(1.0));
  CHECK(gw::extinction_prob(5, 0.5) == doctest::Approx(1.0));
  CHECK(gw::extinction_prob(2, 2.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(gw::extinction_prob(4, 3.0) == doctest::Approx(27.0 / 64.0).epsilon(1e-15));
  CHECK_THROWS_AS(gw::extinction_prob(1, 2.0), std::invalid_argument);
}

TEST_CASE("extinction probability: pgf iteration matches the closed form") {
  for (int L : {2, 3, 5, 8}) {
    for (double t : {0.0, 1.0, 2.5, 11.0, 50.0}) {
      CHECK(gw::extinction_prob_pgf(L, t) ==
            doctest::Approx(gw::extinction_prob(L, t)).epsilon(1e-12));
    }
  }
}

TEST_CASE("extinction probability: simulation agreement at L = 4, t = 3") {
  Rng rng(substream(kDefaultSeed, 106));
  const std::int64_t N = 1000000;
  std::int64_t extinct = 0;
  for (std::int64_t i = 0; i < N; ++i)
    extinct += gw::gw_sample(3.0, 3, rng).counts[3] == 0;
  const double p = static_cast<double>(extinct) / static_cast<double>(N);
  const double target = 27.0 / 64.0;
  CHECK(std::fabs(p - target) <= 3.0 * binom_se(target, N));
}

TEST_CASE("transition pmf: negative-binomial values and row sums") {
  CHECK(gw::transition_pmf(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(gw::transition_pmf(2, 1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(gw::transition_pmf(0, 0) == doctest::Approx(1.0));
  CHECK(gw::transition_pmf(0, 3) == doctest::Approx(0.0));
  for (std::int64_t a : {1, 2, 5, 17, 50}) {
    double sum = 0.0;
    const std::int64_t bmax =
        a + static_cast<std::int64_t>(20.0 * std::sqrt(2.0 * static_cast<double>(a))) + 80;
    for (std::int64_t b = 0; b <= bmax; ++b) sum += gw::transition_pmf(a, b);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("transition pmf: log form is consistent") {
  for (std::int64_t a : {1, 3, 20}) {
    for (std::int64_t b : {0, 1, 7, 30}) {
      CHECK(std::exp(gw::log_transition_pmf(a, b)) ==
            doctest::Approx(gw::transition_pmf(a, b)).epsilon(1e-12));
    }
  }
}

TEST_CASE("barrier DP: vacuous barriers reproduce total and extinct mass") {
  const gw::Barrier none;
  for (int L : {2, 5, 12, 20}) {
    for (double t : {1.0, 7.0, 50.0, 200.0}) {
      const double plain = gw::barrier_prob_dp(L, t, none, none, false);
      CHECK(plain == doctest::Approx(1.0).epsilon(1e-12));
      gw::DpOptions opts;
      opts.condition_extinct = true;
      const auto res = gw::barrier_prob_dp_full(L, t, none, none, opts);
      CHECK(res.probability ==
            doctest::Approx(gw::extinction_prob(L, t)).epsilon(1e-12));
      CHECK(res.conditional == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("barrier DP: single-founder survival chain gives n/(n+1)") {
  const gw::Barrier none;
  gw::DpOptions opts;
  opts.condition_extinct = true;
  for (int n = 1; n <= 10; ++n) {
    const auto res = gw::barrier_prob_dp_full(n + 1, 1.0, none, none, opts);
    CHECK(res.probability ==
          doctest::Approx(static_cast<double>(n) / (n + 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("barrier DP: generation-zero barrier applies") {
  const gw::Barrier lower = [](int l) { return l == 0 ? 6.0 : -gw::kNoBound; };
  const auto res = gw::barrier_prob_dp_full(4, 5.0, lower, nullptr, {});
  CHECK(res.probability == 0.0);
}

TEST_CASE("barrier DP: joint barrier-and-extinction mass matches rejection") {
  gw::DpOptions opts;
  opts.condition_extinct = true;
  const gw::Barrier lower = [](int l) { return l <= 2 ? 1.0 : -gw::kNoBound; };
  const auto dp = gw::barrier_prob_dp_full(4, 3.0, lower, nullptr, opts);

  Rng rng(substream(kDefaultSeed, 107));
  const std::int64_t N = 200000;
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < N; ++i) {
    const auto prof = gw::gw_sample(3.0, 3, rng);
    hits += prof.counts[1] >= 1 && prof.counts[2] >= 1 && prof.counts[3] == 0;
  }
  const double emp = static_cast<double>(hits) / static_cast<double>(N);
  CHECK(std::fabs(emp - dp.probability) <= 3.0 * binom_se(dp.probability, N));
}

TEST_CASE("barrier DP: cap control") {
  const gw::Barrier none;
  gw::DpOptions tiny;
  tiny.cap = 40;
  CHECK_THROWS_AS(gw::barrier_prob_dp_full(3, 50.0, none, none, tiny),
                  std::invalid_argument);
  gw::DpOptions tight;
  tight.cap = 50;  // legal but funnels half the mass over the cap
  CHECK_THROWS_AS(gw::barrier_prob_dp_full(3, 50.0, none, none, tight),
                  std::runtime_error);
}

TEST_CASE("conditioned sampler matches the rejection oracle") {
  const int L = 6;
  const double t = 20.0;
  const std::int64_t N = 30000;
  Rng rng(substream(kDefaultSeed, 108));
  std::vector<std::vector<std::int64_t>> cond(L), rej(L);
  for (std::int64_t i = 0; i < N; ++i) {
    const auto a = gw::gw_sample_conditioned(t, L, rng);
    const auto b = gw::gw_sample_rejection(t, L, rng);
    CHECK(a.counts[static_cast<std::size_t>(L) - 1] == 0);
    CHECK(b.counts[static_cast<std::size_t>(L) - 1] == 0);
    for (int l = 1; l < L; ++l) {
      cond[static_cast<std::size_t>(l) - 1].push_back(
          a.counts[static_cast<std::size_t>(l)]);
      rej[static_cast<std::size_t>(l) - 1].push_back(
          b.counts[static_cast<std::size_t>(l)]);
    }
  }
  const double alpha = 0.01 / static_cast<double>(L - 1);
  for (int l = 0; l < L - 1; ++l) {
    const auto [ha, hb] = aligned_hist(cond[static_cast<std::size_t>(l)],
                                       rej[static_cast<std::size_t>(l)]);
    const auto res = stats::chi2_two_sample(ha, hb);
    CHECK(res.p > alpha);
  }
}

TEST_CASE("compound params: unmodified scale pair and validity") {
  const auto params = gw::compound_params_unmodified(30.0, 4);
  CHECK(params.n == 30);
  CHECK(params.p == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(params.q == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(params.valid());
  gw::CompoundParams bad;
  bad.n = 10;
  bad.p = 0.5;
  bad.q = 0.0;
  CHECK_FALSE(bad.valid());
  Rng rng(substream(kDefaultSeed, 109));
  CHECK_THROWS_AS(gw::compound_sample(bad, rng), std::invalid_argument);
}

TEST_CASE("compound params: modified geometry needs a wide factor") {
  // Below the threshold the inverted top pair makes the law degenerate.
  const auto small = scales::make_scale_system(120, 0.0);
  CHECK_THROWS_AS(gw::compound_params_from_scales(small, 3), std::domain_error);
  const auto big = scales::make_scale_system(300, 0.0);
  const auto params = gw::compound_params_from_scales(big, 3);
  CHECK(params.valid());
  CHECK(params.n == static_cast<std::int64_t>(big.t_s));
}

TEST_CASE("compound sample: mean matches n q / p") {
  gw::CompoundParams params;
  params.n = 50;
  params.p = 0.3;
  params.q = 0.4;
  Rng rng(substream(kDefaultSeed, 110));
  stats::MeanAcc acc;
  for (int i = 0; i < 100000; ++i)
    acc.add(static_cast<double>(gw::compound_sample(params, rng)));
  const double target = static_cast<double>(params.n) * params.q / params.p;
  CHECK(std::fabs(acc.mean - target) <= 3.0 * acc.sem());
}

TEST_CASE("compound lower-tail bound: values and domain") {
  gw::CompoundParams params;
  params.n = 100;
  params.p = 0.2;
  params.q = 0.2;
  CHECK(gw::ld_bound_compound(params, 100.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gw::ld_bound_compound(params, 25.0) ==
        doctest::Approx(0.006737946999085467).epsilon(1e-10));
  double prev = gw::ld_bound_compound(params, 10.0);
  for (double theta : {25.0, 50.0, 75.0, 100.0}) {
    const double cur = gw::ld_bound_compound(params, theta);
    CHECK(cur > prev);
    prev = cur;
  }
  CHECK_THROWS_AS(gw::ld_bound_compound(params, 101.0), std::domain_error);
}

TEST_CASE("compound lower-tail bound: simulation never beats it") {
  gw::CompoundParams params;
  params.n = 100;
  params.p = 0.2;
  params.q = 0.2;
  Rng rng(substream(kDefaultSeed, 111));
  const std::int64_t N = 200000;
  const double theta = 50.0;
  std::int64_t below = 0;
  for (std::int64_t i = 0; i < N; ++i)
    below += static_cast<double>(gw::compound_sample(params, rng)) <= theta;
  const double emp = static_cast<double>(below) / static_cast<double>(N);
  CHECK(emp <= gw::ld_bound_compound(params, theta) + 3.0 * binom_se(emp, N));
}

TEST_CASE("immigration chain: boundary cases and mean growth") {
  Rng rng(substream(kDefaultSeed, 112));
  const auto empty = gw::immigration_gw_sample(0, 1, 3, 5, rng);
  for (auto c : empty.counts) CHECK(c == 0);

  // k = k_plus: a single seeded generation, GW afterwards.
  const auto seeded = gw::immigration_gw_sample(3, 2, 2, 4, rng);
  CHECK(seeded.counts[2] == 3);
  CHECK(seeded.counts[0] == 0);
  CHECK(seeded.counts[1] == 0);

  // Fresh immigration of n at every generation in [k, k_plus] makes the
  // expected count at k_plus equal n (k_plus - k + 1).
  stats::MeanAcc acc;
  for (int i = 0; i < 20000; ++i) {
    const auto prof = gw::immigration_gw_sample(2, 1, 3, 4, rng);
    acc.add(static_cast<double>(prof.counts[3]));
  }
  CHECK(std::fabs(acc.mean - 6.0) <= 3.0 * acc.sem());
}
