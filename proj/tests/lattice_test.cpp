#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "covertime/bridges.hpp"
#include "covertime/gw.hpp"
#include "covertime/lattice.hpp"
#include "covertime/rng.hpp"
#include "covertime/stats.hpp"

namespace {

using namespace covertime;

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

TEST_CASE("walk: zero budget leaves everything at zero") {
  Rng rng(substream(kDefaultSeed, 301));
  for (auto stop : {lattice::StopKind::kReturns, lattice::StopKind::kInverseLocalTime}) {
    const auto run = lattice::ctrw_run(6, 0.0, stop, rng);
    for (double v : run.local_times) CHECK(v == 0.0);
    for (auto c : run.edge_traversals) CHECK(c == 0);
  }
}

TEST_CASE("walk: returns stop pins the first edge count") {
  Rng rng(substream(kDefaultSeed, 302));
  for (double t : {1.0, 4.0, 9.7}) {
    const auto run = lattice::ctrw_run(5, t, lattice::StopKind::kReturns, rng);
    CHECK(run.edge_traversals[0] == static_cast<std::int64_t>(std::floor(t)));
  }
}

TEST_CASE("walk: degree-weighted local times account for all elapsed time") {
  Rng rng(substream(kDefaultSeed, 303));
  for (int rep = 0; rep < 200; ++rep) {
    const auto run = lattice::ctrw_run(7, 3.0, lattice::StopKind::kReturns, rng);
    double total = 0.0;
    for (int v = 0; v <= run.L; ++v) {
      const double degree = (v == 0 || v == run.L) ? 1.0 : 2.0;
      total += degree * run.local_times[static_cast<std::size_t>(v)];
    }
    CHECK(total == doctest::Approx(run.elapsed).epsilon(1e-9));
  }
}

TEST_CASE("walk: edge counts vanish beyond the first zero") {
  Rng rng(substream(kDefaultSeed, 304));
  for (int rep = 0; rep < 500; ++rep) {
    const auto run = lattice::ctrw_run(8, 2.0, lattice::StopKind::kReturns, rng);
    bool dead = false;
    for (auto c : run.edge_traversals) {
      if (dead) CHECK(c == 0);
      dead = dead || c == 0;
    }
  }
}

TEST_CASE("walk: inverse-local-time stop accrues the requested time at zero") {
  Rng rng(substream(kDefaultSeed, 305));
  for (int rep = 0; rep < 100; ++rep) {
    const auto run =
        lattice::ctrw_run(6, 2.5, lattice::StopKind::kInverseLocalTime, rng);
    CHECK(run.local_times[0] == doctest::Approx(2.5).epsilon(1e-12));
  }
}

TEST_CASE("walk: returns-stopped edge counts follow the branching law") {
  const int L = 8;
  const double t = 5.0;
  const std::int64_t N = 10000;
  Rng rng(substream(kDefaultSeed, 306));
  std::vector<std::vector<std::int64_t>> walk(static_cast<std::size_t>(L) - 1),
      chain(static_cast<std::size_t>(L) - 1);
  for (std::int64_t i = 0; i < N; ++i) {
    const auto run = lattice::ctrw_run(L, t, lattice::StopKind::kReturns, rng);
    const auto prof = gw::gw_sample(t, L - 1, rng);
    for (int l = 1; l < L; ++l) {
      walk[static_cast<std::size_t>(l) - 1].push_back(
          run.edge_traversals[static_cast<std::size_t>(l)]);
      chain[static_cast<std::size_t>(l) - 1].push_back(
          prof.counts[static_cast<std::size_t>(l)]);
    }
  }
  const double alpha = 0.01 / static_cast<double>(L - 1);
  for (int l = 0; l < L - 1; ++l) {
    const auto [ha, hb] = aligned_hist(walk[static_cast<std::size_t>(l)],
                                       chain[static_cast<std::size_t>(l)]);
    const auto res = stats::chi2_two_sample(ha, hb);
    CHECK(res.p > alpha);
  }
}

TEST_CASE("walk: unvisited far vertex happens as often as chain extinction") {
  const int L = 6;
  const double t = 10.0;
  const std::int64_t N = 20000;
  Rng rng(substream(kDefaultSeed, 307));
  std::int64_t unvisited = 0;
  for (std::int64_t i = 0; i < N; ++i) {
    const auto run = lattice::ctrw_run(L, t, lattice::StopKind::kReturns, rng);
    const bool edge_zero = run.edge_traversals[static_cast<std::size_t>(L) - 1] == 0;
    const bool vertex_zero = run.local_times[static_cast<std::size_t>(L)] == 0.0;
    CHECK(edge_zero == vertex_zero);
    unvisited += vertex_zero;
  }
  const double target = gw::extinction_prob(L, t);
  const double emp = static_cast<double>(unvisited) / static_cast<double>(N);
  CHECK(std::fabs(emp - target) <= 3.0 * binom_se(target, N));
}

TEST_CASE("ray-knight marginal: interior vertex at L = 8, t = 5") {
  Rng rng(substream(kDefaultSeed, 308));
  const auto rep = lattice::ray_knight_marginal_check(8, 5.0, 3, 10000, rng);
  INFO(rep.detail);
  CHECK(rep.pass);
  CHECK(rep.p_value > 0.01);
}

TEST_CASE("ray-knight marginal: zero-mass atom matches d = 0 absorption") {
  // P[vertex L never visited] under the inverse-local-time stop equals the
  // probability the comparison squared Bessel path has died by step L.
  const int L = 8;
  const double t = 5.0;
  const std::int64_t N = 5000;
  Rng rng(substream(kDefaultSeed, 309));
  std::int64_t walk_zero = 0, besq_zero = 0;
  for (std::int64_t i = 0; i < N; ++i) {
    const auto run = lattice::ctrw_run(L, t, lattice::StopKind::kInverseLocalTime, rng);
    walk_zero += run.local_times[static_cast<std::size_t>(L)] == 0.0;
    const auto path = bridges::besq_sample(0, 2.0 * t, static_cast<double>(L), L, rng);
    besq_zero += path.values.back() == 0.0;
  }
  const double pw = static_cast<double>(walk_zero) / static_cast<double>(N);
  const double pb = static_cast<double>(besq_zero) / static_cast<double>(N);
  const double joint = std::sqrt(binom_se(pw, N) * binom_se(pw, N) +
                                 binom_se(pb, N) * binom_se(pb, N));
  CHECK(std::fabs(pw - pb) <= 3.0 * joint);
}

TEST_CASE("conditional traversal pmf: normalization and ratio recursion") {
  for (double z : {0.25, 1.0, 25.0, 400.0}) {
    const double u = std::sqrt(z), u2 = std::sqrt(z);
    double sum = 0.0;
    for (std::int64_t m = 1; m <= 400; ++m) sum += lattice::conditional_traversal_pmf(u, u2, m);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(lattice::conditional_traversal_pmf(u, u2, 2) /
              lattice::conditional_traversal_pmf(u, u2, 1) ==
          doctest::Approx(z / 2.0).epsilon(1e-12));
  }
}

TEST_CASE("conditional traversal pmf: reference value and small-z limit") {
  CHECK(lattice::conditional_traversal_pmf(1.0, 1.0, 1) ==
        doctest::Approx(0.6286790080869865).epsilon(1e-12));
  CHECK(lattice::conditional_traversal_pmf(1e-3, 1e-3, 1) ==
        doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("conditional pmf check: binned chi-square at L = 6, t = 8") {
  Rng rng(substream(kDefaultSeed, 310));
  const auto rep = lattice::conditional_pmf_check(6, 8.0, 3, 20000, rng);
  INFO(rep.detail);
  CHECK(rep.pass);
  CHECK(rep.p_value > 0.01);
}

TEST_CASE("conditioned gamma law: first vertex under far-vertex extinction") {
  Rng rng(substream(kDefaultSeed, 311));
  const auto rep = lattice::conditioned_gamma_check(6, 10, 10000, rng);
  INFO(rep.detail);
  CHECK(rep.pass);
  CHECK(rep.p_value > 0.01);
}

TEST_CASE("conditional local-time representation at L = 6, t = 8") {
  Rng rng(substream(kDefaultSeed, 312));
  const auto rep = lattice::conditional_loctime_ld_check(6, 8.0, 2, 20000, rng);
  INFO(rep.detail);
  CHECK(rep.pass);
  CHECK(rep.p_value > 0.01);
}
