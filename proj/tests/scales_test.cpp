#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "covertime/scales.hpp"

namespace {
using namespace covertime;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

TEST_CASE("radii: top radius at L = 16") {
  const auto r = scales::radii(16);
  REQUIRE(r.size() == 17);
  CHECK(r[0] == doctest::Approx(0.46541021457645537).epsilon(1e-12));
}

TEST_CASE("radii: consecutive ratio is e at every scale") {
  for (int L : {3, 10, 16, 100}) {
    const auto r = scales::radii(L);
    REQUIRE(static_cast<int>(r.size()) == L + 1);
    for (int l = 0; l + 1 <= L; ++l)
      CHECK(r[l] / r[l + 1] == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  }
}

TEST_CASE("radii: top radius shrinks as L grows; tiny L rejected") {
  CHECK(scales::radii(100)[0] < scales::radii(3)[0]);
  CHECK_THROWS_AS(scales::radii(2), std::domain_error);
  CHECK_THROWS_AS(scales::radii(0), std::domain_error);
}

TEST_CASE("excursion budget: closed-form values") {
  CHECK(scales::excursion_budget(7, 1.0) == doctest::Approx(2.0 * 49).epsilon(1e-15));
  CHECK(scales::excursion_budget(10, 0.0) ==
        doctest::Approx(176.97414907005953).epsilon(1e-12));
  CHECK(scales::excursion_budget(10, -1.0) ==
        doctest::Approx(153.94829814011908).epsilon(1e-12));
}

TEST_CASE("target time: s = 1 collapses to (2/pi) log^2") {
  for (double eps : {0.1, 0.01, 1e-4}) {
    const double le = std::log(1.0 / eps);
    CHECK(scales::target_time(eps, 1.0) ==
          doctest::Approx(2.0 / kPi * le * le).epsilon(1e-12));
  }
}

TEST_CASE("target time: reference value and monotonicity in s") {
  CHECK(scales::target_time(std::exp(-10.0), 0.0) ==
        doctest::Approx(56.33262124796386).epsilon(1e-10));
  double prev = scales::target_time(1e-3, -1.0);
  for (double s : {-0.5, 0.0, 0.5, 1.0}) {
    const double cur = scales::target_time(1e-3, s);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("target time: eps domain enforced") {
  CHECK_THROWS_AS(scales::target_time(0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(scales::target_time(1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(scales::target_time(1.5, 0.0), std::domain_error);
}

TEST_CASE("scale system: modified radii are similarity copies") {
  const auto sys = scales::make_scale_system(12, 0.5);
  const double factor = scales::modified_radius_factor(12);
  REQUIRE(sys.L == 12);
  CHECK(sys.t_s == doctest::Approx(scales::excursion_budget(12, 0.5)).epsilon(1e-15));
  for (int l = 0; l <= 12; ++l) {
    CHECK(sys.r_minus(l) == doctest::Approx(sys.r(l) * factor).epsilon(1e-13));
    CHECK(sys.r_plus(l) == doctest::Approx(sys.r(l) / factor).epsilon(1e-13));
    CHECK(sys.r_minus(l) < sys.r(l));
    CHECK(sys.r(l) < sys.r_plus(l));
  }
}

TEST_CASE("modified radius factor: plateau below L = 200, natural above 100") {
  CHECK(scales::modified_radius_factor(120) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(scales::modified_radius_factor(300) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(scales::modified_radii_natural(101));
  CHECK_FALSE(scales::modified_radii_natural(100));
}

TEST_CASE("barriers: endpoint identities") {
  for (int L : {8, 16, 50}) {
    const auto b = scales::barriers(L, 0.0);
    const double lg = std::log(static_cast<double>(L));
    CHECK(b.beta(static_cast<double>(L)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(b.alpha(static_cast<double>(L)) == doctest::Approx(-lg * lg).epsilon(1e-12));
    CHECK(b.gamma(0.0) == doctest::Approx(b.beta(0.0)).epsilon(1e-12));
    CHECK(b.delta(static_cast<double>(L)) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("barriers: gamma reference value at L = 16, l = 8") {
  const auto b = scales::barriers(16, 0.0);
  CHECK(b.gamma(8.0) == doctest::Approx(13.582695299712356).epsilon(1e-12));
}

TEST_CASE("barriers: ordering alpha < beta <= gamma <= delta on integer scales") {
  for (int L : {8, 16, 50}) {
    const auto b = scales::barriers(L, 0.25);
    for (int l = 0; l <= L; ++l) {
      const double x = static_cast<double>(l);
      CHECK(b.alpha(x) < b.beta(x));
      CHECK(b.beta(x) <= b.gamma(x) + 1e-12);
      CHECK(b.gamma(x) <= b.delta(x) + 1e-12);
    }
  }
}

TEST_CASE("barriers: square-root budget consistency") {
  const auto b = scales::barriers(20, 0.5);
  CHECK(b.sqrt_ts ==
        doctest::Approx(std::sqrt(scales::excursion_budget(20, 0.5))).epsilon(1e-12));
  CHECK(b.beta(0.0) == doctest::Approx(b.sqrt_ts).epsilon(1e-12));
}

TEST_CASE("target time at the bottom radius tracks the excursion budget") {
  for (int L : {50, 120}) {
    for (double s : {0.0, 0.5}) {
      const auto sys = scales::make_scale_system(L, s);
      const double ratio =
          scales::target_time(sys.r(L), s) / (scales::excursion_budget(L, s) / kPi);
      CHECK(ratio > 0.9);
      CHECK(ratio < 1.1);
    }
  }
}

TEST_CASE("cutoffs: defining l0 vanishes at feasible sizes, effective is usable") {
  for (int L : {8, 20, 80, 1000, 1000000}) {
    CHECK(scales::l0_cutoff(L) == 0);
    CHECK(scales::l0_effective(L) >= 1);
    CHECK(scales::l0_effective(L) < L / 2);
  }
}

TEST_CASE("scale construction is pure") {
  const auto a = scales::make_scale_system(14, 0.25);
  const auto b = scales::make_scale_system(14, 0.25);
  CHECK(a.radii == b.radii);
  CHECK(a.radii_minus == b.radii_minus);
  CHECK(a.radii_plus == b.radii_plus);
  CHECK(a.t_s == b.t_s);
}
