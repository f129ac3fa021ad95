#pragma once

// Statistical test utilities shared by the simulation modules and the
// self-test harness: Kolmogorov-Smirnov, chi-square with small-cell merging,
// Wilson score intervals, and the special functions they need.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace covertime::stats {

// --- special functions ------------------------------------------------------

// Regularized incomplete gamma P(a,x) (lower) and Q(a,x) (upper).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Survival function of the chi-square distribution with k dof.
double chi2_sf(double x, double k);

// CDF of Gamma(shape, scale).
double gamma_cdf(double x, double shape, double scale);

// Standard normal CDF / survival / quantile (Acklam's rational approximation).
double norm_cdf(double z);
double norm_sf(double z);
double norm_quantile(double p);

// Kolmogorov asymptotic survival function Q(lambda) = 2 sum (-1)^{j-1} e^{-2 j^2 lambda^2}.
double kolmogorov_sf(double lambda);

// log of sum_{m>=1} z^m / (m! (m-1)!)  (the I_1 Bessel series used by the
// conditional edge-traversal pmf), computed to relative tail 1e-15.
double log_bessel_series(double z);

// --- accumulators ------------------------------------------------------------

struct MeanAcc {
  std::int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double sd() const;
  double sem() const;
};

// --- tests -------------------------------------------------------------------

struct KsResult {
  double d = 0.0;       // max ECDF distance
  double p = 1.0;       // asymptotic p-value
  std::size_t n1 = 0, n2 = 0;
};

// Two-sample KS test (samples are copied and sorted internally).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// One-sample KS test against a CDF.
KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf);

struct Chi2Result {
  double stat = 0.0;
  double p = 1.0;
  int dof = 0;
  int cells = 0;  // after merging
};

// Two-sample homogeneity chi-square on aligned count vectors.  Adjacent cells
// are merged until every expected count is >= min_expected.
Chi2Result chi2_two_sample(const std::vector<std::int64_t>& a,
                           const std::vector<std::int64_t>& b,
                           double min_expected = 5.0);

// Goodness-of-fit chi-square: observed counts against expected counts
// (same total), again with adjacent-cell merging.
Chi2Result chi2_goodness(const std::vector<std::int64_t>& obs,
                         const std::vector<double>& expected,
                         double min_expected = 5.0,
                         int fitted_params = 0);

struct Interval {
  double lo = 0.0, hi = 1.0;
};

// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::int64_t successes, std::int64_t n, double confidence);

}  // namespace covertime::stats
