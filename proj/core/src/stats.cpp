#include "covertime/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace covertime::stats {

namespace {

// Series expansion of P(a,x), valid for x < a+1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 2000; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a,x) (modified Lentz), valid for x >= a+1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 2000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::domain_error("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::domain_error("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi2_sf(double x, double k) { return gamma_q(0.5 * k, 0.5 * x); }

double gamma_cdf(double x, double shape, double scale) {
  if (x <= 0.0) return 0.0;
  return gamma_p(shape, x / scale);
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730951); }

double norm_sf(double z) { return 0.5 * std::erfc(z / 1.4142135623730951); }

double norm_quantile(double p) {
  if (p <= 0.0 || p >= 1.0) throw std::domain_error("norm_quantile: p outside (0,1)");
  // Acklam's rational approximation, |relative error| < 1.2e-9.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r, x;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    q = p - 0.5;
    r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  return x;
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-18) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double log_bessel_series(double z) {
  if (z <= 0.0) throw std::domain_error("log_bessel_series: z must be positive");
  // sum_{m>=1} z^m / (m! (m-1)!) = sqrt(z) I_1(2 sqrt(z)).
  // Accumulate in log space around the dominant term to stay finite.
  // Term ratio t_{m+1}/t_m = z / (m (m+1)); dominant m ~ sqrt(z).
  const std::int64_t m_peak = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::sqrt(z)));
  const double log_peak = static_cast<double>(m_peak) * std::log(z) -
                          std::lgamma(static_cast<double>(m_peak) + 1.0) -
                          std::lgamma(static_cast<double>(m_peak));
  double total = 0.0;
  // downward from the peak
  double t = 1.0;
  for (std::int64_t m = m_peak; m >= 1; --m) {
    total += t;
    if (t < 1e-18 * total) break;
    // t_{m-1} = t_m * m (m-1) / z, stop at m=1
    if (m > 1) t *= static_cast<double>(m) * static_cast<double>(m - 1) / z;
  }
  // upward from the peak
  t = 1.0;
  for (std::int64_t m = m_peak + 1; m < m_peak + 100000; ++m) {
    t *= z / (static_cast<double>(m) * static_cast<double>(m - 1));
    total += t;
    if (t < 1e-18 * total) break;
  }
  return log_peak + std::log(total);
}

double MeanAcc::sd() const { return std::sqrt(variance()); }

double MeanAcc::sem() const {
  return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t n1 = a.size(), n2 = b.size();
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < n1 && j < n2) {
    const double x = std::min(a[i], b[j]);
    while (i < n1 && a[i] <= x) ++i;
    while (j < n2 && b[j] <= x) ++j;
    const double f1 = static_cast<double>(i) / static_cast<double>(n1);
    const double f2 = static_cast<double>(j) / static_cast<double>(n2);
    d = std::max(d, std::abs(f1 - f2));
  }
  const double ne = static_cast<double>(n1) * static_cast<double>(n2) /
                    static_cast<double>(n1 + n2);
  const double sq = std::sqrt(ne);
  const double lambda = (sq + 0.12 + 0.11 / sq) * d;
  return {d, kolmogorov_sf(lambda), n1, n2};
}

KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) throw std::invalid_argument("ks_one_sample: empty sample");
  std::sort(a.begin(), a.end());
  const std::size_t n = a.size();
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(a[i]);
    const double lo = static_cast<double>(i) / static_cast<double>(n);
    const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
    d = std::max({d, std::abs(f - lo), std::abs(f - hi)});
  }
  const double sq = std::sqrt(static_cast<double>(n));
  const double lambda = (sq + 0.12 + 0.11 / sq) * d;
  return {d, kolmogorov_sf(lambda), n, 0};
}

namespace {

struct MergedCell {
  double o1 = 0.0, o2 = 0.0;
};

}  // namespace

Chi2Result chi2_two_sample(const std::vector<std::int64_t>& a,
                           const std::vector<std::int64_t>& b,
                           double min_expected) {
  if (a.size() != b.size()) throw std::invalid_argument("chi2_two_sample: size mismatch");
  double n1 = 0.0, n2 = 0.0;
  for (auto v : a) n1 += static_cast<double>(v);
  for (auto v : b) n2 += static_cast<double>(v);
  if (n1 <= 0.0 || n2 <= 0.0) throw std::invalid_argument("chi2_two_sample: empty counts");
  const double total = n1 + n2;

  // Merge adjacent cells until the smaller-sample expected count clears the
  // threshold in every merged cell.
  std::vector<MergedCell> cells;
  MergedCell cur;
  double cur_pool = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    cur.o1 += static_cast<double>(a[k]);
    cur.o2 += static_cast<double>(b[k]);
    cur_pool += static_cast<double>(a[k] + b[k]);
    const double e1 = n1 * cur_pool / total;
    const double e2 = n2 * cur_pool / total;
    if (std::min(e1, e2) >= min_expected) {
      cells.push_back(cur);
      cur = MergedCell{};
      cur_pool = 0.0;
    }
  }
  if (cur_pool > 0.0) {
    if (!cells.empty()) {
      cells.back().o1 += cur.o1;
      cells.back().o2 += cur.o2;
    } else {
      cells.push_back(cur);
    }
  }
  if (cells.size() < 2) return {0.0, 1.0, 0, static_cast<int>(cells.size())};

  double stat = 0.0;
  for (const auto& c : cells) {
    const double pool = c.o1 + c.o2;
    const double e1 = n1 * pool / total;
    const double e2 = n2 * pool / total;
    stat += (c.o1 - e1) * (c.o1 - e1) / e1 + (c.o2 - e2) * (c.o2 - e2) / e2;
  }
  const int dof = static_cast<int>(cells.size()) - 1;
  return {stat, chi2_sf(stat, dof), dof, static_cast<int>(cells.size())};
}

Chi2Result chi2_goodness(const std::vector<std::int64_t>& obs,
                         const std::vector<double>& expected,
                         double min_expected, int fitted_params) {
  if (obs.size() != expected.size()) throw std::invalid_argument("chi2_goodness: size mismatch");
  std::vector<double> mo, me;
  double co = 0.0, ce = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    co += static_cast<double>(obs[k]);
    ce += expected[k];
    if (ce >= min_expected) {
      mo.push_back(co);
      me.push_back(ce);
      co = 0.0;
      ce = 0.0;
    }
  }
  if (ce > 0.0 || co > 0.0) {
    if (!mo.empty()) {
      mo.back() += co;
      me.back() += ce;
    } else {
      mo.push_back(co);
      me.push_back(ce);
    }
  }
  if (mo.size() < 2) return {0.0, 1.0, 0, static_cast<int>(mo.size())};
  double stat = 0.0;
  for (std::size_t k = 0; k < mo.size(); ++k) {
    const double d = mo[k] - me[k];
    stat += d * d / me[k];
  }
  const int dof = static_cast<int>(mo.size()) - 1 - fitted_params;
  if (dof < 1) return {stat, 1.0, 0, static_cast<int>(mo.size())};
  return {stat, chi2_sf(stat, dof), dof, static_cast<int>(mo.size())};
}

Interval wilson_interval(std::int64_t successes, std::int64_t n, double confidence) {
  if (n <= 0) throw std::invalid_argument("wilson_interval: n must be positive");
  if (successes < 0 || successes > n) throw std::invalid_argument("wilson_interval: bad successes");
  const double z = norm_quantile(0.5 + 0.5 * confidence);
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (phat + z2 / (2.0 * nn)) / denom;
  const double half =
      z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {center - half, center + half};
}

}  // namespace covertime::stats
