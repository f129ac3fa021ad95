#include "covertime/gw.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace covertime::gw {

namespace {

std::int64_t floor_time(double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("gw: t must be >= 0");
  return static_cast<std::int64_t>(std::floor(t));
}

// Geometric on {0,1,...} with P[k] = (1-theta) theta^k.
std::int64_t geometric_failure(double theta, Rng& rng) {
  if (theta <= 0.0) return 0;
  double u = rng.uniform_pos();
  return static_cast<std::int64_t>(std::floor(std::log(u) / std::log(theta)));
}

// Negative-binomial pmf vector h[b] = P[sum of a geometric(theta) = b],
// b = 0..bhi, computed outward from the mode so huge a does not underflow
// the b = 0 anchor.
void nb_pmf_vector(std::int64_t a, double theta, std::int64_t bhi,
                   std::vector<double>& h) {
  h.assign(static_cast<std::size_t>(bhi) + 1, 0.0);
  const double mean = static_cast<double>(a) * theta / (1.0 - theta);
  std::int64_t b0 = std::clamp<std::int64_t>(
      static_cast<std::int64_t>(mean), 0, bhi);
  const double la = static_cast<double>(a);
  const double lb = static_cast<double>(b0);
  double logp = std::lgamma(la + lb) - std::lgamma(la) - std::lgamma(lb + 1.0) +
                la * std::log1p(-theta) + lb * std::log(theta);
  const double anchor = std::exp(logp);
  h[static_cast<std::size_t>(b0)] = anchor;
  // h[b+1]/h[b] = theta (a+b)/(b+1)
  double v = anchor;
  for (std::int64_t b = b0; b < bhi && v > 0.0; ++b) {
    v *= theta * static_cast<double>(a + b) / static_cast<double>(b + 1);
    h[static_cast<std::size_t>(b + 1)] = v;
  }
  v = anchor;
  for (std::int64_t b = b0; b > 0 && v > 0.0; --b) {
    v *= static_cast<double>(b) / (theta * static_cast<double>(a + b - 1));
    h[static_cast<std::size_t>(b - 1)] = v;
  }
}

// In place: h <- h convolved with one more geometric(theta) founder,
// h'(m) = theta h'(m-1) + (1-theta) h(m).
void add_founder(double theta, std::vector<double>& h) {
  const double om = 1.0 - theta;
  double prev = h[0] * om;
  h[0] = prev;
  for (std::size_t m = 1; m < h.size(); ++m) {
    prev = theta * prev + om * h[m];
    h[m] = prev;
  }
}

struct Window {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

Window window_at(const Barrier& lower, const Barrier& upper, int l,
                 std::int64_t cap) {
  double lo = lower ? lower(l) : -kNoBound;
  double up = upper ? upper(l) : kNoBound;
  Window w;
  w.lo = lo <= 0.0 ? 0
                   : std::min<std::int64_t>(
                         cap + 1, static_cast<std::int64_t>(std::ceil(lo)));
  w.hi = up >= static_cast<double>(cap)
             ? cap
             : (up < 0.0 ? -1 : static_cast<std::int64_t>(std::floor(up)));
  return w;
}

}  // namespace

std::int64_t offspring_sample(Rng& rng) { return rng.geometric_half(); }

TraversalProfile gw_sample(double t, int horizon, Rng& rng) {
  if (horizon < 0) throw std::invalid_argument("gw_sample: horizon must be >= 0");
  TraversalProfile out;
  out.budget = t;
  out.counts.resize(static_cast<std::size_t>(horizon) + 1, 0);
  out.counts[0] = floor_time(t);
  for (int l = 0; l < horizon; ++l) {
    std::int64_t next = 0;
    for (std::int64_t i = 0; i < out.counts[static_cast<std::size_t>(l)]; ++i)
      next += rng.geometric_half();
    out.counts[static_cast<std::size_t>(l) + 1] = next;
  }
  return out;
}

double extinction_prob(int L, double t) {
  if (L < 2) throw std::invalid_argument("extinction_prob: L must be >= 2");
  return std::pow(1.0 - 1.0 / static_cast<double>(L),
                  static_cast<double>(floor_time(t)));
}

double extinction_prob_pgf(int L, double t) {
  if (L < 2) throw std::invalid_argument("extinction_prob_pgf: L must be >= 2");
  double e = 0.0;
  for (int l = 0; l < L - 1; ++l) e = 1.0 / (2.0 - e);
  return std::pow(e, static_cast<double>(floor_time(t)));
}

double log_transition_pmf(std::int64_t a, std::int64_t b) {
  if (a < 0 || b < 0) throw std::invalid_argument("transition_pmf: negative state");
  if (a == 0) return b == 0 ? 0.0 : -kNoBound;
  const double la = static_cast<double>(a);
  const double lb = static_cast<double>(b);
  return std::lgamma(la + lb) - std::lgamma(la) - std::lgamma(lb + 1.0) -
         (la + lb) * std::log(2.0);
}

double transition_pmf(std::int64_t a, std::int64_t b) {
  double lp = log_transition_pmf(a, b);
  return lp == -kNoBound ? 0.0 : std::exp(lp);
}

DpResult barrier_prob_dp_full(int L, double t, const Barrier& lower,
                              const Barrier& upper, const DpOptions& opts) {
  if (L < 2) throw std::invalid_argument("barrier_prob_dp: L must be >= 2");
  const std::int64_t n0 = floor_time(t);
  std::int64_t cap = opts.cap;
  if (cap < 0) cap = std::max<std::int64_t>(4 * n0, 200);
  if (cap < n0)
    throw std::invalid_argument("barrier_prob_dp: cap smaller than floor(t)");

  DpResult res;
  res.extinction = extinction_prob(L, t);

  std::vector<double> v(static_cast<std::size_t>(cap) + 1, 0.0);
  std::vector<double> w;
  std::vector<double> h;
  double lost = 0.0;

  v[static_cast<std::size_t>(n0)] = 1.0;
  {
    Window win0 = window_at(lower, upper, 0, cap);
    if (n0 < win0.lo || n0 > win0.hi) {
      res.probability = 0.0;
      res.conditional = 0.0;
      return res;
    }
  }
  std::int64_t alo = n0;
  std::int64_t ahi = n0;

  for (int l = 0; l < L - 1; ++l) {
    // Offspring failure parameter for this generation: 1/2 for the plain
    // chain; the extinction transform uses theta_l = (L-2-l)/(2(L-1-l)).
    const double theta =
        opts.condition_extinct
            ? static_cast<double>(L - 2 - l) / (2.0 * static_cast<double>(L - 1 - l))
            : 0.5;

    double atom = alo == 0 ? v[0] : 0.0;
    double total_in = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::int64_t a = alo; a <= ahi; ++a) {
      const double m = v[static_cast<std::size_t>(a)];
      total_in += m;
      s1 += m * static_cast<double>(a);
      s2 += m * static_cast<double>(a) * static_cast<double>(a);
    }
    const double branching_mass = total_in - atom;

    Window win = window_at(lower, upper, l + 1, cap);
    std::int64_t bhi = cap;
    if (theta > 0.0 && branching_mass > 0.0) {
      const double mu1 = theta / (1.0 - theta);
      const double var1 = theta / ((1.0 - theta) * (1.0 - theta));
      const double ea = s1 / (branching_mass > 0.0 ? branching_mass : 1.0);
      const double ea2 = s2 / (branching_mass > 0.0 ? branching_mass : 1.0);
      const double mean_w = mu1 * ea;
      const double var_w = var1 * ea + mu1 * mu1 * std::max(0.0, ea2 - ea * ea);
      bhi = std::min<std::int64_t>(
          cap, static_cast<std::int64_t>(
                   std::ceil(mean_w + 14.0 * std::sqrt(var_w) + 64.0)));
    }

    w.assign(static_cast<std::size_t>(bhi) + 1, 0.0);
    if (theta <= 0.0) {
      w[0] = total_in;
    } else {
      w[0] = atom;
      const std::int64_t first = std::max<std::int64_t>(alo, 1);
      if (first <= ahi && branching_mass > 0.0) {
        nb_pmf_vector(first, theta, bhi, h);
        for (std::int64_t a = first; a <= ahi; ++a) {
          if (a > first) add_founder(theta, h);
          const double m = v[static_cast<std::size_t>(a)];
          if (m > 0.0) {
            for (std::size_t b = 0; b < h.size(); ++b) w[b] += m * h[b];
          }
        }
      }
    }

    double total_out = 0.0;
    for (double x : w) total_out += x;
    const double raw_lost = std::max(0.0, total_in - total_out);
    // Mass beyond bhi counts as truncated only when it would have survived
    // the next window; otherwise the window was about to remove it anyway.
    if (win.hi >= bhi) lost += raw_lost;

    std::int64_t nlo = std::max<std::int64_t>(win.lo, 0);
    std::int64_t nhi = std::min<std::int64_t>(win.hi, bhi);
    double kept = 0.0;
    for (std::int64_t b = nlo; b <= nhi; ++b) kept += w[static_cast<std::size_t>(b)];
    const double tiny = kept * 1e-18;
    if (v.size() < w.size()) v.resize(w.size(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    std::int64_t slo = -1;
    std::int64_t shi = -1;
    for (std::int64_t b = nlo; b <= nhi; ++b) {
      const double m = w[static_cast<std::size_t>(b)];
      if (m <= tiny) {
        lost += m;
        continue;
      }
      v[static_cast<std::size_t>(b)] = m;
      if (slo < 0) slo = b;
      shi = b;
    }
    if (slo < 0) {
      res.probability = 0.0;
      res.truncated_mass = lost;
      res.conditional = 0.0;
      if (lost > opts.truncation_tolerance)
        throw std::runtime_error(
            "barrier_prob_dp: truncated mass " + std::to_string(lost) +
            " exceeds tolerance; increase cap");
      return res;
    }
    alo = slo;
    ahi = shi;
  }

  double total = 0.0;
  for (std::int64_t a = alo; a <= ahi; ++a) total += v[static_cast<std::size_t>(a)];
  res.truncated_mass = lost;
  if (lost > opts.truncation_tolerance)
    throw std::runtime_error("barrier_prob_dp: truncated mass " +
                             std::to_string(lost) +
                             " exceeds tolerance; increase cap");
  if (opts.condition_extinct) {
    res.probability = total * res.extinction;
    res.conditional = total;
  } else {
    res.probability = total;
    res.conditional = 0.0;
  }
  return res;
}

double barrier_prob_dp(int L, double t, const Barrier& lower,
                       const Barrier& upper, bool condition_extinct,
                       std::int64_t cap) {
  DpOptions opts;
  opts.condition_extinct = condition_extinct;
  opts.cap = cap;
  return barrier_prob_dp_full(L, t, lower, upper, opts).probability;
}

CompoundParams compound_params_from_scales(const scales::ScaleSystem& sys, int l) {
  if (l < 1 || l + 1 > sys.L)
    throw std::invalid_argument("compound_params_from_scales: need 1 <= l <= L-1");
  const double r0m = sys.r_minus(0);
  const double r1p = sys.r_plus(1);
  const double rlp = sys.r_plus(l);
  const double rl1m = sys.r_minus(l + 1);
  const double denom = std::log(r0m / rl1m);
  CompoundParams params;
  params.n = floor_time(sys.t_s);
  params.p = std::log(rlp / rl1m) / denom;
  params.q = std::log(r0m / r1p) / denom;
  if (!(params.p > 0.0 && params.p < 1.0 && params.q > 0.0 && params.q < 1.0))
    throw std::domain_error(
        "compound_params_from_scales: modified radii are inverted at this L "
        "(requires the modification factor to exceed exp(-1/2))");
  return params;
}

CompoundParams compound_params_unmodified(double t, int l) {
  if (l < 1) throw std::invalid_argument("compound_params_unmodified: l >= 1");
  CompoundParams params;
  params.n = floor_time(t);
  params.p = 1.0 / static_cast<double>(l + 1);
  params.q = params.p;
  return params;
}

std::int64_t compound_sample(const CompoundParams& params, Rng& rng) {
  if (!(params.p > 0.0 && params.p <= 1.0 && params.q > 0.0 && params.q <= 1.0))
    throw std::invalid_argument("compound_sample: p, q must lie in (0,1]");
  std::int64_t sum = 0;
  for (std::int64_t i = 0; i < params.n; ++i) {
    if (rng.bernoulli(params.q)) sum += rng.geometric_from_one(params.p);
  }
  return sum;
}

double ld_bound_compound(const CompoundParams& params, double theta) {
  const double n = static_cast<double>(params.n);
  if (!(theta <= n * params.q / params.p))
    throw std::domain_error("ld_bound_compound: theta must be <= n q / p");
  const double root = std::sqrt(params.q * theta) - std::sqrt(params.p * n);
  return std::exp(-root * root);
}

TraversalProfile immigration_gw_sample(std::int64_t n, int k, int k_plus,
                                       int horizon, Rng& rng) {
  if (n < 0 || k < 0 || k > k_plus || k_plus > horizon)
    throw std::invalid_argument(
        "immigration_gw_sample: need n >= 0 and 0 <= k <= k_plus <= horizon");
  TraversalProfile out;
  out.counts.resize(static_cast<std::size_t>(horizon) + 1, 0);
  for (int j = k; j <= k_plus; ++j) {
    std::int64_t pop = n;
    out.counts[static_cast<std::size_t>(j)] += pop;
    for (int l = j; l < horizon; ++l) {
      std::int64_t next = 0;
      for (std::int64_t i = 0; i < pop; ++i) next += rng.geometric_half();
      pop = next;
      out.counts[static_cast<std::size_t>(l) + 1] += pop;
      if (pop == 0) break;
    }
  }
  return out;
}

TraversalProfile gw_sample_conditioned(double t, int L, Rng& rng) {
  if (L < 2) throw std::invalid_argument("gw_sample_conditioned: L must be >= 2");
  TraversalProfile out;
  out.budget = t;
  out.counts.resize(static_cast<std::size_t>(L), 0);
  out.counts[0] = floor_time(t);
  for (int l = 0; l < L - 1; ++l) {
    const double theta =
        static_cast<double>(L - 2 - l) / (2.0 * static_cast<double>(L - 1 - l));
    std::int64_t next = 0;
    for (std::int64_t i = 0; i < out.counts[static_cast<std::size_t>(l)]; ++i)
      next += geometric_failure(theta, rng);
    out.counts[static_cast<std::size_t>(l) + 1] = next;
  }
  return out;
}

TraversalProfile gw_sample_rejection(double t, int L, Rng& rng) {
  if (L < 2) throw std::invalid_argument("gw_sample_rejection: L must be >= 2");
  for (;;) {
    TraversalProfile prof = gw_sample(t, L - 1, rng);
    if (prof.counts.back() == 0) return prof;
  }
}

}  // namespace covertime::gw
