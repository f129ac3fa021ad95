#pragma once

// Critical Galton-Watson engine with geometric(1/2) offspring: sampling,
// exact extinction probabilities, an exact truncated DP for barrier events
// (optionally jointly with extinction at the horizon), binomial-geometric
// compound counters, and immigration.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "covertime/rng.hpp"
#include "covertime/scales.hpp"

namespace covertime::gw {

struct TraversalProfile {
  std::vector<std::int64_t> counts;  // T_0..T_horizon
  double budget = 0.0;               // the real t the profile was built from
  std::optional<std::pair<double, double>> origin;  // torus point, if any

  std::int64_t horizon() const {
    return static_cast<std::int64_t>(counts.size()) - 1;
  }
};

// Offspring: P[k] = 2^{-(k+1)} on {0,1,2,...}; mean 1, variance 2.
std::int64_t offspring_sample(Rng& rng);

// counts[0] = floor(t); counts[l+1] = sum of counts[l] offspring draws.
TraversalProfile gw_sample(double t, int horizon, Rng& rng);

// P[T_{L-1} = 0] under G_t: (1 - 1/L)^floor(t).  Requires L >= 2.
double extinction_prob(int L, double t);

// Same quantity computed by iterating the offspring generating function
// s -> 1/(2-s) numerically (no appeal to the closed form); cross-check.
double extinction_prob_pgf(int L, double t);

// P[T_{l+1} = b | T_l = a] = C(a+b-1, a-1) 2^{-(a+b)} for a >= 1;
// a = 0 is a point mass at b = 0.
double transition_pmf(std::int64_t a, std::int64_t b);
double log_transition_pmf(std::int64_t a, std::int64_t b);

// Barrier functions are evaluated at generations l = 0..L-1.  Use -inf/+inf
// for vacuous sides.
using Barrier = std::function<double(int)>;

inline constexpr double kNoBound = std::numeric_limits<double>::infinity();

struct DpOptions {
  bool condition_extinct = false;  // require T_{L-1} = 0 jointly
  std::int64_t cap = -1;           // population cap; -1 -> max(4 floor(t), 200)
  double truncation_tolerance = 1e-9;
};

struct DpResult {
  double probability = 0.0;     // P[barriers hold], jointly with extinction if set
  double truncated_mass = 0.0;  // probability mass lost at the cap
  double extinction = 1.0;      // closed-form (1-1/L)^floor(t)
  double conditional = 0.0;     // probability / extinction (when conditioning)
};

// Exact (up to cap truncation) probability that lower(l) <= T_l <= upper(l)
// for l = 0..L-1, optionally jointly with T_{L-1} = 0.  Conditioning folds
// the backward extinction weights h_l(a) = ((L-1-l)/(L-l))^a into the forward
// DP, which turns the chain into its exact extinction-conditioned transform.
DpResult barrier_prob_dp_full(int L, double t, const Barrier& lower,
                              const Barrier& upper, const DpOptions& opts = {});

double barrier_prob_dp(int L, double t, const Barrier& lower,
                       const Barrier& upper, bool condition_extinct,
                       std::int64_t cap = -1);

struct CompoundParams {
  std::int64_t n = 0;  // number of excursions floor(t)
  double p = 0.0;      // geometric success probability on {1,2,...}
  double q = 0.0;      // Bernoulli success probability

  bool valid() const { return n >= 0 && p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0; }
};

// p, q of the modified-radius counter at scale l: logarithm ratios of
// (r_l+, r_{l+1}-, r_0-, r_1+).  Throws std::domain_error when the modified
// radii are too distorted for the excursion structure (requires
// factor^2 > 1/e, i.e. large L).
CompoundParams compound_params_from_scales(const scales::ScaleSystem& sys, int l);

// Unmodified radii: p = q = 1/(l+1) exactly.
CompoundParams compound_params_unmodified(double t, int l);

// Sum_{i=1..n} J_i G_i with J ~ Bernoulli(q), G ~ geometric_{>=1}(p).
std::int64_t compound_sample(const CompoundParams& params, Rng& rng);

// Lower-tail bound exp(-(sqrt(q theta) - sqrt(p n))^2), valid for
// theta <= n q / p.
double ld_bound_compound(const CompoundParams& params, double theta);

// Sum of independent GW processes, one started with n founders at each
// generation in {k,...,k_plus}; requires k <= k_plus <= horizon.
TraversalProfile immigration_gw_sample(std::int64_t n, int k, int k_plus,
                                       int horizon, Rng& rng);

// Exact sampling of G_t conditioned on T_{L-1} = 0 via the closed-form
// extinction transform: per-founder offspring at generation l becomes
// geometric with failure parameter theta_l = (L-2-l)/(2(L-1-l)).
TraversalProfile gw_sample_conditioned(double t, int L, Rng& rng);

// Rejection oracle for the conditioned law (retries until T_{L-1} = 0).
TraversalProfile gw_sample_rejection(double t, int L, Rng& rng);

}  // namespace covertime::gw
