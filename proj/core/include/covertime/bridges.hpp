#pragma once

// Brownian bridges and squared Bessel processes/bridges on uniform grids:
// exact sequential sampling, barrier-crossing formulas and Monte Carlo with
// exact segment-crossing corrections, and the dimension-change
// Radon-Nikodym weight between the d=1 and d=0 bridge laws.

#include <cstdint>
#include <vector>

#include "covertime/rng.hpp"

namespace covertime::bridges {

enum class PathKind { kBridge, kBesq, kBesqBridge };

struct PathSample {
  std::vector<double> grid;    // u_0 = 0 < ... < u_M = T
  std::vector<double> values;  // X(u_i)
  PathKind kind = PathKind::kBridge;
  int d = 1;          // dimension (besq kinds)
  double start = 0.0;
  double end = 0.0;
  double T = 0.0;
};

// Brownian bridge a -> b over [0,T] on an M-step grid, sampled by exact
// conditional Gaussians: Cov(X_s, X_t) = s(T-t)/T for s <= t.
PathSample bb_sample(double a, double b, double T, int M, Rng& rng);

// P[0->0 bridge stays above the line from -a to -b] = 1 - exp(-2ab/T).
double bb_linear_barrier_prob(double T, double a, double b);

// Monte Carlo companion: grid sampling plus the exact between-grid crossing
// probability exp(-2 h_i h_{i+1} / dt) for the linear barrier, so the
// estimator is unbiased for the continuous-time event.
struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::int64_t n = 0;
};
McEstimate bb_linear_barrier_mc(double T, double a, double b, int M,
                                std::int64_t N, Rng& rng);

// (c + a + sqrt(t1))(c + b + sqrt(t2)) / (T - t1 - t2) with c = 1.
double discrete_barrier_bound(double T, double a, double b, double t1,
                              double t2);

// Squared Bessel process of integer dimension d >= 0 started at x >= 0.
// d = 0 steps from y over dt: Poisson(y/(2 dt)) exponentials of mean 2 dt;
// d >= 1 adds d squared Gaussian coordinates per step (additivity).
PathSample besq_sample(int d, double x, double T, int M, Rng& rng);

// Bridge to zero over [0,T]: (1 - t/T)^2 X(t / (1 - t/T)) with X a squared
// Bessel path of the same dimension; final value exactly 0.
PathSample besq_bridge_to_zero_sample(int d, double x, double T, int M,
                                      Rng& rng);

// ((1 - S/T)^2 x / X(S))^{1/4} exp(-(3/8) int_0^S dt/X_t) evaluated on a
// d = 1 bridge-to-zero path; 0 if the path is nonpositive anywhere before S.
double rn_weight_zero_vs_one(const PathSample& path, double S, double x);

struct TubeResult {
  double p_tube = 0.0;
  double p_above = 0.0;
  double ratio = 0.0;
  double se_tube = 0.0;
  double se_above = 0.0;
  std::int64_t n = 0;
};

// For the bridge v -> 0 over [0,T]: probability of staying between
// ubar + h_0.499 and ubar + h_0.501 on [t, T-t] while staying above
// ubar - T/10000 on [0,t], against the probability of staying above ubar
// on [t, T-t]; ubar(s) = u (T-s)/T and h_delta(s) = min(s, T-s)^delta.
TubeResult tube_probability_mc(double T, double t, double u, double v, int M,
                               std::int64_t N, Rng& rng);

}  // namespace covertime::bridges
