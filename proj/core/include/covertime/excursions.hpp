#pragma once

// Equilibrium machinery for excursions between two concentric circles on the
// torus: cycle-time statistics against the exact mean identity
// (1/pi) log(R/r), the minorization constant of the departure chain, the
// concentration of the n-th departure time, and Kac-formula moment bounds for
// ball hitting times.

#include <cstdint>
#include <vector>

#include "covertime/report.hpp"
#include "covertime/rng.hpp"
#include "covertime/torus.hpp"

namespace covertime::excursions {

struct CycleStats {
  int n_cycles = 0;
  std::vector<double> cycle_times;  // D_n - D_{n-1}, post burn-in
  std::vector<double> out_in_legs;  // departure -> next return
  std::vector<double> in_out_legs;  // return -> next departure
  int burn_in = 0;
};

// Exact equilibrium mean cycle time (1/pi) log(R/r).
double mean_cycle_exact(double R, double r);

// Timed-EM cycles between B(center, r) and B(center, R); the first `burn_in`
// cycles are discarded so the departure chain approaches its equilibrium.
CycleStats equilibrium_cycles(const torus::TorusPoint& center, double R,
                              double r, int n, int burn_in,
                              const torus::SimConfig& config, Rng& rng);

// ((R - r)/(R + r))^2: the uniform lower bound on the departure-chain kernel
// relative to the equilibrium measure.
double minorization_q(double R, double r);

// MC check that the binned angular exit kernel from the worst start on the
// inner circle dominates minorization_q times the uniform law.
harness::TestReport minorization_kernel_check(const torus::TorusPoint& center,
                                              double R, double r,
                                              std::int64_t N, Rng& rng);

struct ConcentrationReport {
  std::vector<int> n_list;
  std::vector<double> failure_rate;  // P[|D_n/(n mu) - 1| > delta] estimate
  std::vector<double> wilson_lo;
  std::vector<double> wilson_hi;
  std::vector<double> rel_sd;        // sd(D_n) / (n mu)
  std::int64_t samples_per_n = 0;
  double delta = 0.0;
  bool nonincreasing = false;        // failure rates, within 2 SE
  double loglog_slope = 0.0;         // slope of log rel_sd against log n
};

// Estimates the tail probability of the n-th departure time around its
// equilibrium mean for each n in n_list, from non-overlapping post-burn-in
// blocks of n cycles. delta is clipped into (0, 1/2).
ConcentrationReport concentration_experiment(const torus::TorusPoint& center,
                                             double R, double r,
                                             const std::vector<int>& n_list,
                                             double delta, std::int64_t N,
                                             const torus::SimConfig& config,
                                             Rng& rng);

struct KhasminskiiReport {
  double sup_mean = 0.0;            // max over grid starts of mean hit time
  std::vector<double> moments;      // worst-case empirical E[H^k], k = 1..n_max
  std::vector<double> bounds;       // k! * sup_mean^k
  std::vector<double> moment_se;    // SE of the worst-case moment
  std::int64_t n_per_site = 0;
  int grid_side = 0;
  bool pass = false;                // every moment <= bound + 3 SE
};

// Empirical check of E_z[H^k] <= k! (sup_z E_z[H])^k for the hitting time H
// of B(center, r), with the sup taken over a coarse grid of starting points.
// n_max must lie in 1..4 (higher moments are too noisy to test).
KhasminskiiReport khasminskii_check(const torus::TorusPoint& center, double r,
                                    int n_max, std::int64_t N,
                                    const torus::SimConfig& config, Rng& rng);

}  // namespace covertime::excursions
