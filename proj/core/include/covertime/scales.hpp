#pragma once

// Scale systems: geometrically shrinking radii r_l, excursion budgets t_s,
// the target time m(eps, s), and the barrier curves (alpha, beta, gamma,
// delta) with their bump functions and cutoff.  Everything here is a pure
// function of (L, s); identical inputs give bit-identical outputs.

#include <cstdint>
#include <vector>

namespace covertime::scales {

// Grid spacing as a fraction of r_l.  The packing logic is spacing-agnostic;
// 1/4 keeps grid sizes workable.
inline constexpr double kGridSpacingFactor = 0.25;

// Factor for the modified radii r_l+- = r_l / factor, r_l * factor.  The
// defining formula 1 - 100/L only makes sense for large L; below the
// threshold a fixed substitute keeps the radii ordered enough to experiment
// with, and consumers flag such runs.
double modified_radius_factor(int L);   // 1 - 100/max(L, 200)
bool modified_radii_natural(int L);     // true when L > 100 (formula regime)

struct ScaleSystem {
  int L = 0;
  double s = 0.0;
  std::vector<double> radii;        // r_0..r_L, r_l / r_{l+1} = e
  std::vector<double> radii_minus;  // r_l * factor
  std::vector<double> radii_plus;   // r_l / factor
  double spacing_factor = kGridSpacingFactor;
  double t_s = 0.0;                 // excursion budget L(2L - (1-s) log L)

  double r(int l) const { return radii[static_cast<std::size_t>(l)]; }
  double r_minus(int l) const { return radii_minus[static_cast<std::size_t>(l)]; }
  double r_plus(int l) const { return radii_plus[static_cast<std::size_t>(l)]; }
};

// r_l = exp(-(3/4) log log L - l), l = 0..L.  Requires L >= 3.
std::vector<double> radii(int L);

// t_s = L (2L - (1-s) log L).
double excursion_budget(int L, double s);

// m(eps, s) = (1/pi) log(1/eps) (2 log(1/eps) - (1-s) log log(1/eps)).
// Requires eps in (0,1).
double target_time(double eps, double s);

ScaleSystem make_scale_system(int L, double s);

struct BarrierSet {
  int L = 0;
  double s = 0.0;
  double sqrt_ts = 0.0;
  double log_L = 0.0;
  int l0 = 0;  // floor((1/10) log log L)

  double beta(double l) const { return (1.0 - l / L) * sqrt_ts; }
  double alpha(double l) const { return beta(l) - log_L * log_L; }
  double f(double l) const;  // min(l^0.49, (L-l)^0.49)
  double g(double l) const;  // min(l^0.51, (L-l)^0.51)
  double gamma(double l) const { return beta(l) + f(l); }
  double delta(double l) const { return beta(l) + g(l); }
};

// Requires L >= 3.
BarrierSet barriers(int L, double s);

// floor((1/10) log log L); 0 at any feasible L.
int l0_cutoff(int L);

// Smallest cutoff for which the gamma/delta tube event is consistent with
// extinction at generation L-1 (the tube at l = L-1 would force T_{L-1} > 0).
// Used by the tube experiments; reported alongside the defining l0.
int l0_effective(int L);

}  // namespace covertime::scales
