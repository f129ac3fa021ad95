#pragma once

// Brownian motion on the two-dimensional unit torus: Euler-Maruyama paths,
// exact disc-exit sampling via the Poisson kernel, exact annulus hit/exit
// Bernoulli draws, excursion decomposition between concentric circles, and
// extraction of traversal profiles (timed and exact-untimed).

#include <array>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "covertime/gw.hpp"
#include "covertime/rng.hpp"
#include "covertime/scales.hpp"

namespace covertime::torus {

struct TorusPoint {
  double x = 0.0;
  double y = 0.0;
};

// Reduce coordinates to [0,1).
TorusPoint wrap(TorusPoint p);

// Displacement q - p taken to the minimal image, components in [-1/2, 1/2).
std::array<double, 2> minimal_delta(const TorusPoint& p, const TorusPoint& q);

// Torus distance: min over integer shifts of the Euclidean distance, <= sqrt(2)/2.
double distance(const TorusPoint& p, const TorusPoint& q);

enum class DtPolicy { kFixed, kProximityScaled };

struct SimConfig {
  double dt = 1e-4;
  DtPolicy dt_policy = DtPolicy::kFixed;
  std::uint64_t seed = kDefaultSeed;
};

// Circles around one center whose proximity shrinks the step size:
// dt_eff = dt * min(1, (d_nearest / rho_ref)^2).
struct TrackedCircles {
  TorusPoint center;
  std::vector<double> radii;
  double rho_ref = 0.0;
};

// One Gaussian increment of variance dt per coordinate, wrapped mod 1.
TorusPoint em_step(const TorusPoint& p, double dt, Rng& rng);

// Euler-Maruyama path to time T.  The consumer (optional) is called after
// every step with (time, position) and may return false to stop early.
// Returns the final position.
TorusPoint em_path(const TorusPoint& start, double T, const SimConfig& config,
                   Rng& rng, const std::function<bool(double, const TorusPoint&)>&
                                 consumer = nullptr,
                   const TrackedCircles* tracked = nullptr);

// Exact exit location from B(center, R) started at interior point u: the
// harmonic-measure density (R^2 - |u|^2)/|u - b|^2 against uniform measure
// on the circle, realized by the conformal (Moebius) transport of a single
// uniform angle.
TorusPoint disc_exit_sample(const TorusPoint& center, double R,
                            const TorusPoint& u, Rng& rng);

// Poisson-kernel density relative to uniform measure on the circle, for
// quadrature cross-checks: (R^2 - rho^2)/|u - b|^2 with b at angle phi.
double disc_exit_density(double R, double rho, double phi_from_u_direction);

// Exact Bernoulli: started on the radius-rho circle inside the annulus
// r < rho < R, hit the inner circle before the outer one, with probability
// log(R/rho)/log(R/r).
bool annulus_first_hit(const TorusPoint& center, double r, double rho, double R,
                       Rng& rng);
double annulus_hit_prob(double r, double rho, double R);

// Multi-scale form: P[hit scale l3 before exiting scale l1 | start on l2]
// = (l2 - l1)/(l3 - l1) for consecutive-ratio-e scales.
double multiscale_hit_prob(int l1, int l2, int l3);

// Euler-Maruyama version of the same Bernoulli, for discretization-error
// studies against the exact sampler. Starts on the radius-rho circle and
// steps until the chord crosses one of the two armed circles.
bool annulus_first_hit_em(const TorusPoint& center, double r, double rho,
                          double R, const SimConfig& config, Rng& rng);

// First hitting time of the closed ball B(center, r) from `start`, by EM with
// chord-crossing detection; the crossing step contributes only the fraction
// of dt up to the intersection. Starting inside the ball returns 0.
double ball_hit_time_em(const TorusPoint& center, double r,
                        const TorusPoint& start, const SimConfig& config,
                        Rng& rng);

// First exit time of B(center, R) from an interior start, same conventions;
// the companion calibration target is E[exit] = (R^2 - |start-center|^2)/2.
double disc_exit_time_em(const TorusPoint& center, double R,
                         const TorusPoint& start, const SimConfig& config,
                         Rng& rng);

enum class EventKind { kReturn, kDeparture };

struct ExcursionEvent {
  EventKind kind = EventKind::kReturn;
  double time = 0.0;
  TorusPoint location;
};

struct ExcursionLog {
  TorusPoint center;
  double R = 0.0;
  double r = 0.0;
  std::vector<ExcursionEvent> events;  // strictly alternating, return first
};

// Timed decomposition: run EM until the floor(t)-th departure, logging the
// alternating returns to B(center, r) and departures from B(center, R).
// Crossing times are placed at the chord-intersection fraction of the step.
ExcursionLog excursion_decompose(const TorusPoint& center, double R, double r,
                                 double t, const SimConfig& config, Rng& rng,
                                 const TorusPoint* start = nullptr);

enum class ProfileMode { kTimedEm, kExactUntimed };

// Traversal counts across the scale system during the first floor(t)
// excursions between the two outermost circles.  Counting starts after the
// walk first leaves B(center, r_0).  exact-untimed replaces the interior
// diffusion by the scale-index walk driven by the exact annulus coin flips.
gw::TraversalProfile traversal_profile(const TorusPoint& center,
                                       const scales::ScaleSystem& sys, double t,
                                       ProfileMode mode, const SimConfig& config,
                                       Rng& rng);

// Similarity factor applied to radii before timed simulation so that the
// outermost ball fits the torus (r_0 <= 0.45); 1 when no rescale is needed.
// Traversal laws depend only on radius ratios, which the rescale preserves.
double geometry_scale_factor(const scales::ScaleSystem& sys);

// Two traversal profiles around separate centers, extracted from one timed-EM
// trajectory; each profile's excursion window closes at its own floor(t)-th
// top-scale departure.  shrink in (0,1] multiplies the rescaled radii so both
// systems plus the requested separation fit on the torus; profile laws depend
// only on radius ratios, which the shrink preserves.
std::pair<gw::TraversalProfile, gw::TraversalProfile> paired_traversal_profiles(
    const TorusPoint& y, const TorusPoint& z, const scales::ScaleSystem& sys,
    double t, double shrink, const SimConfig& config, Rng& rng);

struct PackingCounters {
  std::int64_t t_tilde = 0;   // plain counter at scale l around y
  std::int64_t t_hat = 0;     // modified-radii counter around y_prime
  bool degenerate = false;    // modified top pair inverted at this factor
};

// Similarity factor applied by packing_coupled_counters so the largest
// circle of either family (r_0 or r_1 / factor) fits the torus.
double packing_geometry_scale(const scales::ScaleSystem& sys, double factor);

// Coupled counters of the packing argument from a single trajectory.  The
// plain counter uses circle pairs (r_0, r_1) and (r_l, r_{l+1}) around y; the
// modified counter uses (r_0 * factor, r_1 / factor) and (r_l / factor,
// r_{l+1} * factor) around the nearby packing point y_prime.  When
// factor^2 <= 1/e the modified top pair is inverted: its excursion window
// closes the moment the inner circle is first touched, the modified counter
// is 0, and `degenerate` is set.
PackingCounters packing_coupled_counters(const TorusPoint& y,
                                         const TorusPoint& y_prime,
                                         const scales::ScaleSystem& sys, int l,
                                         double t, double factor,
                                         const SimConfig& config, Rng& rng);

}  // namespace covertime::torus
