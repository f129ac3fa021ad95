#pragma once

// Top-level experiments: torus grids, counting variables with barrier
// truncations, two-point independence, the packing-domination coupling,
// cover-time estimation, and the occupation heatmap.

#include <cstdint>
#include <string>
#include <vector>

#include "covertime/gw.hpp"
#include "covertime/rng.hpp"
#include "covertime/scales.hpp"
#include "covertime/torus.hpp"

namespace covertime::experiments {

struct Grid {
  int level = 0;
  double spacing = 0.0;
  std::vector<torus::TorusPoint> points;
};

inline constexpr std::int64_t kDefaultGridCap = 4'000'000;

// Square lattice of spacing spacing_factor * r_l covering the torus,
// deduplicated under the mod-1 wrap.  Throws when the point count would
// exceed max_points (use a larger spacing factor).
Grid build_grid(const scales::ScaleSystem& sys, int l,
                std::int64_t max_points = kDefaultGridCap);

// Point count of the level-l grid without materializing it (exact; may be
// astronomically large, hence returned as a double).
double grid_point_count(const scales::ScaleSystem& sys, int l);

enum class CountingMode {
  kUntruncated,     // unvisited ball only
  kUpperTruncated,  // + sqrt(T_l) >= alpha(l) for l = 0..L-1
  kLowerTruncated,  // + gamma(l) <= sqrt(T_l) <= delta(l) on the cutoff range
};
enum class CountingEngine { kGwExact, kTorusMc };

struct CountingSpec {
  CountingMode mode = CountingMode::kUntruncated;
  double t = 0.0;
  scales::ScaleSystem sys;
};

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::int64_t n = 0;       // profiles simulated; 0 for exact evaluation
  double per_point = 0.0;   // single-point event probability
  double grid_points = 0.0;
};

// E[number of level-L grid points whose traversal profile satisfies the
// spec].  The per-point law does not depend on the position, so gw-exact
// evaluates it once by the conditioned barrier DP and multiplies by the grid
// size; torus-mc estimates it from timed-EM profiles (L <= 6).
Estimate counting_variable_estimate(const CountingSpec& spec,
                                    CountingEngine engine, std::int64_t N,
                                    const torus::SimConfig& config, Rng& rng);

struct IndependenceReport {
  std::vector<double> correlation;  // generations l = 1..L-1 (T_0 is fixed)
  std::vector<double> se;           // ~1/sqrt(N-3) per generation
  std::int64_t n = 0;
  double separation = 0.0;          // realized torus distance of the centers
  double effective_r0 = 0.0;        // simulated top radius
  bool disjoint = false;            // separation > 2 * effective_r0
  bool pass = false;  // disjoint case: every correlation within 3 SE of 0
};

// Per-generation correlation of paired traversal profiles extracted from
// single trajectories around two centers the given distance apart.
IndependenceReport two_point_independence_check(const scales::ScaleSystem& sys,
                                                double separation, double t,
                                                std::int64_t N,
                                                const torus::SimConfig& config,
                                                Rng& rng);

struct PackingReport {
  std::int64_t violations = 0;  // runs where modified > plain counter
  std::int64_t n = 0;
  bool degenerate = false;      // modified top pair inverted at this L
  double factor = 0.0;
  double separation = 0.0;      // |y - y_prime| in simulated units
  double mean_t_tilde = 0.0;
  double mean_t_hat = 0.0;
  double compound_p_value = -1.0;  // chi-square vs compound law; -1 when n/a
};

// Coupled pathwise check that the modified-radius counter at scale l never
// exceeds the plain one, with y_prime the nearest packing-grid point to y.
// When the modified geometry is non-degenerate, the modified counter is also
// tested against its binomial-geometric compound law.
PackingReport packing_domination_check(const scales::ScaleSystem& sys, int l,
                                       double t, std::int64_t N,
                                       const torus::SimConfig& config,
                                       Rng& rng);

struct CoverResult {
  std::vector<double> times;   // per-run cover times; NaN when capped
  double eps = 0.0;
  double dt = 0.0;             // step actually used (clamped to eps^2/50)
  std::int64_t incomplete = 0;
};

// Time per run until every ball B(z, eps), z on a square grid of the given
// spacing, has been visited by the step-endpoint trajectory.  The grid
// covering brackets the true cover time: every point of the torus lies
// within grid_spacing * sqrt(2)/2 of a tracked center, so covering the
// tracked family at radius eps covers the whole torus at radius
// eps + grid_spacing * sqrt(2)/2.
CoverResult cover_time_estimate(double eps, double grid_spacing,
                                const torus::SimConfig& config,
                                std::int64_t n_runs, Rng& rng,
                                std::int64_t max_steps = 400'000'000);

struct Heatmap {
  int resolution = 0;
  double radius = 0.0;
  double T = 0.0;
  std::vector<double> values;  // row-major, scaled by 1/(pi radius^2)

  double value(int i, int j) const {
    return values[static_cast<std::size_t>(i) *
                      static_cast<std::size_t>(resolution) +
                  static_cast<std::size_t>(j)];
  }
};

// Occupation times of the radius-ball around every pixel center for one
// trajectory run to time T, rescaled by the ball area.  radius is clipped
// below 1/2.
Heatmap occupation_heatmap(double T, double radius, int resolution,
                           const torus::SimConfig& config, Rng& rng);

std::string heatmap_to_csv(const Heatmap& h);
std::string heatmap_to_pgm(const Heatmap& h);  // plain-text P2, 8-bit

}  // namespace covertime::experiments
