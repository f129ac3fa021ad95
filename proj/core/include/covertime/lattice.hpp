#pragma once

// Continuous-time simple random walk on the path {0,...,L} with
// degree-normalized vertex local times and upward edge-traversal counts,
// plus the Ray-Knight-type distributional checks tying those observables
// to squared Bessel processes and the branching law.

#include <cstdint>
#include <vector>

#include "covertime/report.hpp"
#include "covertime/rng.hpp"

namespace covertime::lattice {

enum class StopKind { kInverseLocalTime, kReturns };

struct LatticeRun {
  int L = 0;
  std::vector<double> local_times;             // L_l, l = 0..L (normalized)
  std::vector<std::int64_t> edge_traversals;   // upward crossings, l = 0..L-1
  StopKind stop_kind = StopKind::kReturns;
  double budget = 0.0;
  double elapsed = 0.0;
};

// Rate-1 walk started at 0, reflecting at 0 and L; runs until local time t
// accrues at vertex 0 (inverse local time) or until the floor(t)-th return
// to 0 (returns).  Local times are normalized by degree (1 at the ends,
// 2 inside).
LatticeRun ctrw_run(int L, double t, StopKind stop, Rng& rng);

// P[traversals = m | local times u, u2 at the edge's endpoints]
//   = (u u2)^m / (m! (m-1)!) / (sqrt(u u2) I_1(2 sqrt(u u2))), m >= 1.
double conditional_traversal_pmf(double u, double u2, std::int64_t m);

// Two-sample KS between L_l^{tau(t)} over N runs and (1/2) X_l with X a
// d = 0 squared Bessel process from 2t (unit-step exact transitions).
harness::TestReport ray_knight_marginal_check(int L, double t, int vertex,
                                              std::int64_t N, Rng& rng);

// Among returns-stopped runs with vertex L unvisited, KS of L_1 against
// Gamma(shape t, scale (L-1)/L), plus the mean comparison.
harness::TestReport conditioned_gamma_check(int L, std::int64_t t,
                                            std::int64_t N, Rng& rng);

// Conditional pmf check: bins z = L_l * L_{l+1} into quantile bins of
// >= 500 runs, chi-squares the traversal histogram in each bin against
// conditional_traversal_pmf at the bin mean, and combines the bins.
harness::TestReport conditional_pmf_check(int L, double t, int l,
                                          std::int64_t N, Rng& rng);

// Conditional local-time representation: L_l given the adjacent edge counts
// is a sum of (T_{l-1} + T_l) exponentials of mean 1/2.  Two-sample KS of
// simulated local times against per-run Gamma draws with matched shape.
harness::TestReport conditional_loctime_ld_check(int L, double t, int l,
                                                 std::int64_t N, Rng& rng);

}  // namespace covertime::lattice
