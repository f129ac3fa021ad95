#include "covertime/torus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace covertime::torus {

namespace {

double wrap01(double v) {
  v -= std::floor(v);
  if (v >= 1.0) v -= 1.0;  // guard against -1e-18 rounding to 1.0
  return v;
}

double norm2(const std::array<double, 2>& v) {
  return v[0] * v[0] + v[1] * v[1];
}

// Smallest tau in (eps, 1] with |rel + tau delta| = radius, or -1 if none.
double segment_circle_crossing(const std::array<double, 2>& rel,
                               const std::array<double, 2>& delta,
                               double radius) {
  const double a = norm2(delta);
  if (a == 0.0) return -1.0;
  const double b = 2.0 * (rel[0] * delta[0] + rel[1] * delta[1]);
  const double c = norm2(rel) - radius * radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return -1.0;
  const double sq = std::sqrt(disc);
  // Stable quadratic roots.
  const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
  double t1 = q / a;
  double t2 = (q != 0.0) ? c / q : t1;
  if (t1 > t2) std::swap(t1, t2);
  constexpr double kEps = 1e-14;
  if (t1 > kEps && t1 <= 1.0) return t1;
  if (t2 > kEps && t2 <= 1.0) return t2;
  return -1.0;
}

double proximity_fraction(double d_nearest, double rho_ref) {
  if (rho_ref <= 0.0) return 1.0;
  const double ratio = d_nearest / rho_ref;
  const double frac = std::min(1.0, ratio * ratio);
  return std::max(frac, 1e-6);  // stall floor
}

double nearest_circle_distance(const std::array<double, 2>& rel,
                               const std::vector<double>& radii) {
  const double d = std::sqrt(norm2(rel));
  double best = std::numeric_limits<double>::infinity();
  for (double r : radii) best = std::min(best, std::abs(d - r));
  return best;
}

}  // namespace

TorusPoint wrap(TorusPoint p) { return {wrap01(p.x), wrap01(p.y)}; }

std::array<double, 2> minimal_delta(const TorusPoint& p, const TorusPoint& q) {
  double dx = q.x - p.x;
  double dy = q.y - p.y;
  dx -= std::round(dx);
  dy -= std::round(dy);
  return {dx, dy};
}

double distance(const TorusPoint& p, const TorusPoint& q) {
  const auto d = minimal_delta(p, q);
  return std::sqrt(norm2(d));
}

TorusPoint em_step(const TorusPoint& p, double dt, Rng& rng) {
  const auto [z1, z2] = rng.normal2();
  const double s = std::sqrt(dt);
  return wrap({p.x + s * z1, p.y + s * z2});
}

TorusPoint em_path(const TorusPoint& start, double T, const SimConfig& config,
                   Rng& rng,
                   const std::function<bool(double, const TorusPoint&)>& consumer,
                   const TrackedCircles* tracked) {
  if (!(T > 0.0) || !(config.dt > 0.0))
    throw std::invalid_argument("em_path: need T > 0 and dt > 0");
  TorusPoint p = wrap(start);
  double t = 0.0;
  while (t < T) {
    double dt = config.dt;
    if (config.dt_policy == DtPolicy::kProximityScaled && tracked != nullptr) {
      const auto rel = minimal_delta(tracked->center, p);
      dt *= proximity_fraction(nearest_circle_distance(rel, tracked->radii),
                               tracked->rho_ref);
    }
    if (t + dt > T) dt = T - t;
    p = em_step(p, dt, rng);
    t += dt;
    if (consumer && !consumer(t, p)) break;
  }
  return p;
}

TorusPoint disc_exit_sample(const TorusPoint& center, double R,
                            const TorusPoint& u, Rng& rng) {
  if (!(R > 0.0) || !(R < 0.5))
    throw std::domain_error("disc_exit_sample: need 0 < R < 1/2");
  const auto rel = minimal_delta(center, u);
  const double rho = std::sqrt(norm2(rel));
  if (rho >= R) throw std::domain_error("disc_exit_sample: point outside disc");
  const double a = rho / R;
  const double psi = (2.0 * rng.uniform() - 1.0) *
                     3.14159265358979323846;
  double theta;
  if (a == 0.0) {
    theta = psi;
  } else {
    // Moebius transport of the uniform exit angle: w = (e^{i psi} + a) /
    // (1 + a e^{i psi}), theta = arg(w), measured from the center->u axis.
    const double cp = std::cos(psi);
    const double sp = std::sin(psi);
    const double nre = cp + a;
    const double nim = sp;
    const double dre = 1.0 + a * cp;
    const double dim = a * sp;
    theta = std::atan2(nim * dre - nre * dim, nre * dre + nim * dim);
  }
  const double axis = rho > 0.0 ? std::atan2(rel[1], rel[0]) : 0.0;
  const double ang = axis + theta;
  return wrap({center.x + R * std::cos(ang), center.y + R * std::sin(ang)});
}

double disc_exit_density(double R, double rho, double phi) {
  if (!(R > 0.0) || rho < 0.0 || rho >= R)
    throw std::domain_error("disc_exit_density: need 0 <= rho < R");
  const double denom = R * R - 2.0 * R * rho * std::cos(phi) + rho * rho;
  return (R * R - rho * rho) / denom;
}

double annulus_hit_prob(double r, double rho, double R) {
  if (!(0.0 < r && r < rho && rho < R && R < 0.5))
    throw std::domain_error("annulus_hit_prob: need 0 < r < rho < R < 1/2");
  return std::log(R / rho) / std::log(R / r);
}

bool annulus_first_hit(const TorusPoint& center, double r, double rho, double R,
                       Rng& rng) {
  (void)center;  // the law is position-free; the center fixes the geometry
  return rng.bernoulli(annulus_hit_prob(r, rho, R));
}

double multiscale_hit_prob(int l1, int l2, int l3) {
  if (!(l1 < l2 && l2 < l3))
    throw std::domain_error("multiscale_hit_prob: need l1 < l2 < l3");
  return static_cast<double>(l2 - l1) / static_cast<double>(l3 - l1);
}

double ball_hit_time_em(const TorusPoint& center, double r,
                        const TorusPoint& start, const SimConfig& config,
                        Rng& rng) {
  if (!(0.0 < r && r < 0.5))
    throw std::domain_error("ball_hit_time_em: need 0 < r < 1/2");
  const auto d0 = minimal_delta(center, start);
  std::array<double, 2> rel = {d0[0], d0[1]};
  if (std::hypot(rel[0], rel[1]) <= r) return 0.0;
  const std::vector<double> radii = {r};
  double now = 0.0;
  for (;;) {
    double dt = config.dt;
    if (config.dt_policy == DtPolicy::kProximityScaled)
      dt *= proximity_fraction(nearest_circle_distance(rel, radii), r);
    const auto [z1, z2] = rng.normal2();
    const double s = std::sqrt(dt);
    const std::array<double, 2> delta = {s * z1, s * z2};
    const double tau = segment_circle_crossing(rel, delta, r);
    if (tau >= 0.0) return now + tau * dt;
    now += dt;
    rel[0] += delta[0];
    rel[1] += delta[1];
    // Re-reduce through the wrapped absolute position so relative coordinates
    // stay in the minimal image even on long off-center walks.
    const TorusPoint abs = wrap({center.x + rel[0], center.y + rel[1]});
    const auto d = minimal_delta(center, abs);
    rel = {d[0], d[1]};
  }
}

double disc_exit_time_em(const TorusPoint& center, double R,
                         const TorusPoint& start, const SimConfig& config,
                         Rng& rng) {
  if (!(0.0 < R && R < 0.5))
    throw std::domain_error("disc_exit_time_em: need 0 < R < 1/2");
  const auto d0 = minimal_delta(center, start);
  std::array<double, 2> rel = {d0[0], d0[1]};
  if (std::hypot(rel[0], rel[1]) >= R) return 0.0;
  const std::vector<double> radii = {R};
  double now = 0.0;
  for (;;) {
    double dt = config.dt;
    if (config.dt_policy == DtPolicy::kProximityScaled)
      dt *= proximity_fraction(nearest_circle_distance(rel, radii), R);
    const auto [z1, z2] = rng.normal2();
    const double s = std::sqrt(dt);
    const std::array<double, 2> delta = {s * z1, s * z2};
    const double tau = segment_circle_crossing(rel, delta, R);
    if (tau >= 0.0) return now + tau * dt;
    now += dt;
    rel[0] += delta[0];
    rel[1] += delta[1];
  }
}

bool annulus_first_hit_em(const TorusPoint& center, double r, double rho,
                          double R, const SimConfig& config, Rng& rng) {
  if (!(0.0 < r && r < rho && rho < R && R < 0.5))
    throw std::domain_error("annulus_first_hit_em: need 0 < r < rho < R < 1/2");
  (void)center;  // the hit-or-exit coin is translation invariant
  std::array<double, 2> rel = {rho, 0.0};
  const std::vector<double> radii = {r, R};
  for (;;) {
    double dt = config.dt;
    if (config.dt_policy == DtPolicy::kProximityScaled)
      dt *= proximity_fraction(nearest_circle_distance(rel, radii), r);
    const auto [z1, z2] = rng.normal2();
    const double s = std::sqrt(dt);
    const std::array<double, 2> delta = {s * z1, s * z2};
    const double tin = segment_circle_crossing(rel, delta, r);
    const double tout = segment_circle_crossing(rel, delta, R);
    if (tin >= 0.0 && (tout < 0.0 || tin <= tout)) return true;
    if (tout >= 0.0) return false;
    rel[0] += delta[0];
    rel[1] += delta[1];
  }
}

ExcursionLog excursion_decompose(const TorusPoint& center, double R, double r,
                                 double t, const SimConfig& config, Rng& rng,
                                 const TorusPoint* start) {
  if (!(0.0 < r && r < R && R < 0.5))
    throw std::domain_error("excursion_decompose: need 0 < r < R < 1/2");
  if (!(t >= 1.0))
    throw std::invalid_argument("excursion_decompose: need t >= 1");
  ExcursionLog log;
  log.center = wrap(center);
  log.R = R;
  log.r = r;
  const std::int64_t target = static_cast<std::int64_t>(std::floor(t));

  TorusPoint p = start != nullptr
                     ? wrap(*start)
                     : wrap({center.x + 0.5, center.y + 0.5});
  auto rel = minimal_delta(log.center, p);
  bool seeking_return = std::sqrt(norm2(rel)) > r;
  if (!seeking_return)
    log.events.push_back({EventKind::kReturn, 0.0, p});

  const std::vector<double> radii = {r, R};
  double now = 0.0;
  std::int64_t departures = 0;
  while (departures < target) {
    double dt = config.dt;
    if (config.dt_policy == DtPolicy::kProximityScaled) {
      dt *= proximity_fraction(nearest_circle_distance(rel, radii), r);
    }
    const auto [z1, z2] = rng.normal2();
    const double s = std::sqrt(dt);
    const std::array<double, 2> delta = {s * z1, s * z2};
    const double armed = seeking_return ? r : R;
    const double tau = segment_circle_crossing(rel, delta, armed);
    if (tau < 0.0) {
      rel[0] += delta[0];
      rel[1] += delta[1];
      // Re-reduce through the wrapped absolute position so long outer
      // excursions stay in the minimal image.
      p = wrap({log.center.x + rel[0], log.center.y + rel[1]});
      rel = minimal_delta(log.center, p);
      now += dt;
      continue;
    }
    rel[0] += tau * delta[0];
    rel[1] += tau * delta[1];
    p = wrap({log.center.x + rel[0], log.center.y + rel[1]});
    now += tau * dt;
    if (seeking_return) {
      log.events.push_back({EventKind::kReturn, now, p});
    } else {
      log.events.push_back({EventKind::kDeparture, now, p});
      ++departures;
    }
    seeking_return = !seeking_return;
  }
  return log;
}

double geometry_scale_factor(const scales::ScaleSystem& sys) {
  constexpr double kMaxOuter = 0.45;
  const double r0 = sys.r(0);
  return r0 > kMaxOuter ? kMaxOuter / r0 : 1.0;
}

double packing_geometry_scale(const scales::ScaleSystem& sys, double factor) {
  constexpr double kMaxOuter = 0.45;
  const double max_r = std::max(sys.r(0), sys.r(1) / factor);
  return max_r > kMaxOuter ? kMaxOuter / max_r : 1.0;
}

namespace {

gw::TraversalProfile traversal_profile_untimed(const scales::ScaleSystem& sys,
                                               double t, Rng& rng) {
  const int L = sys.L;
  gw::TraversalProfile prof;
  prof.budget = t;
  prof.counts.assign(static_cast<std::size_t>(L), 0);
  const std::int64_t target = static_cast<std::int64_t>(std::floor(t));
  std::int64_t departures = 0;
  int node = 0;
  while (departures < target) {
    if (node == 0) {
      ++prof.counts[0];
      node = 1;
    } else if (node == L) {
      node = L - 1;
    } else if (rng.bernoulli(0.5)) {
      ++prof.counts[static_cast<std::size_t>(node)];
      ++node;
    } else {
      --node;
      if (node == 0) ++departures;
    }
  }
  return prof;
}

gw::TraversalProfile traversal_profile_timed(const TorusPoint& center,
                                             const scales::ScaleSystem& sys,
                                             double t, const SimConfig& config,
                                             Rng& rng) {
  const int L = sys.L;
  const double kappa = geometry_scale_factor(sys);
  std::vector<double> radius(static_cast<std::size_t>(L) + 1);
  for (int l = 0; l <= L; ++l)
    radius[static_cast<std::size_t>(l)] = kappa * sys.r(l);

  gw::TraversalProfile prof;
  prof.budget = t;
  prof.origin = std::make_pair(center.x, center.y);
  prof.counts.assign(static_cast<std::size_t>(L), 0);
  const std::int64_t target = static_cast<std::int64_t>(std::floor(t));
  if (target == 0) return prof;

  const TorusPoint c = wrap(center);
  TorusPoint p = wrap({c.x + 0.5, c.y + 0.5});
  auto rel = minimal_delta(c, p);
  int node = 0;  // start outside B(center, r_0): counting armed immediately
  std::int64_t departures = 0;
  while (departures < target) {
    double dt = config.dt;
    if (config.dt_policy == DtPolicy::kProximityScaled) {
      // Reference the outermost circle so the step stays proportional to the
      // distance from the nearest circle at every scale (self-similar
      // resolution; see the scale-geometry notes in the README).
      dt *= proximity_fraction(nearest_circle_distance(rel, radius),
                               radius.front());
    }
    const auto [z1, z2] = rng.normal2();
    const double s = std::sqrt(dt);
    const std::array<double, 2> delta = {s * z1, s * z2};
    double tau_in = -1.0;
    double tau_out = -1.0;
    if (node + 1 <= L)
      tau_in = segment_circle_crossing(rel, delta,
                                       radius[static_cast<std::size_t>(node) + 1]);
    if (node - 1 >= 0)
      tau_out = segment_circle_crossing(rel, delta,
                                        radius[static_cast<std::size_t>(node) - 1]);
    bool inward;
    double tau;
    if (tau_in >= 0.0 && (tau_out < 0.0 || tau_in <= tau_out)) {
      inward = true;
      tau = tau_in;
    } else if (tau_out >= 0.0) {
      inward = false;
      tau = tau_out;
    } else {
      rel[0] += delta[0];
      rel[1] += delta[1];
      p = wrap({c.x + rel[0], c.y + rel[1]});
      rel = minimal_delta(c, p);
      continue;
    }
    rel[0] += tau * delta[0];
    rel[1] += tau * delta[1];
    p = wrap({c.x + rel[0], c.y + rel[1]});
    rel = minimal_delta(c, p);
    if (inward) {
      ++prof.counts[static_cast<std::size_t>(node)];
      ++node;
    } else {
      --node;
      if (node == 0) ++departures;
    }
  }
  return prof;
}

}  // namespace

gw::TraversalProfile traversal_profile(const TorusPoint& center,
                                       const scales::ScaleSystem& sys, double t,
                                       ProfileMode mode, const SimConfig& config,
                                       Rng& rng) {
  if (sys.L < 2)
    throw std::invalid_argument("traversal_profile: need L >= 2");
  if (!(t >= 0.0)) throw std::invalid_argument("traversal_profile: t >= 0");
  if (mode == ProfileMode::kExactUntimed)
    return traversal_profile_untimed(sys, t, rng);
  return traversal_profile_timed(center, sys, t, config, rng);
}

namespace {

// Node-machine state for one circle system of a multi-center extraction.
struct NodeSystem {
  TorusPoint center;
  std::array<double, 2> rel = {0.0, 0.0};
  int node = 0;
  std::int64_t departures = 0;
  bool done = false;
};

}  // namespace

std::pair<gw::TraversalProfile, gw::TraversalProfile> paired_traversal_profiles(
    const TorusPoint& y, const TorusPoint& z, const scales::ScaleSystem& sys,
    double t, double shrink, const SimConfig& config, Rng& rng) {
  const int L = sys.L;
  if (L < 2)
    throw std::invalid_argument("paired_traversal_profiles: need L >= 2");
  if (!(t >= 0.0))
    throw std::invalid_argument("paired_traversal_profiles: t >= 0");
  if (!(shrink > 0.0 && shrink <= 1.0))
    throw std::invalid_argument("paired_traversal_profiles: shrink in (0,1]");

  const double kappa = geometry_scale_factor(sys) * shrink;
  std::vector<double> radius(static_cast<std::size_t>(L) + 1);
  for (int l = 0; l <= L; ++l)
    radius[static_cast<std::size_t>(l)] = kappa * sys.r(l);

  gw::TraversalProfile prof_y, prof_z;
  prof_y.budget = prof_z.budget = t;
  prof_y.origin = std::make_pair(y.x, y.y);
  prof_z.origin = std::make_pair(z.x, z.y);
  prof_y.counts.assign(static_cast<std::size_t>(L), 0);
  prof_z.counts.assign(static_cast<std::size_t>(L), 0);
  const std::int64_t target = static_cast<std::int64_t>(std::floor(t));
  if (target == 0) return {prof_y, prof_z};

  std::array<NodeSystem, 2> systems;
  systems[0].center = wrap(y);
  systems[1].center = wrap(z);
  gw::TraversalProfile* profs[2] = {&prof_y, &prof_z};

  // Start outside both top-scale balls; the antipode of y usually works and a
  // uniform rejection draw covers the rest.
  TorusPoint p = wrap({systems[0].center.x + 0.5, systems[0].center.y + 0.5});
  int tries = 0;
  while (distance(p, systems[0].center) <= radius[0] ||
         distance(p, systems[1].center) <= radius[0]) {
    if (++tries > 10000)
      throw std::runtime_error(
          "paired_traversal_profiles: no start outside both systems; "
          "reduce shrink");
    p = wrap({rng.uniform(), rng.uniform()});
  }
  for (auto& s : systems) {
    const auto d = minimal_delta(s.center, p);
    s.rel = {d[0], d[1]};
  }

  while (!(systems[0].done && systems[1].done)) {
    double dt = config.dt;
    if (config.dt_policy == DtPolicy::kProximityScaled) {
      double d_near = std::numeric_limits<double>::infinity();
      for (const auto& s : systems)
        if (!s.done)
          d_near = std::min(d_near, nearest_circle_distance(s.rel, radius));
      dt *= proximity_fraction(d_near, radius.front());
    }
    const auto [z1, z2] = rng.normal2();
    const double sdt = std::sqrt(dt);
    const std::array<double, 2> delta = {sdt * z1, sdt * z2};

    // Earliest armed-circle crossing per active system (inward preferred on a
    // within-system tie, as for the single-center extraction).
    double tau_min = -1.0;
    std::array<double, 2> tau = {-1.0, -1.0};
    std::array<bool, 2> inward = {false, false};
    for (int i = 0; i < 2; ++i) {
      const auto& s = systems[static_cast<std::size_t>(i)];
      if (s.done) continue;
      double ti = -1.0, to = -1.0;
      if (s.node + 1 <= L)
        ti = segment_circle_crossing(
            s.rel, delta, radius[static_cast<std::size_t>(s.node) + 1]);
      if (s.node - 1 >= 0)
        to = segment_circle_crossing(
            s.rel, delta, radius[static_cast<std::size_t>(s.node) - 1]);
      if (ti >= 0.0 && (to < 0.0 || ti <= to)) {
        tau[static_cast<std::size_t>(i)] = ti;
        inward[static_cast<std::size_t>(i)] = true;
      } else if (to >= 0.0) {
        tau[static_cast<std::size_t>(i)] = to;
        inward[static_cast<std::size_t>(i)] = false;
      }
      const double tv = tau[static_cast<std::size_t>(i)];
      if (tv >= 0.0 && (tau_min < 0.0 || tv < tau_min)) tau_min = tv;
    }

    const double step = tau_min >= 0.0 ? tau_min : 1.0;
    p = wrap({p.x + step * delta[0], p.y + step * delta[1]});
    for (auto& s : systems) {
      const auto d = minimal_delta(s.center, p);
      s.rel = {d[0], d[1]};
    }
    if (tau_min < 0.0) continue;

    // Identical systems (y == z) produce bit-identical crossing fractions, so
    // ties must fire both machines to keep the coupling exact.
    for (int i = 0; i < 2; ++i) {
      auto& s = systems[static_cast<std::size_t>(i)];
      if (s.done || tau[static_cast<std::size_t>(i)] != tau_min) continue;
      if (inward[static_cast<std::size_t>(i)]) {
        ++profs[i]->counts[static_cast<std::size_t>(s.node)];
        ++s.node;
      } else {
        --s.node;
        if (s.node == 0 && ++s.departures == target) s.done = true;
      }
    }
  }
  return {prof_y, prof_z};
}

namespace {

// One (outer, inner) circle pair of the packing construction, with the
// alternating return/departure state machine of the excursion decomposition.
struct CirclePair {
  int center_id = 0;  // 0 = y, 1 = y_prime
  double inner = 0.0;
  double outer = 0.0;
  bool seek_inner = true;
  std::int64_t r_count = 0;
  std::int64_t d_count = 0;
  bool active = true;
};

}  // namespace

PackingCounters packing_coupled_counters(const TorusPoint& y,
                                         const TorusPoint& y_prime,
                                         const scales::ScaleSystem& sys, int l,
                                         double t, double factor,
                                         const SimConfig& config, Rng& rng) {
  const int L = sys.L;
  if (l < 1 || l + 1 > L)
    throw std::invalid_argument("packing_coupled_counters: need 1 <= l <= L-1");
  if (!(t >= 0.0))
    throw std::invalid_argument("packing_coupled_counters: t >= 0");
  if (!(factor > 0.0 && factor <= 1.0))
    throw std::invalid_argument("packing_coupled_counters: factor in (0,1]");

  const double a0 = sys.r(0), a1 = sys.r(1);
  const double al = sys.r(l), al1 = sys.r(l + 1);
  const double max_r = std::max(a0, a1 / factor);
  const double kappa = packing_geometry_scale(sys, factor);

  PackingCounters out;
  out.degenerate = a1 / factor >= a0 * factor;
  const std::int64_t target = static_cast<std::int64_t>(std::floor(t));
  if (target == 0) return out;

  // Pair 0/1: plain counters around y; pair 2/3: modified around y_prime.
  std::array<CirclePair, 4> pairs = {{
      {0, kappa * a1, kappa * a0, true, 0, 0, true},
      {0, kappa * al1, kappa * al, true, 0, 0, true},
      {1, kappa * a1 / factor, kappa * a0 * factor, true, 0, 0, true},
      {1, kappa * al1 * factor, kappa * al / factor, true, 0, 0, true},
  }};
  const std::array<TorusPoint, 2> centers = {wrap(y), wrap(y_prime)};

  TorusPoint p = wrap({centers[0].x + 0.5, centers[0].y + 0.5});
  std::array<std::array<double, 2>, 2> rel;
  auto reduce = [&] {
    for (int c = 0; c < 2; ++c) {
      const auto d = minimal_delta(centers[static_cast<std::size_t>(c)], p);
      rel[static_cast<std::size_t>(c)] = {d[0], d[1]};
    }
  };
  reduce();

  bool tilde_open = true, hat_open = true;
  // Instant-event sweep: a pair whose armed condition already holds at the
  // current position fires without a chord crossing.  This is what collapses
  // the inverted modified top pair (outer inside inner) into a window that
  // opens and closes at the first touch of its inner circle.
  const auto cascade = [&] {
    bool changed = true;
    while (changed) {
      changed = false;
      for (int k = 0; k < 4; ++k) {
        auto& pr = pairs[static_cast<std::size_t>(k)];
        if (!pr.active) continue;
        const auto& rc = rel[static_cast<std::size_t>(pr.center_id)];
        const double d = std::hypot(rc[0], rc[1]);
        if (pr.seek_inner && d <= pr.inner) {
          ++pr.r_count;
          pr.seek_inner = false;
          changed = true;
        } else if (!pr.seek_inner && d >= pr.outer) {
          ++pr.d_count;
          pr.seek_inner = true;
          changed = true;
          if (k == 0 && pr.d_count >= target) break;
          if (k == 2 && pr.d_count >= target) break;
        }
      }
      // Close windows at floor(t) departures of the corresponding top pair;
      // scale-l returns fired in the same instant still count (R_n <= D_t).
      if (tilde_open && pairs[0].d_count >= target) {
        out.t_tilde = pairs[1].r_count;
        tilde_open = false;
        pairs[0].active = pairs[1].active = false;
      }
      if (hat_open && pairs[2].d_count >= target) {
        out.t_hat = pairs[3].r_count;
        hat_open = false;
        pairs[2].active = pairs[3].active = false;
      }
    }
  };
  cascade();

  const double rho_ref = kappa * max_r;
  while (tilde_open || hat_open) {
    double dt = config.dt;
    if (config.dt_policy == DtPolicy::kProximityScaled) {
      double d_near = std::numeric_limits<double>::infinity();
      for (const auto& pr : pairs) {
        if (!pr.active) continue;
        const auto& rc = rel[static_cast<std::size_t>(pr.center_id)];
        const double d = std::hypot(rc[0], rc[1]);
        const double armed = pr.seek_inner ? pr.inner : pr.outer;
        d_near = std::min(d_near, std::abs(d - armed));
      }
      dt *= proximity_fraction(d_near, rho_ref);
    }
    const auto [z1, z2] = rng.normal2();
    const double sdt = std::sqrt(dt);
    const std::array<double, 2> delta = {sdt * z1, sdt * z2};

    double tau_min = -1.0;
    std::array<double, 4> tau = {-1.0, -1.0, -1.0, -1.0};
    for (int k = 0; k < 4; ++k) {
      const auto& pr = pairs[static_cast<std::size_t>(k)];
      if (!pr.active) continue;
      const double armed = pr.seek_inner ? pr.inner : pr.outer;
      const double tv = segment_circle_crossing(
          rel[static_cast<std::size_t>(pr.center_id)], delta, armed);
      tau[static_cast<std::size_t>(k)] = tv;
      if (tv >= 0.0 && (tau_min < 0.0 || tv < tau_min)) tau_min = tv;
    }

    const double step = tau_min >= 0.0 ? tau_min : 1.0;
    p = wrap({p.x + step * delta[0], p.y + step * delta[1]});
    reduce();
    if (tau_min < 0.0) continue;

    // Fire every pair whose crossing ties the earliest fraction (coincident
    // circles in the factor = 1, y_prime = y coupling), then sweep for
    // instant consequences.
    for (int k = 0; k < 4; ++k) {
      auto& pr = pairs[static_cast<std::size_t>(k)];
      if (!pr.active || tau[static_cast<std::size_t>(k)] != tau_min) continue;
      if (pr.seek_inner) {
        ++pr.r_count;
        pr.seek_inner = false;
      } else {
        ++pr.d_count;
        pr.seek_inner = true;
      }
    }
    cascade();
  }
  return out;
}

}  // namespace covertime::torus
