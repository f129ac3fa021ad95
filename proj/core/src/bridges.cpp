#include "covertime/bridges.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace covertime::bridges {

namespace {

// One exact d = 0 squared-Bessel transition from y over dt.
double besq0_step(double y, double dt, Rng& rng) {
  if (y <= 0.0) return 0.0;
  const std::int64_t n = rng.poisson(y / (2.0 * dt));
  if (n == 0) return 0.0;
  return 2.0 * dt * rng.gamma(static_cast<double>(n));
}

double besq_step(int d, double y, double dt, Rng& rng) {
  double next = besq0_step(y, dt, rng);
  const double sdt = std::sqrt(dt);
  for (int i = 0; i < d; ++i) {
    const double z = sdt * rng.normal();
    next += z * z;
  }
  return next;
}

void check_besq_args(int d, double x, double T, int M) {
  if (d < 0) throw std::invalid_argument("besq: dimension must be >= 0");
  if (x < 0.0) throw std::invalid_argument("besq: start must be >= 0");
  if (!(T > 0.0) || M < 1) throw std::invalid_argument("besq: need T > 0, M >= 1");
}

}  // namespace

PathSample bb_sample(double a, double b, double T, int M, Rng& rng) {
  if (!(T > 0.0) || M < 2)
    throw std::invalid_argument("bb_sample: need T > 0 and M >= 2");
  PathSample path;
  path.kind = PathKind::kBridge;
  path.d = 1;
  path.start = a;
  path.end = b;
  path.T = T;
  path.grid.resize(static_cast<std::size_t>(M) + 1);
  path.values.resize(static_cast<std::size_t>(M) + 1);
  const double dt = T / M;
  for (int i = 0; i <= M; ++i) path.grid[static_cast<std::size_t>(i)] = dt * i;
  path.values[0] = a;
  double x = a;
  for (int i = 0; i < M - 1; ++i) {
    const double remain = T - path.grid[static_cast<std::size_t>(i)];
    const double mean = x + (b - x) * dt / remain;
    const double var = dt * (remain - dt) / remain;
    x = mean + std::sqrt(var) * rng.normal();
    path.values[static_cast<std::size_t>(i) + 1] = x;
  }
  path.values[static_cast<std::size_t>(M)] = b;
  return path;
}

double bb_linear_barrier_prob(double T, double a, double b) {
  if (!(T > 0.0 && a > 0.0 && b > 0.0))
    throw std::domain_error("bb_linear_barrier_prob: need T, a, b > 0");
  return 1.0 - std::exp(-2.0 * a * b / T);
}

McEstimate bb_linear_barrier_mc(double T, double a, double b, int M,
                                std::int64_t N, Rng& rng) {
  if (!(T > 0.0 && a > 0.0 && b > 0.0) || M < 2 || N < 1)
    throw std::invalid_argument("bb_linear_barrier_mc: bad arguments");
  const double dt = T / M;
  double sum = 0.0;
  double sumsq = 0.0;
  for (std::int64_t k = 0; k < N; ++k) {
    double x = 0.0;
    double w = 1.0;
    double h_prev = a;  // X(0) - (-a)
    for (int i = 0; i < M; ++i) {
      const double u_next = dt * (i + 1);
      double x_next;
      if (i == M - 1) {
        x_next = 0.0;
      } else {
        const double remain = T - dt * i;
        const double mean = x - x * dt / remain;
        const double var = dt * (remain - dt) / remain;
        x_next = mean + std::sqrt(var) * rng.normal();
      }
      const double line = -a + (a - b) * u_next / T;
      const double h = x_next - line;
      if (h <= 0.0) {
        w = 0.0;
        break;
      }
      // Exact probability the bridge segment dips below the linear barrier
      // given both endpoints clear it.
      w *= 1.0 - std::exp(-2.0 * h_prev * h / dt);
      h_prev = h;
      x = x_next;
    }
    sum += w;
    sumsq += w * w;
  }
  McEstimate est;
  est.n = N;
  est.value = sum / static_cast<double>(N);
  const double var = std::max(0.0, sumsq / static_cast<double>(N) -
                                       est.value * est.value);
  est.stderr_ = std::sqrt(var / static_cast<double>(N));
  return est;
}

double discrete_barrier_bound(double T, double a, double b, double t1,
                              double t2) {
  if (!(a > 0.0 && b > 0.0 && t1 >= 0.0 && t2 >= 0.0 && t1 + t2 < T))
    throw std::invalid_argument("discrete_barrier_bound: need a,b > 0, t1+t2 < T");
  const double c = 1.0;
  return (c + a + std::sqrt(t1)) * (c + b + std::sqrt(t2)) / (T - t1 - t2);
}

PathSample besq_sample(int d, double x, double T, int M, Rng& rng) {
  check_besq_args(d, x, T, M);
  PathSample path;
  path.kind = PathKind::kBesq;
  path.d = d;
  path.start = x;
  path.T = T;
  path.grid.resize(static_cast<std::size_t>(M) + 1);
  path.values.resize(static_cast<std::size_t>(M) + 1);
  const double dt = T / M;
  double y = x;
  path.grid[0] = 0.0;
  path.values[0] = y;
  for (int i = 1; i <= M; ++i) {
    y = besq_step(d, y, dt, rng);
    path.grid[static_cast<std::size_t>(i)] = dt * i;
    path.values[static_cast<std::size_t>(i)] = y;
  }
  path.end = y;
  return path;
}

PathSample besq_bridge_to_zero_sample(int d, double x, double T, int M,
                                      Rng& rng) {
  check_besq_args(d, x, T, M);
  PathSample path;
  path.kind = PathKind::kBesqBridge;
  path.d = d;
  path.start = x;
  path.end = 0.0;
  path.T = T;
  path.grid.resize(static_cast<std::size_t>(M) + 1);
  path.values.resize(static_cast<std::size_t>(M) + 1);
  const double dt = T / M;
  double y = x;        // underlying process value at transformed time
  double tau_prev = 0.0;
  path.grid[0] = 0.0;
  path.values[0] = x;
  for (int i = 1; i < M; ++i) {
    const double t = dt * i;
    const double frac = 1.0 - t / T;
    const double tau = t / frac;
    y = besq_step(d, y, tau - tau_prev, rng);
    tau_prev = tau;
    path.grid[static_cast<std::size_t>(i)] = t;
    path.values[static_cast<std::size_t>(i)] = frac * frac * y;
  }
  path.grid[static_cast<std::size_t>(M)] = T;
  path.values[static_cast<std::size_t>(M)] = 0.0;
  return path;
}

double rn_weight_zero_vs_one(const PathSample& path, double S, double x) {
  if (path.grid.size() < 2 || !(S > 0.0) || !(S < path.T))
    throw std::invalid_argument("rn_weight_zero_vs_one: need 0 < S < T");
  const double dt = path.grid[1] - path.grid[0];
  const auto is = static_cast<std::size_t>(std::llround(S / dt));
  if (is >= path.values.size())
    throw std::invalid_argument("rn_weight_zero_vs_one: S beyond the grid");
  double integral = 0.0;
  constexpr double kFloor = 1e-12;
  for (std::size_t i = 0; i <= is; ++i) {
    const double v = path.values[i];
    if (v <= 0.0) return 0.0;  // H_0 <= S: the weight lives on survival
    const double inv = 1.0 / std::max(v, kFloor);
    const double w = (i == 0 || i == is) ? 0.5 : 1.0;
    integral += w * inv * dt;
  }
  const double frac = 1.0 - S / path.T;
  const double ratio = frac * frac * x / path.values[is];
  return std::pow(ratio, 0.25) * std::exp(-0.375 * integral);
}

TubeResult tube_probability_mc(double T, double t, double u, double v, int M,
                               std::int64_t N, Rng& rng) {
  if (!(t >= 1.0) || !(T / 3.0 > t) || M < 2 || N < 1)
    throw std::invalid_argument("tube_probability_mc: need T/3 > t >= 1");
  const double dt = T / M;
  auto h = [&](double s, double delta) {
    return std::pow(std::min(s, T - s), delta);
  };
  std::int64_t tube_hits = 0;
  std::int64_t above_hits = 0;
  for (std::int64_t k = 0; k < N; ++k) {
    bool tube_ok = true;
    bool above_ok = true;
    double x = v;
    for (int i = 0; i <= M && (tube_ok || above_ok); ++i) {
      const double s = dt * i;
      if (i > 0) {
        if (i == M) {
          x = 0.0;
        } else {
          const double remain = T - dt * (i - 1);
          const double mean = x - x * dt / remain;
          const double var = dt * (remain - dt) / remain;
          x = mean + std::sqrt(var) * rng.normal();
        }
      }
      const double ubar = u * (T - s) / T;
      if (s >= t && s <= T - t) {
        if (x < ubar) above_ok = false;
        if (x < ubar + h(s, 0.499) || x > ubar + h(s, 0.501)) tube_ok = false;
      } else if (s < t) {
        if (x < ubar - T / 10000.0) tube_ok = false;
      }
    }
    if (tube_ok) ++tube_hits;
    if (above_ok) ++above_hits;
  }
  TubeResult res;
  res.n = N;
  res.p_tube = static_cast<double>(tube_hits) / static_cast<double>(N);
  res.p_above = static_cast<double>(above_hits) / static_cast<double>(N);
  res.ratio = res.p_above > 0.0 ? res.p_tube / res.p_above : 0.0;
  res.se_tube = std::sqrt(res.p_tube * (1.0 - res.p_tube) / static_cast<double>(N));
  res.se_above =
      std::sqrt(res.p_above * (1.0 - res.p_above) / static_cast<double>(N));
  return res;
}

}  // namespace covertime::bridges
