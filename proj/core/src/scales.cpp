#include "covertime/scales.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace covertime::scales {

double modified_radius_factor(int L) {
  return 1.0 - 100.0 / static_cast<double>(std::max(L, 200));
}

bool modified_radii_natural(int L) { return L > 100; }

std::vector<double> radii(int L) {
  if (L < 3) throw std::domain_error("radii: L must be >= 3");
  const double base = 0.75 * std::log(std::log(static_cast<double>(L)));
  std::vector<double> out(static_cast<std::size_t>(L) + 1);
  for (int l = 0; l <= L; ++l) {
    out[static_cast<std::size_t>(l)] = std::exp(-base - static_cast<double>(l));
  }
  return out;
}

double excursion_budget(int L, double s) {
  if (L < 1) throw std::domain_error("excursion_budget: L must be >= 1");
  const double Ld = static_cast<double>(L);
  return Ld * (2.0 * Ld - (1.0 - s) * std::log(Ld));
}

double target_time(double eps, double s) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::domain_error("target_time: eps must lie in (0,1)");
  }
  const double le = std::log(1.0 / eps);
  return (1.0 / 3.14159265358979323846) * le *
         (2.0 * le - (1.0 - s) * std::log(le));
}

ScaleSystem make_scale_system(int L, double s) {
  ScaleSystem sys;
  sys.L = L;
  sys.s = s;
  sys.radii = radii(L);
  const double factor = modified_radius_factor(L);
  sys.radii_minus.resize(sys.radii.size());
  sys.radii_plus.resize(sys.radii.size());
  for (std::size_t i = 0; i < sys.radii.size(); ++i) {
    sys.radii_minus[i] = sys.radii[i] * factor;
    sys.radii_plus[i] = sys.radii[i] / factor;
  }
  sys.t_s = excursion_budget(L, s);
  return sys;
}

double BarrierSet::f(double l) const {
  const double a = std::max(l, 0.0);
  const double b = std::max(static_cast<double>(L) - l, 0.0);
  return std::min(std::pow(a, 0.49), std::pow(b, 0.49));
}

double BarrierSet::g(double l) const {
  const double a = std::max(l, 0.0);
  const double b = std::max(static_cast<double>(L) - l, 0.0);
  return std::min(std::pow(a, 0.51), std::pow(b, 0.51));
}

BarrierSet barriers(int L, double s) {
  if (L < 3) throw std::domain_error("barriers: L must be >= 3");
  BarrierSet bs;
  bs.L = L;
  bs.s = s;
  bs.sqrt_ts = std::sqrt(excursion_budget(L, s));
  bs.log_L = std::log(static_cast<double>(L));
  bs.l0 = l0_cutoff(L);
  return bs;
}

int l0_cutoff(int L) {
  if (L < 3) throw std::domain_error("l0_cutoff: L must be >= 3");
  return static_cast<int>(
      std::floor(0.1 * std::log(std::log(static_cast<double>(L)))));
}

int l0_effective(int L) { return std::max(l0_cutoff(L), 2); }

}  // namespace covertime::scales
