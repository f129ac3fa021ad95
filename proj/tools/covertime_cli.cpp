// covertime: command-line front end for the simulation library.
//
// Subcommands: scales, gw, bridge, lattice, torus, excursions, count, cover,
// heatmap, selftest.  Global flags --seed/--workers/--out/--format/--config
// work on every subcommand; COVERTIME_SEED overrides the default seed but
// loses to an explicit seed from the config file or the command line.
// Exit codes: 0 success, 1 statistical check failed, 2 usage error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "covertime/bridges.hpp"
#include "covertime/config.hpp"
#include "covertime/excursions.hpp"
#include "covertime/experiments.hpp"
#include "covertime/gw.hpp"
#include "covertime/lattice.hpp"
#include "covertime/report.hpp"
#include "covertime/rng.hpp"
#include "covertime/scales.hpp"
#include "covertime/stats.hpp"
#include "covertime/torus.hpp"
#include "selftest.hpp"

namespace {

using covertime::Rng;
using covertime::substream;
using covertime::harness::ConfigError;
using covertime::harness::Report;
using covertime::harness::Row;
using covertime::harness::RunConfig;
using covertime::harness::format_double;
namespace scales = covertime::scales;
namespace gw = covertime::gw;
namespace bridges = covertime::bridges;
namespace lattice = covertime::lattice;
namespace torus = covertime::torus;
namespace excursions = covertime::excursions;
namespace experiments = covertime::experiments;
namespace stats = covertime::stats;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// ---- typed parameter access --------------------------------------------------

std::string param_str(const RunConfig& cfg, const std::string& key,
                      const std::string& dflt) {
  const auto it = cfg.params.find(key);
  return it == cfg.params.end() ? dflt : it->second;
}

double param_double(const RunConfig& cfg, const std::string& key, double dflt) {
  const auto it = cfg.params.find(key);
  if (it == cfg.params.end()) return dflt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("parameter " + key + ": not a number: '" + it->second + "'");
  }
}

std::int64_t param_i64(const RunConfig& cfg, const std::string& key,
                       std::int64_t dflt) {
  const auto it = cfg.params.find(key);
  if (it == cfg.params.end()) return dflt;
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("parameter " + key + ": not an integer: '" + it->second + "'");
  }
}

int param_int(const RunConfig& cfg, const std::string& key, int dflt) {
  const std::int64_t v = param_i64(cfg, key, dflt);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError("parameter " + key + ": out of range");
  return static_cast<int>(v);
}

// ---- output ------------------------------------------------------------------

void write_text(const RunConfig& cfg, const std::string& text) {
  if (cfg.output_path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream out(cfg.output_path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + cfg.output_path);
  out << text;
}

int emit(const RunConfig& cfg, const Report& rep, bool pass) {
  write_text(cfg, cfg.format == "json" ? rep.to_json() : rep.to_csv());
  return pass ? 0 : 1;
}

// Report builder bound to one module name and the run seed.
struct Sink {
  Report rep;
  std::string module;
  std::uint64_t seed = 0;
  std::uint64_t sub = 0;

  Sink(std::string module_name, std::uint64_t seed_value)
      : module(std::move(module_name)), seed(seed_value) {}

  void add(const std::string& quantity, double value, double se = kNan,
           std::int64_t n = 0) {
    rep.add(Row{module, quantity, value, se, n, seed, sub});
  }
};

// ---- small helpers -----------------------------------------------------------

std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> aligned_hist(
    const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  std::int64_t hi = 0;
  for (const auto v : a) hi = std::max(hi, v);
  for (const auto v : b) hi = std::max(hi, v);
  std::vector<std::int64_t> ha(static_cast<std::size_t>(hi) + 1, 0);
  std::vector<std::int64_t> hb(static_cast<std::size_t>(hi) + 1, 0);
  for (const auto v : a) ++ha[static_cast<std::size_t>(v)];
  for (const auto v : b) ++hb[static_cast<std::size_t>(v)];
  return {std::move(ha), std::move(hb)};
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return kNan;
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string pad2(int i) {
  return (i < 10 ? "0" : "") + std::to_string(i);
}

void add_test_rows(Sink& s, const covertime::harness::TestReport& rep) {
  s.add(rep.name + "_stat", rep.statistic, kNan, rep.n);
  s.add(rep.name + "_p", rep.p_value, kNan, rep.n);
  s.add(rep.name + "_pass", rep.pass ? 1.0 : 0.0, kNan, rep.n);
}

// ---- subcommand handlers -----------------------------------------------------

int run_scales(const RunConfig& cfg) {
  const int L = param_int(cfg, "L", 10);
  const double s = param_double(cfg, "s", 0.0);
  if (L < 3) throw ConfigError("scales: L must be >= 3");
  const auto sys = scales::make_scale_system(L, s);
  const auto bar = scales::barriers(L, s);

  std::string out;
  if (cfg.format == "json") {
    out += "[";
    for (int l = 0; l <= L; ++l) {
      if (l) out += ",";
      out += "\n  {\"l\": " + std::to_string(l);
      out += ", \"r_l\": " + format_double(sys.r(l));
      out += ", \"r_l_minus\": " + format_double(sys.r_minus(l));
      out += ", \"r_l_plus\": " + format_double(sys.r_plus(l));
      out += ", \"alpha\": " + format_double(bar.alpha(l));
      out += ", \"beta\": " + format_double(bar.beta(l));
      out += ", \"gamma\": " + format_double(bar.gamma(l));
      out += ", \"delta\": " + format_double(bar.delta(l));
      out += "}";
    }
    out += "\n]\n";
  } else {
    out = "l,r_l,r_l_minus,r_l_plus,alpha,beta,gamma,delta\n";
    for (int l = 0; l <= L; ++l) {
      out += std::to_string(l);
      out += "," + format_double(sys.r(l));
      out += "," + format_double(sys.r_minus(l));
      out += "," + format_double(sys.r_plus(l));
      out += "," + format_double(bar.alpha(l));
      out += "," + format_double(bar.beta(l));
      out += "," + format_double(bar.gamma(l));
      out += "," + format_double(bar.delta(l));
      out += "\n";
    }
  }
  write_text(cfg, out);
  return 0;
}

int run_gw(const RunConfig& cfg, Rng& rng) {
  const int L = param_int(cfg, "L", 6);
  const double s = param_double(cfg, "s", 0.0);
  if (L < 3) throw ConfigError("gw: L must be >= 3");
  const double t = param_double(cfg, "t", scales::excursion_budget(L, s));
  if (t < 1.0) throw ConfigError("gw: t must be >= 1");
  const std::string preset = param_str(cfg, "barrier", "none");
  const std::int64_t samples = param_i64(cfg, "samples", 10000);

  Sink s_("gw", cfg.seed);
  const double extinct = gw::extinction_prob(L, t);
  s_.add("extinction_closed", extinct);
  s_.add("extinction_pgf", gw::extinction_prob_pgf(L, t));

  experiments::CountingSpec spec;
  spec.t = t;
  spec.sys = scales::make_scale_system(L, s);
  if (preset == "none") {
    spec.mode = experiments::CountingMode::kUntruncated;
  } else if (preset == "alpha") {
    spec.mode = experiments::CountingMode::kUpperTruncated;
  } else if (preset == "gamma-delta") {
    spec.mode = experiments::CountingMode::kLowerTruncated;
  } else {
    throw ConfigError("gw: barrier must be none, alpha, or gamma-delta");
  }
  const torus::SimConfig sim;
  const auto est = experiments::counting_variable_estimate(
      spec, experiments::CountingEngine::kGwExact, 0, sim, rng);
  s_.add("barrier_joint_probability", est.per_point);
  s_.add("barrier_conditional", extinct > 0.0 ? est.per_point / extinct : kNan);

  if (samples > 0) {
    std::vector<stats::MeanAcc> gen(static_cast<std::size_t>(L));
    std::int64_t extinct_n = 0;
    for (std::int64_t i = 0; i < samples; ++i) {
      const auto prof = gw::gw_sample(t, L - 1, rng);
      for (int l = 0; l < L; ++l)
        gen[static_cast<std::size_t>(l)].add(
            static_cast<double>(prof.counts[static_cast<std::size_t>(l)]));
      if (prof.counts.back() == 0) ++extinct_n;
    }
    const double freq =
        static_cast<double>(extinct_n) / static_cast<double>(samples);
    const double se = std::sqrt(
        std::max(freq * (1.0 - freq), 1.0 / static_cast<double>(samples)) /
        static_cast<double>(samples));
    s_.add("mc_extinction_freq", freq, se, samples);
    for (int l = 0; l < L; ++l) {
      const auto& acc = gen[static_cast<std::size_t>(l)];
      s_.add("mc_mean_T" + std::to_string(l), acc.mean, acc.sem(), samples);
    }
  }
  return emit(cfg, s_.rep, true);
}

int run_bridge(const RunConfig& cfg, Rng& rng) {
  const std::string kind = param_str(cfg, "kind", "bb");
  const double T = param_double(cfg, "T", 1.0);
  const int M = param_int(cfg, "M", 256);
  const std::int64_t N = param_i64(cfg, "N", 10000);
  if (T <= 0.0) throw ConfigError("bridge: T must be positive");
  if (M < 2) throw ConfigError("bridge: M must be >= 2");
  if (N < 1) throw ConfigError("bridge: N must be >= 1");

  Sink s("bridge", cfg.seed);
  if (kind == "bb") {
    const double a = param_double(cfg, "a", 1.0);
    const double b = param_double(cfg, "b", 1.0);
    const auto mc = bridges::bb_linear_barrier_mc(T, a, b, M, N, rng);
    s.add("barrier_mc", mc.value, mc.stderr_, mc.n);
    s.add("barrier_formula", bridges::bb_linear_barrier_prob(T, a, b));
  } else if (kind == "besq") {
    const int d = param_int(cfg, "d", 1);
    const double x = param_double(cfg, "x", 1.0);
    stats::MeanAcc acc;
    for (std::int64_t i = 0; i < N; ++i)
      acc.add(bridges::besq_sample(d, x, T, M, rng).values.back());
    s.add("terminal_mean_mc", acc.mean, acc.sem(), N);
    s.add("terminal_mean_formula", x + d * T);
  } else if (kind == "besq-bridge") {
    const int d = param_int(cfg, "d", 1);
    const double x = param_double(cfg, "x", 1.0);
    stats::MeanAcc acc;
    for (std::int64_t i = 0; i < N; ++i) {
      const auto path = bridges::besq_bridge_to_zero_sample(d, x, T, M, rng);
      acc.add(path.values[static_cast<std::size_t>(M / 2)]);
    }
    const double u = T * (M / 2) / static_cast<double>(M);
    const double w = 1.0 - u / T;
    s.add("midpoint_mean_mc", acc.mean, acc.sem(), N);
    s.add("midpoint_mean_formula", w * w * x + d * u * w);
  } else {
    throw ConfigError("bridge: kind must be bb, besq, or besq-bridge");
  }
  return emit(cfg, s.rep, true);
}

int run_lattice(const RunConfig& cfg, Rng& rng) {
  const int L = param_int(cfg, "L", 6);
  const double t = param_double(cfg, "t", 8.0);
  const std::string stop = param_str(cfg, "stop", "returns");
  const std::string check = param_str(cfg, "check", "none");
  const std::int64_t N = param_i64(cfg, "N", 10000);
  const int vertex = param_int(cfg, "vertex", L / 2);
  const int edge_l = param_int(cfg, "l", std::max(1, L / 2));
  if (L < 2) throw ConfigError("lattice: L must be >= 2");
  if (t < 1.0) throw ConfigError("lattice: t must be >= 1");
  if (N < 1) throw ConfigError("lattice: N must be >= 1");
  if (stop != "tau" && stop != "returns")
    throw ConfigError("lattice: stop must be tau or returns");

  Sink s("lattice", cfg.seed);
  bool pass = true;

  if (check == "none") {
    const auto kind = stop == "tau" ? lattice::StopKind::kInverseLocalTime
                                    : lattice::StopKind::kReturns;
    std::vector<stats::MeanAcc> loc(static_cast<std::size_t>(L) + 1);
    std::vector<stats::MeanAcc> trav(static_cast<std::size_t>(L));
    stats::MeanAcc elapsed;
    for (std::int64_t i = 0; i < N; ++i) {
      const auto run = lattice::ctrw_run(L, t, kind, rng);
      for (int v = 0; v <= L; ++v)
        loc[static_cast<std::size_t>(v)].add(
            run.local_times[static_cast<std::size_t>(v)]);
      for (int l = 0; l < L; ++l)
        trav[static_cast<std::size_t>(l)].add(static_cast<double>(
            run.edge_traversals[static_cast<std::size_t>(l)]));
      elapsed.add(run.elapsed);
    }
    for (int v = 0; v <= L; ++v)
      s.add("mean_local_time_" + std::to_string(v),
            loc[static_cast<std::size_t>(v)].mean,
            loc[static_cast<std::size_t>(v)].sem(), N);
    for (int l = 0; l < L; ++l)
      s.add("mean_traversals_" + std::to_string(l),
            trav[static_cast<std::size_t>(l)].mean,
            trav[static_cast<std::size_t>(l)].sem(), N);
    s.add("mean_elapsed", elapsed.mean, elapsed.sem(), N);
  } else if (check == "rk") {
    const auto rep = lattice::ray_knight_marginal_check(L, t, vertex, N, rng);
    add_test_rows(s, rep);
    pass = rep.pass;
  } else if (check == "gw") {
    // Returns-stopped edge traversals against the branching law, generation
    // by generation (edge l carries generation l of the tree).
    std::vector<std::vector<std::int64_t>> walk(static_cast<std::size_t>(L)),
        tree(static_cast<std::size_t>(L));
    for (std::int64_t i = 0; i < N; ++i) {
      const auto run = lattice::ctrw_run(L, t, lattice::StopKind::kReturns, rng);
      for (int l = 0; l < L; ++l)
        walk[static_cast<std::size_t>(l)].push_back(
            run.edge_traversals[static_cast<std::size_t>(l)]);
    }
    for (std::int64_t i = 0; i < N; ++i) {
      const auto prof = gw::gw_sample(t, L - 1, rng);
      for (int l = 0; l < L; ++l)
        tree[static_cast<std::size_t>(l)].push_back(
            prof.counts[static_cast<std::size_t>(l)]);
    }
    const double alpha = 0.01 / std::max(1, L - 1);
    for (int l = 1; l < L; ++l) {
      const auto [ha, hb] = aligned_hist(walk[static_cast<std::size_t>(l)],
                                         tree[static_cast<std::size_t>(l)]);
      const auto res = stats::chi2_two_sample(ha, hb);
      s.add("chi2_p_gen" + std::to_string(l), res.p, kNan, N);
      pass = pass && res.p > alpha;
    }
    s.add("pass", pass ? 1.0 : 0.0, kNan, N);
  } else if (check == "pmf") {
    const auto rep = lattice::conditional_pmf_check(L, t, edge_l, N, rng);
    add_test_rows(s, rep);
    pass = rep.pass;
  } else if (check == "gamma") {
    const auto rep = lattice::conditioned_gamma_check(
        L, static_cast<std::int64_t>(std::floor(t)), N, rng);
    add_test_rows(s, rep);
    pass = rep.pass;
  } else if (check == "ld") {
    const auto rep = lattice::conditional_loctime_ld_check(L, t, edge_l, N, rng);
    add_test_rows(s, rep);
    pass = rep.pass;
  } else {
    throw ConfigError("lattice: check must be rk, gw, pmf, gamma, or ld");
  }
  return emit(cfg, s.rep, pass);
}

int run_torus(const RunConfig& cfg, Rng& rng) {
  const std::string mode = param_str(cfg, "mode", "decompose");
  const double t = param_double(cfg, "t", 10.0);
  const std::int64_t N = param_i64(cfg, "N", 1000);
  torus::SimConfig sim;
  sim.dt = param_double(cfg, "dt", 1e-4);
  sim.dt_policy = torus::DtPolicy::kProximityScaled;
  sim.seed = cfg.seed;
  if (t < 1.0) throw ConfigError("torus: t must be >= 1");
  if (N < 1) throw ConfigError("torus: N must be >= 1");
  if (sim.dt <= 0.0) throw ConfigError("torus: dt must be positive");
  const torus::TorusPoint center{0.5, 0.5};

  Sink s("torus", cfg.seed);
  if (mode == "decompose") {
    const double R = param_double(cfg, "R", 0.25);
    const double r = param_double(cfg, "r", 0.25 / std::numbers::e);
    stats::MeanAcc returns, departures, final_time;
    for (std::int64_t i = 0; i < N; ++i) {
      const auto log = torus::excursion_decompose(center, R, r, t, sim, rng);
      std::int64_t n_ret = 0, n_dep = 0;
      for (const auto& ev : log.events)
        (ev.kind == torus::EventKind::kReturn ? n_ret : n_dep) += 1;
      returns.add(static_cast<double>(n_ret));
      departures.add(static_cast<double>(n_dep));
      final_time.add(log.events.empty() ? 0.0 : log.events.back().time);
    }
    s.add("mean_returns", returns.mean, returns.sem(), N);
    s.add("mean_departures", departures.mean, departures.sem(), N);
    s.add("mean_final_event_time", final_time.mean, final_time.sem(), N);
  } else if (mode == "profile-timed" || mode == "profile-exact") {
    const int L = param_int(cfg, "L", 5);
    const double sv = param_double(cfg, "s", 0.0);
    if (L < 3) throw ConfigError("torus: L must be >= 3");
    const auto sys = scales::make_scale_system(L, sv);
    const auto pmode = mode == "profile-timed"
                           ? torus::ProfileMode::kTimedEm
                           : torus::ProfileMode::kExactUntimed;
    std::vector<stats::MeanAcc> gen(static_cast<std::size_t>(L));
    std::vector<std::vector<std::int64_t>> hist(static_cast<std::size_t>(L));
    for (std::int64_t i = 0; i < N; ++i) {
      const auto prof = torus::traversal_profile(center, sys, t, pmode, sim, rng);
      for (int l = 0; l < L; ++l) {
        const std::int64_t c = prof.counts[static_cast<std::size_t>(l)];
        gen[static_cast<std::size_t>(l)].add(static_cast<double>(c));
        auto& h = hist[static_cast<std::size_t>(l)];
        if (c < 512) {
          if (static_cast<std::size_t>(c) >= h.size())
            h.resize(static_cast<std::size_t>(c) + 1, 0);
          ++h[static_cast<std::size_t>(c)];
        }
      }
    }
    for (int l = 0; l < L; ++l) {
      const auto& acc = gen[static_cast<std::size_t>(l)];
      s.add("mean_T" + std::to_string(l), acc.mean, acc.sem(), N);
    }
    for (int l = 0; l < L; ++l) {
      const auto& h = hist[static_cast<std::size_t>(l)];
      for (std::size_t k = 0; k < h.size(); ++k)
        if (h[k] > 0)
          s.add("hist_T" + std::to_string(l) + "_" + std::to_string(k),
                static_cast<double>(h[k]), kNan, N);
    }
  } else {
    throw ConfigError("torus: mode must be decompose, profile-timed, or profile-exact");
  }
  return emit(cfg, s.rep, true);
}

int run_excursions(const RunConfig& cfg, Rng& rng) {
  const double R = param_double(cfg, "R", 0.25);
  const double r = param_double(cfg, "r", 0.25 / std::numbers::e);
  const int n = param_int(cfg, "n", 200);
  const int burn = param_int(cfg, "burn-in", 50);
  const double delta = param_double(cfg, "delta", 0.25);
  const std::int64_t N = param_i64(cfg, "N", 100);
  torus::SimConfig sim;
  sim.dt = param_double(cfg, "dt", 5e-4);
  sim.dt_policy = torus::DtPolicy::kProximityScaled;
  sim.seed = cfg.seed;
  if (!(0.0 < r && r < R && R < 0.5))
    throw ConfigError("excursions: need 0 < r < R < 1/2");
  if (n < 4) throw ConfigError("excursions: n must be >= 4");
  if (N < 10) throw ConfigError("excursions: N must be >= 10");
  const torus::TorusPoint center{0.5, 0.5};

  Sink s("excursions", cfg.seed);
  const auto cyc = excursions::equilibrium_cycles(center, R, r, n, burn, sim, rng);
  stats::MeanAcc mc, oi, io;
  for (const double x : cyc.cycle_times) mc.add(x);
  for (const double x : cyc.out_in_legs) oi.add(x);
  for (const double x : cyc.in_out_legs) io.add(x);
  s.add("mean_cycle_mc", mc.mean, mc.sem(), n);
  s.add("mean_cycle_exact", excursions::mean_cycle_exact(R, r));
  s.add("mean_out_in_leg", oi.mean, oi.sem(), n);
  s.add("mean_in_out_leg", io.mean, io.sem(), n);

  s.add("minorization_q", excursions::minorization_q(R, r));
  const auto kernel = excursions::minorization_kernel_check(center, R, r, 20000, rng);
  add_test_rows(s, kernel);

  const std::vector<int> n_list = {std::max(2, n / 4), std::max(3, n / 2), n};
  const auto conc = excursions::concentration_experiment(center, R, r, n_list,
                                                         delta, N, sim, rng);
  for (std::size_t i = 0; i < conc.n_list.size(); ++i) {
    const auto tag = std::to_string(conc.n_list[i]);
    s.add("concentration_failure_n" + tag, conc.failure_rate[i], kNan, N);
    s.add("concentration_wilson_lo_n" + tag, conc.wilson_lo[i], kNan, N);
    s.add("concentration_wilson_hi_n" + tag, conc.wilson_hi[i], kNan, N);
    s.add("rel_sd_n" + tag, conc.rel_sd[i], kNan, N);
  }
  s.add("concentration_nonincreasing", conc.nonincreasing ? 1.0 : 0.0, kNan, N);
  s.add("rel_sd_loglog_slope", conc.loglog_slope, kNan, N);

  return emit(cfg, s.rep, kernel.pass);
}

int run_count(const RunConfig& cfg, Rng& rng) {
  const int L = param_int(cfg, "L", 6);
  const double sv = param_double(cfg, "s", 0.0);
  if (L < 3) throw ConfigError("count: L must be >= 3");
  const std::string mode = param_str(cfg, "mode", "z");
  const std::string engine = param_str(cfg, "engine", "gw-exact");
  const std::int64_t N = param_i64(cfg, "N", 10000);

  experiments::CountingSpec spec;
  spec.sys = scales::make_scale_system(L, sv);
  if (mode == "z") {
    spec.mode = experiments::CountingMode::kUntruncated;
  } else if (mode == "z-tilde") {
    spec.mode = experiments::CountingMode::kUpperTruncated;
  } else if (mode == "z-hat") {
    spec.mode = experiments::CountingMode::kLowerTruncated;
  } else {
    throw ConfigError("count: mode must be z, z-tilde, or z-hat");
  }
  // The lower-truncated counter is designed for the reduced budget t_{-s}.
  const double t_default = mode == "z-hat" ? scales::excursion_budget(L, -sv)
                                           : spec.sys.t_s;
  spec.t = param_double(cfg, "t", t_default);
  if (spec.t < 1.0) throw ConfigError("count: t must be >= 1");

  experiments::CountingEngine eng;
  if (engine == "gw-exact") {
    eng = experiments::CountingEngine::kGwExact;
  } else if (engine == "torus-mc") {
    eng = experiments::CountingEngine::kTorusMc;
  } else {
    throw ConfigError("count: engine must be gw-exact or torus-mc");
  }
  torus::SimConfig sim;
  sim.dt = param_double(cfg, "dt", 1e-4);
  sim.dt_policy = torus::DtPolicy::kProximityScaled;
  sim.seed = cfg.seed;

  const auto est = experiments::counting_variable_estimate(spec, eng, N, sim, rng);
  const double extinct = gw::extinction_prob(L, spec.t);

  Sink s("count", cfg.seed);
  s.add("grid_points", est.grid_points);
  s.add("per_point", est.per_point);
  s.add("expected_count", est.value, est.stderr_ > 0.0 ? est.stderr_ : kNan,
        est.n);
  s.add("extinction", extinct);
  s.add("conditional", extinct > 0.0 ? est.per_point / extinct : kNan);
  return emit(cfg, s.rep, true);
}

int run_cover(const RunConfig& cfg, Rng& rng) {
  const double eps = param_double(cfg, "eps", 0.0625);
  const double spacing = param_double(cfg, "spacing", eps / 2.0);
  const std::int64_t runs = param_i64(cfg, "runs", 20);
  const std::int64_t max_steps = param_i64(cfg, "max-steps", 400000000);
  if (runs < 1) throw ConfigError("cover: runs must be >= 1");
  torus::SimConfig sim;
  sim.dt = param_double(cfg, "dt", 1.0);  // clamped to eps^2/50 inside
  sim.seed = cfg.seed;

  const auto res =
      experiments::cover_time_estimate(eps, spacing, sim, runs, rng, max_steps);

  Sink s("cover", cfg.seed);
  stats::MeanAcc acc;
  std::vector<double> completed;
  for (std::size_t i = 0; i < res.times.size(); ++i) {
    s.add("run_" + pad2(static_cast<int>(i)), res.times[i], kNan, 1);
    if (std::isfinite(res.times[i])) {
      acc.add(res.times[i]);
      completed.push_back(res.times[i]);
    }
  }
  const double log_inv = std::log(1.0 / eps);
  const double denom = log_inv / std::numbers::pi;
  const double med = median_of(completed);
  s.add("median_cover", med, kNan, static_cast<std::int64_t>(completed.size()));
  s.add("mean_cover", acc.mean, acc.sem(), acc.n);
  s.add("leading_order", 2.0 * log_inv * denom);
  s.add("target_m_s0", scales::target_time(eps, 0.0));
  s.add("median_deficit", 2.0 * log_inv - med / denom, kNan,
        static_cast<std::int64_t>(completed.size()));
  s.add("dt_used", res.dt);
  s.add("incomplete", static_cast<double>(res.incomplete), kNan, runs);
  return emit(cfg, s.rep, true);
}

int run_heatmap(const RunConfig& cfg, Rng& rng) {
  const double T = param_double(cfg, "T", 10.0);
  const double radius = param_double(cfg, "radius", 0.1);
  const int resolution = param_int(cfg, "resolution", 64);
  const std::string pgm = param_str(cfg, "pgm", "");
  torus::SimConfig sim;
  sim.dt = param_double(cfg, "dt", 1e-4);
  sim.seed = cfg.seed;

  const auto h = experiments::occupation_heatmap(T, radius, resolution, sim, rng);

  if (!pgm.empty()) {
    std::ofstream out(pgm, std::ios::binary);
    if (!out) throw ConfigError("cannot open pgm output file: " + pgm);
    out << experiments::heatmap_to_pgm(h);
  }

  if (cfg.format == "json") {
    std::string out = "{\"resolution\": " + std::to_string(h.resolution);
    out += ", \"radius\": " + format_double(h.radius);
    out += ", \"T\": " + format_double(h.T);
    out += ", \"values\": [";
    for (std::size_t i = 0; i < h.values.size(); ++i) {
      if (i) out += ", ";
      out += format_double(h.values[i]);
    }
    out += "]}\n";
    write_text(cfg, out);
  } else {
    write_text(cfg, experiments::heatmap_to_csv(h));
  }
  return 0;
}

int run_selftest_cmd(const RunConfig& cfg) {
  bool all_pass = false;
  const auto rep =
      covertime::harness::run_selftest(cfg.seed, cfg.workers, all_pass);
  return emit(cfg, rep, all_pass);
}

// ---- wiring ------------------------------------------------------------------

struct SubSpec {
  const char* name;
  const char* desc;
  std::vector<const char*> keys;
};

const std::vector<SubSpec> kSubs = {
    {"scales", "print the radius / barrier table for a scale system",
     {"L", "s"}},
    {"gw", "branching-law probabilities: closed form, generating-function "
           "iteration, barrier DP, and MC moments",
     {"L", "t", "s", "barrier", "samples"}},
    {"bridge", "bridge and squared-Bessel estimates against formulas",
     {"kind", "d", "x", "a", "b", "T", "M", "N"}},
    {"lattice", "local-time and traversal checks for the path-graph walk",
     {"L", "t", "stop", "check", "N", "vertex", "l"}},
    {"torus", "torus Brownian motion: excursion decomposition and traversal "
              "profiles",
     {"mode", "L", "s", "t", "R", "r", "dt", "N"}},
    {"excursions", "equilibrium cycle statistics, minorization, and "
                   "departure-time concentration",
     {"R", "r", "n", "burn-in", "delta", "N", "dt"}},
    {"count", "expected truncated counting variables over a grid",
     {"L", "s", "t", "mode", "engine", "N", "dt"}},
    {"cover", "cover-time estimation via the grid surrogate",
     {"eps", "spacing", "runs", "dt", "max-steps"}},
    {"heatmap", "ball-occupation heatmap of one trajectory",
     {"T", "radius", "resolution", "pgm", "dt"}},
    {"selftest", "run the full acceptance suite", {}},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covertime: torus Brownian motion, branching traversals, and "
               "cover-time experiments"};
  app.require_subcommand(1);

  std::map<std::string, std::string> flags;
  std::string config_path;

  for (const auto& spec : kSubs) {
    CLI::App* sub = app.add_subcommand(spec.name, spec.desc);
    sub->add_option_function<std::string>(
        "--seed", [&flags](const std::string& v) { flags["seed"] = v; },
        "rng seed (decimal or 0x hex)");
    sub->add_option_function<std::string>(
        "--workers", [&flags](const std::string& v) { flags["workers"] = v; },
        "worker threads for task queues");
    sub->add_option_function<std::string>(
        "--out", [&flags](const std::string& v) { flags["out"] = v; },
        "output file (default stdout)");
    sub->add_option_function<std::string>(
        "--format", [&flags](const std::string& v) { flags["format"] = v; },
        "csv or json");
    sub->add_option("--config", config_path, "key=value config file");
    for (const char* key : spec.keys) {
      sub->add_option_function<std::string>(
          "--" + std::string(key),
          [&flags, key](const std::string& v) { flags[key] = v; }, "");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto* active = app.get_subcommands().front();
    const std::string name = active->get_name();
    std::set<std::string> allowed;
    for (const auto& spec : kSubs)
      if (name == spec.name)
        for (const char* key : spec.keys) allowed.insert(key);

    std::vector<covertime::harness::KeyValue> file_entries;
    if (!config_path.empty())
      file_entries = covertime::harness::read_config_file(config_path);

    const RunConfig cfg = covertime::harness::resolve_config(
        file_entries, flags, allowed, std::getenv("COVERTIME_SEED"));

    Rng rng(substream(cfg.seed, 0));
    if (name == "scales") return run_scales(cfg);
    if (name == "gw") return run_gw(cfg, rng);
    if (name == "bridge") return run_bridge(cfg, rng);
    if (name == "lattice") return run_lattice(cfg, rng);
    if (name == "torus") return run_torus(cfg, rng);
    if (name == "excursions") return run_excursions(cfg, rng);
    if (name == "count") return run_count(cfg, rng);
    if (name == "cover") return run_cover(cfg, rng);
    if (name == "heatmap") return run_heatmap(cfg, rng);
    if (name == "selftest") return run_selftest_cmd(cfg);
    std::fprintf(stderr, "error: unknown subcommand %s\n", name.c_str());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
