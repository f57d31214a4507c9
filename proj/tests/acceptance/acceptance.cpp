// Acceptance checks 1-12. Prints one PASS/FAIL line per criterion, with
// indented detail lines, and exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "fsvp/driver.hpp"
#include "test_support.hpp"

using namespace fsvp;
using namespace fsvp::testing;

namespace {

const MaterialParams kP = MaterialParams::table2();
const SolverSettings kS{};

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { details.push_back("     " + what); }
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Every history produced here also feeds the dissipation criterion.
double g_min_diss = std::numeric_limits<double>::infinity();
std::size_t g_scenarios = 0;
std::size_t g_steps = 0;

std::vector<HistoryRecord> run(const LoadingProgram& prog, Method m, const MaterialParams& p = kP) {
  auto h = run_scenario(prog, m, p, kS).history;
  for (const auto& r : h) g_min_diss = std::min(g_min_diss, r.diss);
  ++g_scenarios;
  g_steps += h.size() - 1;
  return h;
}

const char* name(Method m) { return to_string(m); }

double max_det_dev(const std::vector<HistoryRecord>& h) {
  double d = 0.0;
  for (const auto& r : h) d = std::max({d, std::abs(r.det_Ci - 1.0), std::abs(r.det_Cii - 1.0)});
  return d;
}

double max_xi(const std::vector<HistoryRecord>& h) {
  double x = 0.0;
  for (const auto& r : h) x = std::max(x, r.xi);
  return x;
}

/// Lazily computed histories shared between criteria.
struct Cache {
  std::map<std::string, std::vector<HistoryRecord>> store;
  std::map<std::string, double> cost;  ///< wall time of the first computation
  static std::string key(Variant v, Method m, double dt) {
    return fmt("%d/%s/%g", static_cast<int>(v), name(m), dt);
  }
  const std::vector<HistoryRecord>& get(Variant v, Method m, double dt) {
    const std::string k = key(v, m, dt);
    auto it = store.find(k);
    if (it == store.end()) {
      const auto t0 = std::chrono::steady_clock::now();
      it = store.emplace(k, run(accuracy_program(v, dt), m)).first;
      cost[k] = seconds_since(t0);
    }
    return it->second;
  }
  double seconds(Variant v, Method m, double dt) const { return cost.at(key(v, m, dt)); }
  const std::vector<HistoryRecord>& reference() { return get(Variant::AccuracyUnimodular, Method::EM, 0.01); }
} cache;

Outcome criterion1() {
  Outcome o;
  for (Method m : {Method::MEBM, Method::EM}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto h = run(accuracy_program(Variant::AccuracyUnimodular, 2.5), m);
    const double secs = seconds_since(t0);
    const double dev = max_det_dev(h);
    const double tol = m == Method::EM ? 1e-13 : 1e-10;
    o.check(dev <= tol, fmt("%s: max |det C_i - 1|, |det C_ii - 1| = %.3g (<= %.0e)", name(m), dev, tol));
    o.check(secs < 1.0, fmt("%s: runtime %.3f s (< 1 s)", name(m), secs));
  }
  return o;
}

Outcome criterion2() {
  Outcome o;
  std::mt19937 rng(20240601);
  for (Method m : {Method::MEBM, Method::EM}) {
    double max_tensor_skew = 0.0, max_map_skew = 0.0;
    for (int i = 0; i < 200; ++i) {
      const auto pc = random_plastic_case(rng, m, kP, kS);
      const SymTensor2 C = right_cauchy_green(pc.F_next);
      const auto r = advance(pc.prev, C, pc.dt, m, kP, kS);
      for (const SymTensor2& t : {r.state_next.C_i, r.state_next.C_ii})
        max_tensor_skew = std::max(max_tensor_skew, frobenius(skew(t.full())));
      // the unsymmetrized update evaluated at the solution
      const auto img = detail::SubproblemMap{C, r.xi, &pc.prev, m, &kP}.image(r.state_next.C_i, r.state_next.C_ii);
      for (const Tensor2& K : {img.K_i, img.K_ii})
        max_map_skew = std::max(max_map_skew, frobenius(skew(K)) / frobenius(K));
    }
    o.check(max_tensor_skew <= 1e-12, fmt("%s: max skew norm of converged C_i, C_ii = %.3g (<= 1e-12)", name(m),
                                          max_tensor_skew));
    o.check(max_map_skew <= 1e-9,
            fmt("%s: max |skew K| / |K| of the unsymmetrized map = %.3g (<= 1e-9), 200 steps", name(m), max_map_skew));
  }
  return o;
}

Outcome criterion3() {
  Outcome o;
  const auto& ebm = cache.get(Variant::AccuracyUnimodular, Method::EBM, 2.5);
  const auto& mebm = cache.get(Variant::AccuracyUnimodular, Method::MEBM, 2.5);
  double ebm_dev = 0.0, mebm_dev = 0.0;
  for (const auto& r : ebm) ebm_dev = std::max(ebm_dev, std::abs(r.det_Ci - 1.0));
  for (const auto& r : mebm) mebm_dev = std::max(mebm_dev, std::abs(r.det_Ci - 1.0));
  o.check(ebm_dev >= 1e3 * mebm_dev,
          fmt("max |det C_i - 1|: ebm %.3g, mebm %.3g (ratio >= 1e3)", ebm_dev, mebm_dev));
  std::size_t plastic = 0, nondecreasing = 0;
  for (std::size_t k = 1; k < ebm.size(); ++k) {
    if (ebm[k].xi == 0.0) continue;
    ++plastic;
    if (std::abs(ebm[k].det_Ci - 1.0) >= std::abs(ebm[k - 1].det_Ci - 1.0)) ++nondecreasing;
  }
  const double frac = plastic ? static_cast<double>(nondecreasing) / plastic : 0.0;
  o.check(plastic > 0 && frac >= 0.8,
          fmt("ebm |det C_i - 1| nondecreasing on %zu of %zu plastic steps (%.1f%%, >= 80%%)", nondecreasing, plastic,
              100.0 * frac));
  return o;
}

Outcome criterion4() {
  Outcome o;
  for (Variant v : {Variant::AccuracyUnimodular, Variant::AccuracyRaw}) {
    const char* vn = v == Variant::AccuracyUnimodular ? "unimodular" : "raw";
    for (double dt : {0.01, 10.0}) {
      const auto& a = cache.get(v, Method::MEBM, dt);
      const auto& b = cache.get(v, Method::EM, dt);
      const double rel = compare_histories(a, b).relative_max;
      const double tol = dt == 0.01 ? 1e-3 : 5e-2;
      o.check(rel <= tol, fmt("%s dt=%g: max |T_mebm - T_em| / max |T_em| = %.3g (<= %g)", vn, dt, rel, tol));
      if (dt == 10.0) {
        o.check(rel > 0.0, fmt("%s dt=10: methods differ (discrepancy > 0)", vn));
        for (Method m : {Method::MEBM, Method::EM}) {
          const double x = max_xi(m == Method::MEBM ? a : b);
          o.check(x >= 0.12 && x <= 0.22, fmt("%s dt=10 %s: max xi = %.4f (in [0.12, 0.22])", vn, name(m), x));
        }
      }
    }
  }
  return o;
}

Outcome criterion5() {
  Outcome o;
  const auto& ref = cache.reference();
  const std::vector<double> dts{5.0, 2.5, 1.25};
  double secs = cache.seconds(Variant::AccuracyUnimodular, Method::EM, 0.01);
  for (Method m : {Method::MEBM, Method::EM}) {
    std::vector<double> max_err, end_err;
    for (double dt : dts) {
      const auto& h = cache.get(Variant::AccuracyUnimodular, m, dt);
      const auto cm = compare_histories(h, ref);
      max_err.push_back(cm.max_frobenius);
      end_err.push_back(cm.errors.back());
      secs += cache.seconds(Variant::AccuracyUnimodular, m, dt);
    }
    const double order = observed_order(dts, max_err);
    o.check(order >= 0.8 && order <= 1.3,
            fmt("%s: observed order %.3f of the max-over-time error (in [0.8, 1.3]); errors %.4g, %.4g, %.4g", name(m),
                order, max_err[0], max_err[1], max_err[2]));
    o.note(fmt("%s: order of the t = 300 error %.3f; errors %.4g, %.4g, %.4g", name(m), observed_order(dts, end_err),
               end_err[0], end_err[1], end_err[2]));
    o.note(fmt("%s: ratios e(dt)/e(dt/2) of the max error: %.3f, %.3f", name(m),
               max_err[0] / max_err[1], max_err[1] / max_err[2]));
  }
  o.check(secs < 30.0, fmt("runtime %.2f s for the reference and six runs (< 30 s)", secs));
  return o;
}

Outcome criterion6() {
  Outcome o;
  const auto& ref = cache.reference();
  for (Method m : {Method::MEBM, Method::EM}) {
    const auto cm = compare_histories(cache.get(Variant::AccuracyUnimodular, m, 2.5), ref);
    const double ratio = cm.errors.back() / cm.max_frobenius;
    o.check(ratio <= 2.0, fmt("%s dt=2.5: error(t=300) / max error = %.4f (<= 2)", name(m), ratio));
  }
  return o;
}

Outcome criterion8() {
  Outcome o;
  const double E = 9 * kP.k * kP.mu / (3 * kP.k + kP.mu);
  const double nu = (3 * kP.k - 2 * kP.mu) / (6 * kP.k + 2 * kP.mu);
  const double eps = 1e-5;
  const auto u = run(uniaxial_monotonic(1e-3, eps, 1e-2), Method::MEBM);
  const auto& last = u.back();
  const double E_num = last.sigma / eps;
  const double nu_num = (1.0 - last.F(1, 1)) / eps;
  o.check(std::abs(E_num - E) <= 0.02 * E, fmt("uniaxial tangent %.6g vs E = %.6g (rel %.2e, <= 2%%)", E_num, E,
                                               std::abs(E_num - E) / E));
  o.check(std::abs(nu_num - nu) <= 0.01 * nu,
          fmt("Poisson response %.6f vs nu = %.6f (rel %.2e, <= 1%%)", nu_num, nu, std::abs(nu_num - nu) / nu));
  const auto t = run(torsion_monotonic(1e-3, eps, 1e-2), Method::MEBM);
  const double G_num = t.back().tau / eps;
  o.check(std::abs(G_num - kP.mu) <= 0.01 * kP.mu, fmt("torsion shear tangent %.6g vs mu = %.6g (rel %.2e, <= 1%%)",
                                                       G_num, kP.mu, std::abs(G_num - kP.mu) / kP.mu));
  return o;
}

Outcome criterion9() {
  Outcome o;
  const auto h = run(uniaxial_monotonic(1e-6, 0.01, 10.0), Method::MEBM);
  // first step after which every step is plastic
  std::size_t onset = h.size();
  for (std::size_t k = h.size(); k-- > 1;) {
    if (h[k].xi > 0.0)
      onset = k;
    else
      break;
  }
  if (onset == h.size()) {
    o.check(false, "no sustained plastic flow");
    return o;
  }
  const double s = h[onset].sigma;
  o.check(std::abs(s - kP.K) <= 0.03 * kP.K,
          fmt("stress at first sustained plastic step (t = %.0f s, eps = %.2e): %.3f MPa vs K = %.0f (rel %.2e, <= 3%%)",
              h[onset].t, 1e-6 * h[onset].t, s, kP.K, std::abs(s - kP.K) / kP.K));
  o.note(fmt("overstress at onset f = %.3f MPa", h[onset].f));
  return o;
}

double sigma_at(const std::vector<HistoryRecord>& h, double eps) {
  for (const auto& r : h)
    if (std::abs(r.F(0, 0) - 1.0 - eps) <= 1e-9) return r.sigma;
  throw std::runtime_error("no grid point at the requested strain");
}

Outcome criterion10() {
  Outcome o;
  {
    const std::vector<double> rates{1e-6, 0.01, 0.1, 1.0, 10.0};
    std::vector<std::vector<HistoryRecord>> curves;
    for (double r : rates) curves.push_back(run(uniaxial_monotonic(r, 0.3, 1e-3 / r), Method::MEBM));
    bool ordered = true;
    std::string values;
    for (double e : {0.02, 0.05, 0.1, 0.2, 0.3}) {
      for (std::size_t i = 1; i < rates.size(); ++i)
        ordered = ordered && sigma_at(curves[i], e) >= sigma_at(curves[i - 1], e);
    }
    for (const auto& c : curves) values += fmt(" %.1f", c.back().sigma);
    o.check(ordered, "rate ordering: sigma nondecreasing in strain rate at eps = 0.02, 0.05, 0.1, 0.2, 0.3; at 0.3:" +
                         values + " MPa");
  }
  double relax_terminal = 0.0;
  {
    const auto prog = relaxation_program({0.01, 0.02, 0.03}, 0.1, 10.0, 0.01);
    const auto h = run(prog, Method::MEBM);
    bool monotone = true;
    int holds = 0;
    for (const auto& seg : prog.schedule) {
      if (seg.v0 != seg.v1) continue;
      ++holds;
      double prev = std::numeric_limits<double>::infinity();
      for (const auto& r : h) {
        if (r.t < seg.t0 - 1e-9 || r.t > seg.t1 + 1e-9) continue;
        monotone = monotone && std::abs(r.f) <= prev;
        prev = std::abs(r.f);
        relax_terminal = r.f;
      }
    }
    o.check(monotone && holds == 3,
            fmt("relaxation: |f| nonincreasing in all %d holds of 10 s; final f = %.3f MPa", holds, relax_terminal));
  }
  {
    const auto prog = creep_program({290.0, 300.0, 310.0}, 27.0, 20.0, 0.02);
    const auto h = run(prog, Method::MEBM);
    const double creep_terminal = h.back().f;
    o.check(creep_terminal > relax_terminal,
            fmt("creep vs relaxation: terminal overstress %.3f > %.3f MPa", creep_terminal, relax_terminal));
  }
  {
    const int cycles = 10;
    const double amp = 0.05, rate = 0.1;
    const auto h = run(uniaxial_cyclic(rate, amp, cycles, 0.01), Method::MEBM);
    const double period = 4 * amp / rate;
    std::vector<double> peaks(cycles, 0.0);
    for (const auto& r : h) {
      const int c = std::min(cycles - 1, static_cast<int>(r.t / period));
      peaks[c] = std::max(peaks[c], std::abs(r.sigma));
    }
    const double change = std::abs(peaks[cycles - 1] - peaks[cycles - 2]) / peaks[cycles - 2];
    o.check(change < 5e-3, fmt("cyclic saturation: last cycle-to-cycle peak change %.3g%% (< 0.5%%); peaks %.1f -> %.1f",
                               100 * change, peaks[0], peaks[cycles - 1]));
  }
  {
    const auto h = run(torsion_monotonic(0.01, 0.5, 0.1), Method::EM);
    bool compressive = true;
    std::size_t plastic = 0;
    for (const auto& r : h)
      if (r.s > 0.0) {
        ++plastic;
        compressive = compressive && r.sigma < 0.0;
      }
    o.check(compressive && plastic > 0,
            fmt("Poynting: sigma < 0 on all %zu records beyond yield; sigma(phi=0.5) = %.2f MPa", plastic,
                h.back().sigma));
  }
  {
    const MaterialParams q = MaterialParams::fig7_modified();
    for (double amp : {0.05, 0.2}) {
      const int cycles = 3;
      const auto cyc = run(torsion_cyclic(0.01, amp, cycles, 0.1), Method::EM, q);
      const auto mono = run(torsion_monotonic(0.01, 4.0 * amp * cycles, 0.1), Method::EM, q);
      double pc = 0.0, pm = 0.0;
      for (const auto& r : cyc) pc = std::max(pc, std::abs(r.tau));
      for (const auto& r : mono) pm = std::max(pm, std::abs(r.tau));
      o.check(pc < pm, fmt("modified parameters, amplitude %.2f x %d cycles: cyclic peak |tau| %.1f < monotonic %.1f "
                           "MPa at cumulative phi %.2f",
                           amp, cycles, pc, pm, 4.0 * amp * cycles));
    }
  }
  return o;
}

Outcome criterion11() {
  Outcome o;
  std::mt19937 rng(777);
  double worst_el = 0.0, worst_pl = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Method m = i % 2 ? Method::EM : Method::MEBM;
    for (bool plastic : {false, true}) {
      const auto pc = plastic ? random_plastic_case(rng, m, kP, kS) : random_elastic_case(rng, m, kP, kS);
      const SymTensor2 C = right_cauchy_green(pc.F_next);
      const TangentMatrix J = consistent_tangent_C(pc.prev, C, pc.dt, m, kP, kS);
      const TangentMatrix fd = step_map_fd(pc.prev, C, pc.dt, m, kP, kS);
      const double rel = (J - fd).norm() / fd.norm();
      (plastic ? worst_pl : worst_el) = std::max(plastic ? worst_pl : worst_el, rel);
    }
  }
  o.check(worst_el <= 1e-5, fmt("50 elastic states: max |K - K_fd| / |K_fd| = %.3g (<= 1e-5)", worst_el));
  o.check(worst_pl <= 1e-5, fmt("50 plastic states: max |K - K_fd| / |K_fd| = %.3g (<= 1e-5)", worst_pl));
  return o;
}

Outcome criterion12() {
  Outcome o;
  MaterialParams p = kP;
  p.eta = 0.0;
  const double scale_K = 1e-8 * p.K;
  struct Case {
    const char* label;
    std::function<LoadingProgram(double)> make;
    double dt;
    bool torsion;
  };
  const std::vector<Case> cases{
      {"uniaxial eps to 0.1", [](double dt) { return uniaxial_monotonic(0.1, 0.1, dt); }, 0.01, false},
      {"uniaxial cyclic +-0.02", [](double dt) { return uniaxial_cyclic(0.1, 0.02, 2, dt); }, 0.01, false},
      {"torsion phi to 0.2", [](double dt) { return torsion_monotonic(0.01, 0.2, dt); }, 0.2, true}};
  for (const auto& c : cases) {
    for (Method m : {Method::MEBM, Method::EM}) {
      const auto coarse = run(c.make(c.dt), m, p);
      const auto fine = run(c.make(c.dt / 2), m, p);
      double worst_f = 0.0;
      for (const auto* h : {&coarse, &fine})
        for (const auto& r : *h)
          if (r.xi > 0.0) worst_f = std::max(worst_f, std::abs(r.f));
      o.check(worst_f <= scale_K, fmt("%s %s: max |F - sqrt(2/3)(K+R)| during flow = %.3g (<= %.1e)", c.label,
                                      name(m), worst_f, scale_K));
      double scale = 0.0, diff = 0.0;
      std::size_t j = 0;
      for (const auto& r : coarse) {
        while (j < fine.size() && fine[j].t < r.t - 1e-9) ++j;
        const double a = c.torsion ? r.tau : r.sigma;
        const double b = c.torsion ? fine[j].tau : fine[j].sigma;
        scale = std::max(scale, std::abs(b));
        diff = std::max(diff, std::abs(a - b));
      }
      o.check(diff <= 5e-3 * scale, fmt("%s %s: step halving changes the technical stress by %.3g%% (<= 0.5%%)",
                                        c.label, name(m), 100 * diff / scale));
    }
  }
  return o;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* title;
    std::function<Outcome()> fn;
  };
  const std::vector<Entry> entries{
      {1, "incompressibility preservation", criterion1},
      {2, "symmetry preservation", criterion2},
      {3, "ebm determinant drift", criterion3},
      {4, "cross-method agreement", criterion4},
      {5, "convergence order", criterion5},
      {6, "non-accumulation of error", criterion6},
      {8, "elastic limits", criterion8},
      {9, "yield onset", criterion9},
      {10, "qualitative experiments", criterion10},
      {11, "consistent tangent", criterion11},
      {12, "rate-independent limit", criterion12},
  };
  std::map<int, std::pair<std::string, Outcome>> results;
  for (const auto& e : entries) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = e.fn();
    } catch (const std::exception& ex) {
      o.check(false, std::string("exception: ") + ex.what());
    }
    o.note(fmt("(%.2f s)", seconds_since(t0)));
    results[e.id] = {e.title, o};
  }
  // Dissipation is checked over every history computed above.
  {
    Outcome o;
    o.check(g_min_diss >= -1e-8, fmt("min dissipation increment over %zu scenarios, %zu steps = %.3g MPa (>= -1e-8)",
                                     g_scenarios, g_steps, g_min_diss));
    results[7] = {"thermodynamic consistency", o};
  }

  int failed = 0;
  for (const auto& [id, entry] : results) {
    const auto& [title, o] = entry;
    std::printf("CRITERION %2d %s: %s\n", id, o.pass ? "PASS" : "FAIL", title.c_str());
    for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
  return failed == 0 ? 0 : 1;
}
