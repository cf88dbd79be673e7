// Acceptance run: one PASS/FAIL line per criterion, diagnostics indented below.
// Exits 0 when every criterion was evaluated; nonzero only if one of them threw.

#include <chrono>
#include <iomanip>
#include <iostream>

#include "hitchin/example_fields.hpp"
#include "hitchin/selftest.hpp"

using namespace hitchin;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok    " : "MISS  ") + what);
  }
  void note(const std::string& what) { notes.push_back("      " + what); }
};

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << v;
  return s.str();
}

std::string list(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? " " : "") + num(v[k]);
  return out + "]";
}

int errors = 0;

void criterion(const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.notes.push_back(std::string("exception: ") + e.what());
    ++errors;
  }
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << " (" << std::fixed << std::setprecision(1) << seconds_since(t0)
            << "s)" << std::defaultfloat << '\n';
  for (const auto& n : o.notes) std::cout << "    " << n << '\n';
  std::cout.flush();
}

std::vector<double> values_of(const std::vector<RegionMeasurement>& m, double RegionMeasurement::*q) {
  std::vector<double> v;
  for (const auto& x : m) v.push_back(x.*q);
  return v;
}

}  // namespace

int main() {
  const double tol = 1e-12, fit_floor = 10.0;
  const Grid grid(1.2, 65);
  const int jobs = resolve_jobs(0);
  SolverConfig cfg;
  cfg.tolerance = tol;

  criterion("Jordan-Chevalley exactness on the 3x3 companion field at z = 2", [&](Outcome& o) {
    const CMatrix f = examples::companion3().evaluate_unchecked(2.0);
    CMatrix fs = CMatrix::Zero(3, 3);
    fs(0, 2) = 0.5;
    fs(1, 2) = 1.0;
    fs(2, 2) = 2.0;
    JordanChevalleyParts jc = jordan_chevalley(f);
    std::vector<double> times;
    for (int k = 0; k < 101; ++k) {
      const auto t0 = Clock::now();
      jc = jordan_chevalley(f);
      times.push_back(seconds_since(t0));
    }
    std::nth_element(times.begin(), times.begin() + 50, times.end());
    const double err = (jc.semisimple - fs).cwiseAbs().maxCoeff();
    o.require(err <= 1e-10, "max entry error of f_s " + num(err) + " <= 1e-10");
    o.require(times[50] < 1e-3, "median runtime " + num(times[50] * 1e3) + " ms < 1 ms");
  });

  criterion("Solver agrees with the radial oracle (nilpotent field, N = 129)", [&](Outcome& o) {
    for (double R : {1.0, 4.0, 16.0}) {
      const auto t0 = Clock::now();
      const double err = radial_oracle_error(R, 129, tol);
      const double t = seconds_since(t0);
      o.require(err <= 5e-4, "R = " + num(R) + ": sup-relative error " + num(err) + " <= 5e-4");
      o.require(t <= 120.0, "R = " + num(R) + ": runtime " + num(t) + " s <= 120 s");
    }
  });

  criterion("Exact WKB case: constant diagonal field, R = 1..64", [&](Outcome& o) {
    const MetricField flat(Grid(1.2, 33), 2);
    const PathSpec path = PathSpec::segment(0.0, 1.0);
    const auto reps = parallel_map<TransportReport>(64, jobs, [&](int k) {
      return wkb_report(examples::diagonal(), flat, k + 1.0, path);
    });
    double worst = 0.0, worst_R = 0.0;
    for (const auto& r : reps)
      if (r.discrepancy >= worst) {
        worst = r.discrepancy;
        worst_R = r.R;
      }
    o.require(worst <= 1e-8, "max |beta/R - 2 alpha| = " + num(worst) + " (at R = " + num(worst_R) + ") <= 1e-8");
  });

  std::cout << "solving example chains on a " << grid.points << "^2 grid up to R = 64 ...\n" << std::flush;
  const std::vector<double> schedule = sqrt2_schedule(1.0, 64.0);
  const std::vector<HiggsField> fields = {examples::semisimple(), examples::nilpotent(), examples::mixed(),
                                          examples::mixed_conjugated(), examples::diagonal()};
  const auto t_chain = Clock::now();
  std::vector<Chain> chains;
  try {
    chains = parallel_map<Chain>(static_cast<int>(fields.size()), jobs,
                                 [&](int k) { return solve_chain(fields[k], grid, cfg, schedule); });
  } catch (const std::exception& e) {
    std::cout << "FAIL chain solves: " << e.what() << '\n';
    return 1;
  }
  const double chain_seconds = seconds_since(t_chain);
  std::cout << "chains solved in " << std::fixed << std::setprecision(1) << chain_seconds << std::defaultfloat << " s\n";
  const Chain &semi = chains[0], &nil = chains[1], &mixed = chains[2], &conj = chains[3], &diag = chains[4];
  auto measure = [&](int k) { return measure_chain(fields[k], chains[k], schedule, 0.5, jobs); };
  const auto m_mixed = measure(2), m_conj = measure(3), m_diag = measure(4);

  criterion("Discrepancy trend for the semisimple field (R = 2..64)", [&](Outcome& o) {
    const PathSpec path = PathSpec::segment(-0.3, 0.3);
    const std::vector<double> Rs = {2.0, 4.0, 8.0, 16.0, 32.0, 64.0};
    const auto t0 = Clock::now();
    const auto reps = parallel_map<TransportReport>(static_cast<int>(Rs.size()), jobs, [&](int k) {
      return wkb_report(fields[0], semi.metrics[semi.find(Rs[k])], Rs[k], path);
    });
    DecaySweep s;
    s.quantity = "discrepancy";
    for (const auto& r : reps) {
      s.R.push_back(r.R);
      s.values.push_back(r.discrepancy);
      s.floors.push_back(fit_floor * r.integrator_error);
    }
    fit_sweep(s);
    o.note(describe(s));
    o.note("floors " + list(s.floors));
    o.require(decreasing_suffix(s.values, s.censored) >= 3, "eventually monotone decreasing over uncensored points");
    o.require(s.fit && s.fit->confirmed_decay(), "exponential fit with c > 0 and residual <= 0.2");
    o.require(seconds_since(t0) + chain_seconds / fields.size() <= 1200.0, "runtime within 20 min");
  });

  criterion("Boundedness of |R f_n| for the mixed 3x3 field", [&](Outcome& o) {
    const std::vector<double> v = values_of(m_mixed, &RegionMeasurement::nilpotent);
    o.note("max over D(1/2) of |R f_n|, R = 1..64 in steps of sqrt 2: " + list(v));
    const auto upper = std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    const double hi = *std::max_element(upper.begin(), upper.end()), lo = *std::min_element(upper.begin(), upper.end());
    o.require(bounded_sweep(v), "variation over the upper half " + num((hi - lo) / hi * 100.0) + "% <= 10%");
  });

  criterion("Orthogonality and parallelity decay for the mixed 3x3 field", [&](Outcome& o) {
    o.note("measured in the frame P = I + e13/2 + e23/2; in the standard frame both vanish identically");
    for (auto [name, q] : std::vector<std::pair<std::string, double RegionMeasurement::*>>{
             {"orthogonality", &RegionMeasurement::orthogonality}, {"parallelity", &RegionMeasurement::parallelity}}) {
      const DecaySweep s = make_sweep(name, conj, schedule, values_of(m_conj, q), fit_floor);
      o.note(describe(s));
      o.require(exponential_decay(s), name + ": exponential fit with c > 0");
      const double v2 = s.values[conj.find(2.0)], v64 = s.values[conj.find(64.0)];
      o.require(v64 <= 1e-3 * v2, name + ": value at 64 (" + num(v64) + ") <= 1e-3 x value at 2 (" + num(v2) + ")");
    }
  });

  criterion("Connection remainder decays; vanishes on the diagonal field", [&](Outcome& o) {
    const DecaySweep s = make_sweep("remainder", conj, schedule, values_of(m_conj, &RegionMeasurement::remainder_total), fit_floor);
    o.note(describe(s));
    o.require(exponential_decay(s), "mixed field: exponential fit with c > 0");
    double worst = 0.0;
    for (const auto& m : m_diag) worst = std::max(worst, m.remainder_total);
    o.require(worst <= tol, "diagonal field: max remainder " + num(worst) + " <= solver tolerance");
  });

  criterion("Energy comparison with the toral map", [&](Outcome& o) {
    const std::vector<int> region = grid.disk_nodes(0.5);
    double split = 0.0, margin = 1e300;
    std::vector<std::vector<double>> gaps(4);
    for (int f = 0; f < 4; ++f) {
      const auto pts = parallel_map<EnergyPoint>(static_cast<int>(schedule.size()), jobs, [&](int k) {
        return energy_point(pullback_tensors(fields[f], chains[f].metrics[k], schedule[k]), region);
      });
      for (const auto& p : pts) {
        split = std::max(split, p.split_error);
        margin = std::min(margin, p.lower_margin);
        gaps[f].push_back(std::max(0.0, p.gap_max));
      }
    }
    o.require(split <= 1e-9, "gap = R^2 |f_u|^2 node-wise: max error " + num(split) + " <= 1e-9");
    o.require(margin >= -1e-8, "lower bound: min gap / R^2 = " + num(margin) + " >= -1e-8");
    const DecaySweep s = make_sweep("semisimple gap", semi, schedule, gaps[0], fit_floor);
    o.note(describe(s));
    o.require(exponential_decay(s), "semisimple gap: exponential fit with c > 0");
    std::vector<double> root = gaps[1];
    for (double& x : root) x = std::sqrt(x);
    o.note("nilpotent gap " + list(gaps[1]));
    o.require(bounded_sweep(root), "nilpotent gap bounded (square root varies <= 10% over the upper half)");
    o.require(gaps[1].back() > 1e3 * fit_floor * nil.reports.back().residual_sup, "nilpotent gap non-vanishing");
  });

  criterion("Structural invariants", [&](Outcome& o) {
    double det = 0.0;
    for (const Chain* c : {&semi, &nil, &mixed, &conj, &diag})
      for (const auto& m : c->metrics)
        for (const auto& g : m.grams()) det = std::max(det, std::abs(g.determinant() - 1.0));
    o.require(det <= 1e-6, "det H = 1: max deviation " + num(det) + " <= 1e-6");
    const CMatrix p = transport(semi.metrics[semi.find(1.0)], fields[0], 1.0, PathSpec::circle(0.0, 0.4));
    const double hol = (p - CMatrix::Identity(2, 2)).norm();
    o.require(hol <= 1e-6, "loop holonomy on the solved metric (semisimple, R = 1, |z| = 0.4): |P - I| = " + num(hol) +
                               " <= 1e-6");
    const auto [l1, l2] = projection_identity_errors(1, 10000);
    o.require(std::max(l1, l2) <= 1e-9, "projection identities on 10^4 random instances: " + num(std::max(l1, l2)) + " <= 1e-9");
    const double e1 = manufactured_error(17, 0.5), e2 = manufactured_error(33, 0.5), e3 = manufactured_error(65, 0.5);
    const double order = std::min(std::log2(e1 / e2), std::log2(e2 / e3));
    o.note("manufactured errors " + list({e1, e2, e3}));
    o.require(order >= 1.8, "manufactured-solution order " + num(order) + " >= 1.8");
  });

  return errors ? 1 : 0;
}
