#ifndef HITCHIN_EXPERIMENT_HPP
#define HITCHIN_EXPERIMENT_HPP

// Experiment configuration, versioned CSV output and the solve / sweep /
// wkb / energy drivers behind the command-line front end.

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "hitchin/core.hpp"
#include "hitchin/decoupling.hpp"
#include "hitchin/energy.hpp"
#include "hitchin/grid.hpp"
#include "hitchin/higgs_field.hpp"
#include "hitchin/hitchin_solver.hpp"
#include "hitchin/wkb.hpp"

namespace hitchin {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

struct Tolerances {
  double hitchin_residual = 1e-12;
  double transport = 1e-6;
  double fit_floor = 10.0;  // censoring floor as a multiple of the solver residual
};

struct ExperimentConfig {
  HiggsField field;
  json field_doc;
  Grid grid{1.2, 65};
  std::vector<double> R_schedule;
  double region = 0.5;
  std::vector<PathSpec> paths;
  std::vector<json> path_docs;
  std::string outputs = "out";
  Tolerances tolerances;
  std::uint64_t seed = 1;
  SolverConfig solver;
  json solver_doc = json::object();
};

namespace detail {

inline void reject_unknown(const json& j, const std::vector<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

inline Complex point_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(where + ": points are [x, y] pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline PathSpec path_from_json(const json& j) {
  reject_unknown(j, {"kind", "from", "to", "center", "radius", "theta0", "theta1", "parts", "samples", "label"}, "path");
  const std::string kind = j.at("kind").get<std::string>();
  const int samples = j.value("samples", 256);
  PathSpec p;
  if (kind == "segment") {
    p = PathSpec::segment(point_from_json(j.at("from"), "path"), point_from_json(j.at("to"), "path"), samples);
  } else if (kind == "arc") {
    p = PathSpec::arc(point_from_json(j.at("center"), "path"), j.at("radius").get<double>(), j.at("theta0").get<double>(),
                      j.at("theta1").get<double>(), samples);
  } else if (kind == "circle") {
    p = PathSpec::circle(point_from_json(j.at("center"), "path"), j.at("radius").get<double>(), samples);
  } else if (kind == "concatenate") {
    const json& parts = j.at("parts");
    if (!parts.is_array() || parts.size() < 2) throw ConfigError("path: concatenate needs at least two parts");
    p = path_from_json(parts[0]);
    for (std::size_t k = 1; k < parts.size(); ++k) p = PathSpec::concatenate(p, path_from_json(parts[k]));
  } else {
    throw ConfigError("path: unknown kind '" + kind + "'");
  }
  if (j.contains("label")) p.label = j.at("label").get<std::string>();
  if (p.samples % 2) throw ConfigError("path: samples must be even");
  return p;
}

inline std::vector<double> schedule_from_json(const json& j) {
  reject_unknown(j, {"values", "geometric"}, "R_schedule");
  std::vector<double> out;
  if (j.contains("values") == j.contains("geometric"))
    throw ConfigError("R_schedule: give exactly one of 'values' or 'geometric'");
  if (j.contains("values")) {
    for (const auto& v : j.at("values")) out.push_back(v.get<double>());
  } else {
    const json& g = j.at("geometric");
    reject_unknown(g, {"start", "stop", "ratio"}, "R_schedule.geometric");
    const double start = g.at("start").get<double>(), stop = g.at("stop").get<double>(), ratio = g.at("ratio").get<double>();
    if (!(start > 0.0) || !(ratio > 1.0) || !(stop >= start)) throw ConfigError("R_schedule: need 0 < start <= stop and ratio > 1");
    for (int k = 0;; ++k) {
      const double r = start * std::pow(ratio, k);
      if (r > stop * (1.0 + 1e-12)) break;
      out.push_back(r);
    }
  }
  if (out.empty()) throw ConfigError("R_schedule: empty");
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!(out[k] >= 0.0)) throw ConfigError("R_schedule: values must be non-negative");
    if (k && !(out[k] > out[k - 1])) throw ConfigError("R_schedule: values must increase");
  }
  return out;
}

inline SolverConfig solver_from_json(const json& j) {
  reject_unknown(j, {"max_newton", "R_start", "growth", "max_halvings", "fd_step"}, "solver");
  SolverConfig c;
  c.max_newton = j.value("max_newton", c.max_newton);
  c.R_start = j.value("R_start", c.R_start);
  c.growth = j.value("growth", c.growth);
  c.max_halvings = j.value("max_halvings", c.max_halvings);
  c.fd_step = j.value("fd_step", c.fd_step);
  if (c.max_newton < 1 || !(c.R_start > 0.0) || !(c.growth > 1.0) || c.max_halvings < 0 || !(c.fd_step > 0.0))
    throw ConfigError("solver: invalid parameter");
  return c;
}

}  // namespace detail

/// Parses a configuration document; `base_dir` resolves a relative field_file.
inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
  try {
    detail::reject_unknown(j, {"field", "field_file", "grid", "R_schedule", "region", "paths", "outputs", "tolerances", "seed", "solver"},
                           "config");
    ExperimentConfig c;
    if (j.contains("field") == j.contains("field_file")) throw ConfigError("config: give exactly one of 'field' or 'field_file'");
    if (j.contains("field")) {
      c.field_doc = j.at("field");
    } else {
      const auto path = base_dir / j.at("field_file").get<std::string>();
      std::ifstream in(path);
      if (!in) throw ConfigError("config: cannot open field file " + path.string());
      c.field_doc = json::parse(in);
    }
    c.field = higgs_field_from_json(c.field_doc);
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      detail::reject_unknown(g, {"half_width", "points"}, "grid");
      const double hw = g.value("half_width", 1.2);
      const int n = g.value("points", 65);
      if (n < 5 || n % 2 == 0 || hw < 1.0) throw ConfigError("grid: points must be odd and >= 5, half_width >= 1");
      c.grid = Grid(hw, n);
    }
    if (std::abs(c.grid.half_width - c.field.half_width()) > 1e-12)
      throw ConfigError("config: grid half_width differs from the field domain");
    c.R_schedule = detail::schedule_from_json(j.at("R_schedule"));
    c.region = j.value("region", 0.5);
    if (!(c.region > 0.0) || c.region > 0.5 + 1e-12) throw ConfigError("config: region radius must lie in (0, 1/2]");
    if (j.contains("paths")) {
      for (const auto& p : j.at("paths")) {
        c.paths.push_back(detail::path_from_json(p));
        c.path_docs.push_back(p);
      }
    }
    c.outputs = j.value("outputs", std::string("out"));
    if (j.contains("tolerances")) {
      const json& t = j.at("tolerances");
      detail::reject_unknown(t, {"hitchin_residual", "transport", "fit_floor"}, "tolerances");
      c.tolerances.hitchin_residual = t.value("hitchin_residual", c.tolerances.hitchin_residual);
      c.tolerances.transport = t.value("transport", c.tolerances.transport);
      c.tolerances.fit_floor = t.value("fit_floor", c.tolerances.fit_floor);
      if (!(c.tolerances.hitchin_residual > 0.0) || !(c.tolerances.transport > 0.0) || !(c.tolerances.fit_floor > 0.0))
        throw ConfigError("tolerances: all tolerances must be positive");
    }
    c.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("solver")) {
      c.solver_doc = j.at("solver");
      c.solver = detail::solver_from_json(c.solver_doc);
    }
    c.solver.tolerance = c.tolerances.hitchin_residual;
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

/// Applies the --grid and --rmax overrides.
inline void apply_overrides(ExperimentConfig& c, int grid_points, double rmax) {
  if (grid_points > 0) {
    if (grid_points < 5 || grid_points % 2 == 0) throw ConfigError("--grid: points must be odd and >= 5");
    c.grid = Grid(c.grid.half_width, grid_points);
  }
  if (rmax > 0.0) {
    std::vector<double> kept;
    for (double r : c.R_schedule)
      if (r <= rmax * (1.0 + 1e-12)) kept.push_back(r);
    if (kept.empty()) throw ConfigError("--rmax: no scheduled R remains");
    c.R_schedule = kept;
  }
}

/// Canonical document of the effective configuration (sorted keys).
inline json canonical_config(const ExperimentConfig& c) {
  json j;
  j["field"] = to_json(c.field);
  j["grid"] = {{"half_width", c.grid.half_width}, {"points", c.grid.points}};
  j["R_schedule"] = c.R_schedule;
  j["region"] = c.region;
  j["paths"] = c.path_docs;
  j["tolerances"] = {{"hitchin_residual", c.tolerances.hitchin_residual},
                     {"transport", c.tolerances.transport},
                     {"fit_floor", c.tolerances.fit_floor}};
  j["seed"] = c.seed;
  j["solver"] = {{"max_newton", c.solver.max_newton}, {"R_start", c.solver.R_start}, {"growth", c.solver.growth},
                 {"max_halvings", c.solver.max_halvings}, {"fd_step", c.solver.fd_step}};
  return j;
}

/// 64-bit FNV-1a of the canonical configuration, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string text = canonical_config(c).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

// ---------------------------------------------------------------------------
// Output

/// CSV file with the `# schema=<name>/v1, config=<hash>` header line.
class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, const std::string& schema, const std::string& hash,
            const std::vector<std::string>& columns)
      : out_(path), path_(path) {
    if (!out_) throw ConfigError("output: cannot write " + path.string());
    out_ << "# schema=" << schema << "/v1, config=" << hash << '\n';
    for (std::size_t k = 0; k < columns.size(); ++k) out_ << (k ? "," : "") << columns[k];
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << format(values), first = false), ...);
    out_ << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
    out_ << '\n';
  }

  static std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
  static std::string format(int v) { return std::to_string(v); }
  static std::string format(bool v) { return v ? "1" : "0"; }
  static std::string format(const std::string& v) { return v; }
  static std::string format(const char* v) { return v; }

  const std::filesystem::path& path() const { return path_; }

private:
  std::ofstream out_;
  std::filesystem::path path_;
};

/// Stream that discards everything.
inline std::ostream& null_stream() {
  static std::ostream sink(nullptr);
  return sink;
}

// ---------------------------------------------------------------------------
// Worker pool

/// Worker count: `requested` if positive, else HITCHIN_JOBS, else hardware concurrency.
inline int resolve_jobs(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HITCHIN_JOBS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs task(k) for k in [0, count) on `jobs` threads; results are stored by index.
template <class T>
std::vector<T> parallel_map(int count, int jobs, const std::function<T(int)>& task) {
  std::vector<T> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k; (k = next++) < count;) {
      try {
        out[k] = task(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min(jobs, count));
  std::vector<std::thread> threads;
  for (int t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Drivers

struct RunContext {
  ExperimentConfig config;
  std::filesystem::path out_dir;
  int jobs = 1;
  std::string hash;
  std::ostream* log = &std::cerr;
};

namespace detail {

/// Solves along the schedule and keeps the metric at each scheduled R.
inline std::vector<std::pair<MetricField, SolveReport>> solve_chain(const RunContext& ctx) {
  HitchinSolver solver(ctx.config.field, ctx.config.grid, ctx.config.solver);
  std::vector<std::pair<MetricField, SolveReport>> out;
  for (double R : ctx.config.R_schedule) {
    SolveReport rep = solver.solve(R);
    *ctx.log << "solved R=" << R << " residual=" << rep.residual_sup << " newton=" << rep.newton_iterations << '\n';
    out.emplace_back(solver.metric(), std::move(rep));
  }
  return out;
}

inline std::string join_steps(const std::vector<double>& steps) {
  std::string s;
  for (std::size_t k = 0; k < steps.size(); ++k) s += (k ? ";" : "") + CsvWriter::format(steps[k]);
  return s;
}

inline void write_fit_row(CsvWriter& w, const DecaySweep& s, const std::string& verdict) {
  if (s.fit) {
    const DecayFit& f = *s.fit;
    w.row(s.quantity, std::string(to_string(f.model)), f.C, f.c, f.residual, static_cast<int>(f.used.size()),
          decreasing_suffix(s.values, s.censored), f.confirmed_decay(), verdict);
  } else {
    w.row(std::vector<std::string>{s.quantity, "none", "nan", "nan", "nan", "0",
                                   std::to_string(decreasing_suffix(s.values, s.censored)), "0", verdict});
  }
}

inline const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols{"quantity", "model", "C", "c", "residual", "points_fitted",
                                             "decreasing_suffix", "confirmed_decay", "verdict"};
  return cols;
}

}  // namespace detail

inline void write_solve_report(CsvWriter& w, const SolveReport& r) {
  w.row(r.R, r.residual_sup, r.tolerance, r.newton_iterations, r.factorizations, r.converged,
        detail::join_steps(r.continuation_steps));
}

inline const std::vector<std::string>& solve_report_columns() {
  static const std::vector<std::string> cols{"R", "residual_sup", "tolerance", "newton_iterations", "factorizations",
                                             "converged", "continuation_steps"};
  return cols;
}

/// solve: metric checkpoint at the last scheduled R plus one report row per R.
inline void run_solve(const RunContext& ctx) {
  CsvWriter report(ctx.out_dir / "solve_report.csv", "solve_report", ctx.hash, solve_report_columns());
  HitchinSolver solver(ctx.config.field, ctx.config.grid, ctx.config.solver);
  for (double R : ctx.config.R_schedule) {
    const SolveReport rep = solver.solve(R);
    *ctx.log << "solved R=" << R << " residual=" << rep.residual_sup << '\n';
    write_solve_report(report, rep);
  }
  save_checkpoint((ctx.out_dir / "metric.chk").string(), solver.metric());
}

/// Every decoupling quantity, in the order written by run_sweep.
inline std::vector<std::pair<std::string, double RegionMeasurement::*>> sweep_quantities() {
  return {{"orthogonality", &RegionMeasurement::orthogonality},
          {"adjoint_gap", &RegionMeasurement::adjoint_gap},
          {"nilpotent_norm", &RegionMeasurement::nilpotent},
          {"parallelity", &RegionMeasurement::parallelity},
          {"second_fundamental", &RegionMeasurement::second_fundamental},
          {"comm_semisimple", &RegionMeasurement::comm_semisimple},
          {"comm_nil_semi", &RegionMeasurement::comm_nil_semi},
          {"comm_semi_nil", &RegionMeasurement::comm_semi_nil},
          {"curvature_balance", &RegionMeasurement::curvature_balance},
          {"remainder_connection", &RegionMeasurement::remainder_connection},
          {"remainder_semisimple", &RegionMeasurement::remainder_semisimple},
          {"remainder_nilpotent", &RegionMeasurement::remainder_nilpotent},
          {"remainder_total", &RegionMeasurement::remainder_total},
          {"hitchin_residual", &RegionMeasurement::hitchin_residual}};
}

struct SweepResult {
  std::vector<double> R;
  std::vector<RegionMeasurement> measurements;
  std::vector<SolveReport> reports;
  std::vector<DecaySweep> sweeps;
  bool nilpotent_bounded = true;
};

/// Boundedness proxy: across the upper half of the sweep the values vary by at
/// most 10% of their maximum there.
inline bool bounded_sweep(const std::vector<double>& values, double variation = 0.1) {
  if (values.empty()) return true;
  const auto first = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  const auto [lo, hi] = std::minmax_element(first, values.end());
  return *hi - *lo <= variation * *hi;
}

inline SweepResult sweep_measurements(const RunContext& ctx) {
  const auto chain = detail::solve_chain(ctx);
  SweepResult res;
  res.R = ctx.config.R_schedule;
  for (const auto& c : chain) res.reports.push_back(c.second);
  res.measurements = parallel_map<RegionMeasurement>(static_cast<int>(chain.size()), ctx.jobs, [&](int k) {
    return measure_region(ctx.config.field, chain[k].first, res.R[k], ctx.config.region);
  });
  for (const auto& [name, member] : sweep_quantities()) {
    DecaySweep s;
    s.quantity = name;
    s.R = res.R;
    for (std::size_t k = 0; k < res.R.size(); ++k) {
      s.values.push_back(res.measurements[k].*member);
      s.floors.push_back(ctx.config.tolerances.fit_floor * res.reports[k].residual_sup);
    }
    fit_sweep(s);
    res.sweeps.push_back(std::move(s));
  }
  std::vector<double> nil;
  for (const auto& m : res.measurements) nil.push_back(m.nilpotent);
  res.nilpotent_bounded = bounded_sweep(nil);
  return res;
}

/// sweep: one CSV per quantity plus a fit summary.
inline void run_sweep(const RunContext& ctx) {
  const SweepResult res = sweep_measurements(ctx);
  const SpectralCertificate cert = critical_set(ctx.config.field);
  CsvWriter summary(ctx.out_dir / "sweep_summary.csv", "decay_summary", ctx.hash, detail::summary_columns());
  for (const DecaySweep& s : res.sweeps) {
    CsvWriter w(ctx.out_dir / ("sweep_" + s.quantity + ".csv"), "decay_sweep", ctx.hash, {"R", "value", "censored"});
    for (std::size_t k = 0; k < s.R.size(); ++k) w.row(s.R[k], s.values[k], static_cast<bool>(s.censored[k]));
    std::string verdict;
    if (s.quantity == "nilpotent_norm")
      verdict = res.nilpotent_bounded ? "bounded" : "growing";
    else
      verdict = s.fit ? (s.fit->confirmed_decay() ? "exponential_decay" : "not_confirmed") : "insufficient_data";
    detail::write_fit_row(summary, s, verdict);
  }
  CsvWriter rep(ctx.out_dir / "sweep_solves.csv", "solve_report", ctx.hash, solve_report_columns());
  for (const auto& r : res.reports) write_solve_report(rep, r);
  CsvWriter c(ctx.out_dir / "sweep_certificate.csv", "certificate", ctx.hash, {"m", "d", "A", "critical_points"});
  c.row(cert.m, cert.d, cert.A, static_cast<int>(cert.critical_points.size()));
}

struct WkbResult {
  std::vector<std::vector<TransportReport>> reports;  // [path][R]
  std::vector<DecaySweep> sweeps;                     // discrepancy per path
};

/// Discrepancy floors are fit_floor x the step-doubling integrator estimate.
inline WkbResult wkb_measurements(const RunContext& ctx) {
  if (ctx.config.paths.empty()) throw ConfigError("wkb: config lists no paths");
  const auto chain = detail::solve_chain(ctx);
  const int np = static_cast<int>(ctx.config.paths.size());
  const int nr = static_cast<int>(chain.size());
  const auto flat = parallel_map<TransportReport>(np * nr, ctx.jobs, [&](int k) {
    const int p = k / nr, r = k % nr;
    return wkb_report(ctx.config.field, chain[r].first, ctx.config.R_schedule[r], ctx.config.paths[p]);
  });
  WkbResult res;
  for (int p = 0; p < np; ++p) {
    res.reports.emplace_back(flat.begin() + p * nr, flat.begin() + (p + 1) * nr);
    DecaySweep s;
    s.quantity = "wkb_discrepancy_" + ctx.config.paths[p].label;
    for (const auto& r : res.reports.back()) {
      if (r.step_halving > ctx.config.tolerances.transport)
        throw InternalInconsistency("wkb: step doubling changes the wedge norms beyond the transport tolerance");
      s.R.push_back(r.R);
      s.values.push_back(r.discrepancy);
      s.floors.push_back(ctx.config.tolerances.fit_floor * r.integrator_error);
    }
    fit_sweep(s);
    res.sweeps.push_back(std::move(s));
  }
  return res;
}

/// wkb: TransportReport rows per path plus a fit summary.
inline void run_wkb(const RunContext& ctx) {
  const WkbResult res = wkb_measurements(ctx);
  const int n = ctx.config.field.rank();
  std::vector<std::string> cols{"R"};
  for (int i = 1; i <= n; ++i) cols.push_back("beta_" + std::to_string(i));
  for (int i = 1; i <= n; ++i) cols.push_back("alpha_" + std::to_string(i));
  cols.push_back("discrepancy");
  for (int i = 1; i <= n; ++i) cols.push_back("wedge_" + std::to_string(i));
  for (int i = 1; i <= n; ++i) cols.push_back("discrepancy_" + std::to_string(i));
  cols.insert(cols.end(), {"integrator_error", "crosscheck", "steps", "censored"});
  CsvWriter summary(ctx.out_dir / "wkb_summary.csv", "decay_summary", ctx.hash, detail::summary_columns());
  for (std::size_t p = 0; p < res.reports.size(); ++p) {
    const DecaySweep& s = res.sweeps[p];
    CsvWriter w(ctx.out_dir / ("wkb_" + ctx.config.paths[p].label + ".csv"), "wkb_report", ctx.hash, cols);
    for (std::size_t k = 0; k < res.reports[p].size(); ++k) {
      const TransportReport& r = res.reports[p][k];
      std::vector<std::string> cells{CsvWriter::format(r.R)};
      for (double v : r.beta) cells.push_back(CsvWriter::format(v));
      for (double v : r.alpha) cells.push_back(CsvWriter::format(v));
      cells.push_back(CsvWriter::format(r.discrepancy));
      for (double v : r.wedge_lognorms) cells.push_back(CsvWriter::format(v));
      for (double v : r.entry_discrepancy) cells.push_back(CsvWriter::format(v));
      cells.push_back(CsvWriter::format(r.integrator_error));
      cells.push_back(CsvWriter::format(r.crosscheck));
      cells.push_back(CsvWriter::format(r.steps));
      cells.push_back(CsvWriter::format(static_cast<bool>(s.censored[k])));
      w.row(cells);
    }
    const std::string verdict =
        s.fit ? (s.fit->confirmed_decay() ? "exponential_decay" : to_string(s.fit->model)) : "insufficient_data";
    detail::write_fit_row(summary, s, verdict);
  }
}

/// energy: tensor grids at the last scheduled R and the gap sweep.
inline void run_energy(const RunContext& ctx) {
  const auto chain = detail::solve_chain(ctx);
  const std::vector<int> region = ctx.config.grid.disk_nodes(ctx.config.region);
  const auto tensors = parallel_map<PullbackTensors>(static_cast<int>(chain.size()), ctx.jobs, [&](int k) {
    return pullback_tensors(ctx.config.field, chain[k].first, ctx.config.R_schedule[k]);
  });
  EnergyComparison cmp;
  cmp.sweep.quantity = "energy_gap";
  for (std::size_t k = 0; k < chain.size(); ++k) {
    EnergyPoint p = energy_point(tensors[k], region);
    p.residual = chain[k].second.residual_sup;
    cmp.points.push_back(p);
    cmp.sweep.R.push_back(p.R);
    cmp.sweep.values.push_back(std::max(0.0, p.gap_max));
    cmp.sweep.floors.push_back(ctx.config.tolerances.fit_floor * p.residual);
  }
  fit_sweep(cmp.sweep);

  CsvWriter gap(ctx.out_dir / "energy_gap.csv", "energy_gap", ctx.hash,
                {"R", "gap_max", "lower_margin", "split_error", "holo_error", "residual", "censored"});
  for (std::size_t k = 0; k < cmp.points.size(); ++k) {
    const EnergyPoint& p = cmp.points[k];
    gap.row(p.R, p.gap_max, p.lower_margin, p.split_error, p.holo_error, p.residual,
            static_cast<bool>(cmp.sweep.censored[k]));
  }
  CsvWriter summary(ctx.out_dir / "energy_summary.csv", "decay_summary", ctx.hash, detail::summary_columns());
  std::vector<double> gaps;
  for (const auto& p : cmp.points) gaps.push_back(std::sqrt(std::max(0.0, p.gap_max)));
  const std::string verdict = cmp.sweep.fit && cmp.sweep.fit->confirmed_decay() ? "exponential_decay"
                              : bounded_sweep(gaps)                              ? "bounded"
                                                                                 : "growing";
  detail::write_fit_row(summary, cmp.sweep, verdict);

  // Tensor components as (x, y, value) grids; the energy density is g_mixed
  // (coefficient of dx dy in e dA for the flat reference metric).
  const PullbackTensors& t = tensors.back();
  const Grid& g = t.grid;
  auto grid_csv = [&](const std::string& name, const std::function<double(int)>& value) {
    CsvWriter w(ctx.out_dir / ("tensor_" + name + ".csv"), "tensor_grid", ctx.hash, {"x", "y", "value"});
    for (int idx = 0; idx < g.size(); ++idx) w.row(g.point(idx).real(), g.point(idx).imag(), value(idx));
  };
  grid_csv("g_mixed", [&](int i) { return t.g_mixed[i]; });
  grid_csv("g_holo_re", [&](int i) { return t.g_holo[i].real(); });
  grid_csv("g_holo_im", [&](int i) { return t.g_holo[i].imag(); });
  grid_csv("toral_mixed", [&](int i) { return t.toral_mixed[i]; });
  grid_csv("toral_holo_re", [&](int i) { return t.toral_holo[i].real(); });
  grid_csv("toral_holo_im", [&](int i) { return t.toral_holo[i].imag(); });
  grid_csv("diag_part", [&](int i) { return t.diag_part[i]; });
  grid_csv("upper_part", [&](int i) { return t.upper_part[i]; });
}

}  // namespace hitchin

#endif  // HITCHIN_EXPERIMENT_HPP
