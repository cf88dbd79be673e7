// hitchin_lab: solve | sweep | wkb | energy | selftest

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "hitchin/experiment.hpp"
#include "hitchin/selftest.hpp"

namespace fs = std::filesystem;
using namespace hitchin;

namespace {

struct Options {
  std::string config;
  std::string out;
  int jobs = 0;
  int grid = 0;
  double rmax = 0.0;
};

void add_common(CLI::App* sub, Options& o, bool need_out) {
  sub->add_option("--config", o.config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
  auto* out = sub->add_option("--out", o.out, "output directory");
  if (need_out) out->required();
  sub->add_option("--jobs", o.jobs, "worker threads (default: HITCHIN_JOBS, else all cores)")->check(CLI::PositiveNumber);
  sub->add_option("--grid", o.grid, "override grid points per side (odd)");
  sub->add_option("--rmax", o.rmax, "drop scheduled R above this value")->check(CLI::PositiveNumber);
}

RunContext make_context(const Options& o) {
  RunContext ctx;
  ctx.config = load_config(o.config);
  apply_overrides(ctx.config, o.grid, o.rmax);
  ctx.out_dir = o.out.empty() ? fs::path(ctx.config.outputs) : fs::path(o.out);
  fs::create_directories(ctx.out_dir);
  ctx.jobs = resolve_jobs(o.jobs);
  ctx.hash = config_hash(ctx.config);
  return ctx;
}

int selftest(const Options& o) {
  ExperimentConfig c = load_config(o.config);
  apply_overrides(c, o.grid, o.rmax);
  SelftestOptions opt;
  opt.grid = c.grid;
  opt.rmax = c.R_schedule.back();
  opt.solver_tolerance = c.tolerances.hitchin_residual;
  opt.fit_floor = c.tolerances.fit_floor;
  opt.transport_tolerance = c.tolerances.transport;
  opt.seed = c.seed;
  opt.jobs = resolve_jobs(o.jobs);
  const int failures = run_selftest(opt, std::cout);
  std::cout << (failures ? std::to_string(failures) + " check(s) failed" : std::string("all checks passed")) << '\n';
  return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments for the Hitchin self-duality equations"};
  app.require_subcommand(1);
  Options o;
  auto* solve = app.add_subcommand("solve", "solve along the R schedule; checkpoint + report");
  auto* sweep = app.add_subcommand("sweep", "decoupling quantities along the R schedule");
  auto* wkb = app.add_subcommand("wkb", "parallel transport along the configured paths");
  auto* energy = app.add_subcommand("energy", "pullback tensors and energy gap sweep");
  auto* self = app.add_subcommand("selftest", "run the example checks");
  for (auto* s : {solve, sweep, wkb, energy}) add_common(s, o, false);
  add_common(self, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (self->parsed()) return selftest(o);
    const RunContext ctx = make_context(o);
    std::cerr << "config " << ctx.hash << ", " << ctx.jobs << " worker(s), output " << ctx.out_dir.string() << '\n';
    if (solve->parsed()) run_solve(ctx);
    else if (sweep->parsed()) run_sweep(ctx);
    else if (wkb->parsed()) run_wkb(ctx);
    else run_energy(ctx);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NonConvergence& e) {
    std::cerr << "error: " << e.what() << " (R=" << e.report.R << ", residual " << e.report.residual_sup << ")\n";
    if (!o.out.empty()) {
      try {
        CsvWriter w(fs::path(o.out) / "nonconvergence.csv", "solve_report", "unavailable", solve_report_columns());
        write_solve_report(w, e.report);
      } catch (const std::exception&) {
      }
    }
    return 3;
  } catch (const InternalInconsistency& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
