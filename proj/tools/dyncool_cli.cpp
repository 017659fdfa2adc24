// dyncool: command-line front end for the dynamic dissipative cooling
// simulator. Exit codes: 0 success, 1 failed check, 2 config error,
// 3 physics error (instability, unsafe cutoff), 4 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dyncool/dyncool.hpp"

namespace fs = std::filesystem;
using namespace dyncool;

namespace {

struct Common {
  std::string config_path;
  std::string preset;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  bool seedless = true;
};

ExperimentConfig load(const Common& c, const std::optional<std::string>& default_preset = {}) {
  std::optional<std::string> preset = default_preset;
  if (!c.preset.empty()) preset = c.preset;
  std::optional<fs::path> file;
  if (!c.config_path.empty()) file = c.config_path;
  return build_config(preset, file, c.overrides);
}

void print_limits(const SystemParams& p, const CoolingLimits& l) {
  std::printf("G = %g, kappa0 = %g, gamma = %g, n_th = %g\n", p.G, p.kappa0, p.gamma, p.n_th);
  std::printf("  n_std       %.6g  (classical %.6g, dissipation %.6g, interaction %.6g)\n",
              l.n_std, l.decomposition.classical, l.decomposition.dissipation_backaction,
              l.decomposition.interaction_backaction);
  std::printf("  n_std weak  %.6g\n  n_std str   %.6g\n", l.n_std_weak, l.n_std_strong);
  std::printf("  n_ins       %.6g  (thermal %.6g, quantum %.6g)\n", l.n_ins, l.ins_terms.thermal,
              l.ins_terms.quantum);
  std::printf("  n_ins_opt   %.6g  (reduction factor %.6g%s)\n", l.n_ins_opt, l.reduction_factor,
              l.on_matching ? ", matched coupling" : "");
  if (!l.on_matching)
    std::fprintf(stderr, "warning: G = %g is not a matched coupling; n_ins_opt is indicative\n",
                 p.G);
  if (!p.resolved_sideband())
    std::fprintf(stderr, "warning: kappa0 >= omega_m (outside the resolved-sideband regime)\n");
}

int cmd_limits(const Common& c, const std::string& sweep) {
  const auto cfg = load(c, "fig5");
  const auto l = all_limits(cfg.params);
  print_limits(cfg.params, l);
  const fs::path dir(c.out_dir);
  json j{{"params", to_json(cfg.params)}, {"limits", limits_to_json(l)}};
  write_file_atomic(dir / "limits.json", j.dump(2) + "\n");
  if (!sweep.empty()) {
    double lo = 0, hi = 0;
    int n = 0;
    if (std::sscanf(sweep.c_str(), "%lf:%lf:%d", &lo, &hi, &n) != 3 || n < 2 || !(hi > lo))
      throw ConfigError("--sweep-G expects lo:hi:n with n >= 2 and hi > lo");
    std::vector<double> grid;
    for (int i = 0; i < n; ++i) grid.push_back(lo + (hi - lo) * i / (n - 1));
    for (double G : grid) {
      auto p = cfg.params;
      p.G = G;
      require_stable(p);
    }
    write_file_atomic(dir / "limits_sweep.csv",
                      limits_table_csv(grid, cfg.params.n_th, cfg.params.kappa0, cfg.params.gamma));
  }
  return 0;
}

int cmd_evolve(const Common& c) {
  const auto cfg = load(c);
  const auto r = run_experiment(cfg);
  const fs::path dir(c.out_dir);
  write_file_atomic(dir / cfg.outputs.csv, trajectory_csv(r.trajectory));
  json summary{{"tool_version", kToolVersion},
               {"config_hash", config_hash(to_json(cfg))},
               {"config", to_json(cfg)},
               {"schedule", to_json(r.schedule)},
               {"summary", to_json(r.summary)}};
  write_file_atomic(dir / cfg.outputs.summary, summary.dump(2) + "\n");
  if (cfg.outputs.plot_script) {
    FigureOutput f;
    f.curves.push_back({"N_b", cfg.outputs.csv, json(), json()});
    std::string py = plot_script(f);
    // Single-run script: same layout, its own image name.
    const std::string from = "fig0.png", to = "trajectory.png";
    if (auto pos = py.find(from); pos != std::string::npos) py.replace(pos, from.size(), to);
    write_file_atomic(dir / "plot_trajectory.py", py);
  }
  std::cout << to_json(r.summary).dump(2) << "\n";
  return 0;
}

int cmd_fig(const Common& c, int n) {
  if (!c.config_path.empty() || !c.preset.empty())
    throw ConfigError("fig commands take --override only; --config/--preset apply to evolve");
  const auto f = run_figure(n, fs::path(c.out_dir), c.overrides, true);
  std::printf("figure %d: %zu datasets written to %s\n", n, f.curves.size(), c.out_dir.c_str());
  return 0;
}

int cmd_optimize(const Common& c, double lo, double hi, std::size_t n, double area,
                 std::optional<double> w0, std::optional<double> w1) {
  const auto cfg = load(c, "fig4");
  const double th = half_rabi_time(cfg.params);
  const auto grid = log_width_grid(lo * th, hi * th, n);
  std::optional<TimeWindow> window;
  if (w0 || w1) {
    if (!(w0 && w1)) throw ConfigError("--window-start and --window-end go together");
    window = TimeWindow{*w0, *w1};
  }
  const auto scan = optimize_pulse_width(cfg.params, grid, window, area);
  std::string csv = "width,width_over_half_rabi,objective\n";
  char buf[128];
  for (std::size_t i = 0; i < scan.widths.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\n", scan.widths[i], scan.widths[i] / th,
                  scan.objectives[i]);
    csv += buf;
  }
  const fs::path dir(c.out_dir);
  write_file_atomic(dir / "width_scan.csv", csv);
  json j{{"params", to_json(cfg.params)},
         {"onset", scan.onset},
         {"window", {scan.window.start, scan.window.end}},
         {"area", area},
         {"best_width", scan.best_width},
         {"best_width_over_half_rabi", scan.best_width / th},
         {"best_objective", scan.best_objective}};
  write_file_atomic(dir / "width_scan.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_oracle(const Common& c, double t_end, double dt, bool doubled, std::size_t cap) {
  ExperimentConfig cfg = load(c);
  const auto rs = resolve_schedule(cfg.params, cfg.schedule, t_end);
  OracleCheckOptions o;
  o.t_end = t_end;
  o.sample_dt = dt;
  o.doubled = doubled;
  if (cap > 0) o.dims = FockDims::capped(cap);
  const auto r = oracle_check(cfg.params, rs.schedule, o);
  json j = to_json(r);
  j["params"] = to_json(cfg.params);
  j["schedule"] = to_json(rs.schedule);
  write_file_atomic(fs::path(c.out_dir) / "oracle_check.json", j.dump(2) + "\n");
  std::printf("max |N_b moments - N_b oracle| = %.3e (tolerance %.0e)", r.max_abs_diff,
              kOracleTolerance);
  if (r.doubling_diff) std::printf(", cutoff doubling %.3e (tolerance %.0e)", *r.doubling_diff,
                                   kDoublingTolerance);
  std::printf(": %s\n", r.passed ? "pass" : "FAIL");
  return r.passed ? 0 : 1;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON experiment config");
  sub->add_option("--preset", c.preset, "named preset: fig2a fig2b fig2d fig3 fig4 fig5");
  sub->add_option("--out", c.out_dir, "output directory");
  sub->add_option("--override", c.overrides, "key=value, dotted keys (repeatable)")
      ->allow_extra_args(false);
  sub->add_flag("--seedless", c.seedless, "deterministic mode (always on)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dyncool: dynamic dissipative cooling in strong-coupling optomechanics"};
  app.require_subcommand(1);
  Common common;

  auto* limits = app.add_subcommand("limits", "closed-form cooling limits");
  add_common(limits, common);
  std::string sweep;
  limits->add_option("--sweep-G", sweep, "also tabulate lo:hi:n over G");

  auto* evolve_cmd = app.add_subcommand("evolve", "integrate the moment dynamics");
  add_common(evolve_cmd, common);

  std::vector<std::pair<int, CLI::App*>> figs;
  for (int n : {2, 3, 4, 5}) {
    auto* f = app.add_subcommand("fig" + std::to_string(n), "regenerate figure datasets");
    add_common(f, common);
    figs.emplace_back(n, f);
  }

  auto* opt = app.add_subcommand("optimize-pulse", "scan pulse width at fixed area");
  add_common(opt, common);
  double lo = 0.01, hi = 1.0, area = 10.0;
  std::size_t npts = 15;
  std::optional<double> w0, w1;
  opt->add_option("--min-width", lo, "smallest width, units of pi/(2G)");
  opt->add_option("--max-width", hi, "largest width, units of pi/(2G)");
  opt->add_option("--points", npts, "log-spaced grid size");
  opt->add_option("--area", area, "pulse area");
  opt->add_option("--window-start", w0, "objective window start");
  opt->add_option("--window-end", w1, "objective window end");

  auto* oracle = app.add_subcommand("oracle-check", "compare moments against the Fock oracle");
  add_common(oracle, common);
  double t_end = 50.0, dt = 0.5;
  bool doubled = false;
  std::size_t cap = 0;
  oracle->add_option("--t-end", t_end, "comparison horizon");
  oracle->add_option("--sample-dt", dt, "comparison grid spacing");
  oracle->add_flag("--doubled", doubled, "also check cutoff-doubling stability");
  oracle->add_option("--cutoff", cap, "total-excitation cap (default: automatic)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (limits->parsed()) return cmd_limits(common, sweep);
    if (evolve_cmd->parsed()) return cmd_evolve(common);
    for (auto [n, f] : figs)
      if (f->parsed()) return cmd_fig(common, n);
    if (opt->parsed()) return cmd_optimize(common, lo, hi, npts, area, w0, w1);
    if (oracle->parsed()) return cmd_oracle(common, t_end, dt, doubled, cap);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const PhysicsError& e) {
    std::fprintf(stderr, "physics error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 4;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "output error: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 2;
}
