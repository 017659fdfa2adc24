#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dyncool/errors.hpp"
#include "dyncool/fock.hpp"
#include "dyncool/io.hpp"
#include "dyncool/limits.hpp"
#include "dyncool/metrics.hpp"
#include "dyncool/moments.hpp"
#include "dyncool/params.hpp"
#include "dyncool/pulses.hpp"
#include "dyncool/schedule.hpp"

namespace dyncool {

inline constexpr const char* kToolVersion = "1.0.0";

// Threshold factor over the numeric steady-state N_b used by the
// time-to-limit metric.
inline constexpr double kLimitThresholdFactor = 1.05;

struct ResolvedSchedule {
  PulseSchedule schedule;
  std::optional<PulseSpec> spec;
};

// Turns a schedule description into the piecewise-constant kappa(t) of the run.
inline ResolvedSchedule resolve_schedule(const SystemParams& p, const ScheduleConfig& c,
                                         double t_end) {
  p.validate();
  ResolvedSchedule r;
  if (c.protocol == "constant") {
    r.schedule = PulseSchedule::constant(p.kappa0);
    return r;
  }
  if (c.protocol == "explicit") {
    if (!c.explicit_schedule) throw ConfigError("explicit schedule missing");
    r.schedule = *c.explicit_schedule;
    r.schedule.validate(t_end);
    return r;
  }
  require_stable(p);
  PulseSpec spec = default_spec(p);
  if (c.width) spec.width = *c.width;
  if (c.period) spec.period = *c.period;
  spec.area = c.area;
  spec.count = c.count;
  if (c.protocol == "synchronized" || c.protocol == "synchronized_periodic") {
    if (c.t_first || c.period)
      throw ConfigError("synchronized protocols place pulses at phonon minima; drop t_first/period");
    if (c.protocol == "synchronized") {
      spec = synchronized_pulse_spec(p, spec.width, spec.area);
      r.schedule = single_pulse_schedule(p, spec);
    } else {
      r.schedule = synchronized_periodic_schedule(p, spec.width, spec.area, t_end, c.windows);
    }
    r.spec = spec;
    r.schedule.validate(t_end);
    return r;
  }
  if (c.t_first) spec.t_first = *c.t_first;
  if (c.protocol == "single") {
    r.schedule = single_pulse_schedule(p, spec);
  } else if (c.protocol == "periodic") {
    r.schedule = periodic_schedule(p, spec, t_end, c.windows);
  } else if (c.protocol == "smoothed") {
    r.schedule = smoothed_pulse_schedule(p, spec, pulse_shape_from_string(c.shape), c.steps);
  } else {
    throw ConfigError("unknown schedule protocol '" + c.protocol + "'");
  }
  r.spec = spec;
  r.schedule.validate(t_end);
  return r;
}

inline EvolveOptions evolve_options(const RunConfig& run) {
  EvolveOptions o;
  o.t_end = run.t_end;
  o.sample_dt = run.sample_dt;
  o.tol = {run.rtol, run.atol};
  return o;
}

// Scalar digest of one trajectory. Every optional field is null for an empty
// run, and individual fields are null when the quantity does not exist (e.g.
// the limit is never reached).
struct RunSummary {
  std::size_t samples = 0;
  std::optional<double> n_std;             // closed-form steady limit
  std::optional<double> steady_state_N_b;  // numeric, at kappa0
  std::optional<double> min_N_b;
  std::optional<double> t_min_N_b;
  std::optional<double> final_N_b;
  std::optional<double> time_below_n_std;  // below n_std for one Rabi period
  std::optional<double> time_to_limit;     // below 1.05 x numeric steady state
  std::optional<double> mean_rate_to_limit;  // ln(N_b(0)/N_b(t)) / t at time_to_limit
  std::optional<double> gamma_eff_min;
  std::optional<double> gamma_eff_max;
};

inline RunSummary summarize(const Trajectory& tr) {
  RunSummary s;
  s.samples = tr.size();
  if (tr.empty()) return s;
  const auto& p = tr.params;
  if (p.G > 0.0) s.n_std = steady_limit(p).value;
  try {
    s.steady_state_N_b = steady_state(p, p.kappa0).N_b;
  } catch (const NumericalError&) {
  }
  const auto nb = tr.phonons();
  std::size_t imin = 0;
  for (std::size_t i = 1; i < nb.size(); ++i)
    if (nb[i] < nb[imin]) imin = i;
  s.min_N_b = nb[imin];
  s.t_min_N_b = tr.times[imin];
  s.final_N_b = nb.back();
  if (p.G > 0.0) {
    const double hold = rabi_period(p);
    s.time_below_n_std = time_to_reach(tr.times, nb, *s.n_std, hold);
    if (s.steady_state_N_b) {
      s.time_to_limit = time_to_reach(tr.times, nb, kLimitThresholdFactor * *s.steady_state_N_b, hold);
      if (s.time_to_limit && *s.time_to_limit > 0.0) {
        const double n_at = interpolate(tr.times, nb, *s.time_to_limit);
        s.mean_rate_to_limit = std::log(nb.front() / n_at) / *s.time_to_limit;
      }
    }
  }
  if (tr.size() >= 3 && std::all_of(nb.begin(), nb.end(), [](double v) { return v > 0.0; })) {
    const auto g = effective_cooling_rate(tr);
    s.gamma_eff_min = *std::min_element(g.begin(), g.end());
    s.gamma_eff_max = *std::max_element(g.begin(), g.end());
  }
  return s;
}

inline json to_json(const RunSummary& s) {
  return json{{"samples", s.samples},
              {"n_std", finite_or_null(s.n_std)},
              {"steady_state_N_b", finite_or_null(s.steady_state_N_b)},
              {"min_N_b", finite_or_null(s.min_N_b)},
              {"t_min_N_b", finite_or_null(s.t_min_N_b)},
              {"final_N_b", finite_or_null(s.final_N_b)},
              {"time_below_n_std", finite_or_null(s.time_below_n_std)},
              {"time_to_limit", finite_or_null(s.time_to_limit)},
              {"mean_rate_to_limit", finite_or_null(s.mean_rate_to_limit)},
              {"gamma_eff_min", finite_or_null(s.gamma_eff_min)},
              {"gamma_eff_max", finite_or_null(s.gamma_eff_max)}};
}

inline std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream os;
  write_trajectory_csv(os, tr);
  return os.str();
}

inline json limits_to_json(const CoolingLimits& c) {
  return json{{"n_std", c.n_std},
              {"n_std_weak", c.n_std_weak},
              {"n_std_strong", c.n_std_strong},
              {"n_ins", c.n_ins},
              {"n_ins_opt", c.n_ins_opt},
              {"classical", c.decomposition.classical},
              {"dissipation_backaction", c.decomposition.dissipation_backaction},
              {"interaction_backaction", c.decomposition.interaction_backaction},
              {"n_ins_thermal", c.ins_terms.thermal},
              {"n_ins_quantum", c.ins_terms.quantum},
              {"reduction_factor", c.reduction_factor},
              {"on_matching", c.on_matching}};
}

// Shortest %g rendering, for file names and JSON keys.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// ---- presets -------------------------------------------------------------

inline SystemParams fig2_params(double G) {
  SystemParams p;
  p.n_th = 1e3;
  p.gamma = 1e-5;
  p.kappa0 = 0.05;
  p.G = G;
  return p;
}

inline SystemParams fig3_params(double kappa0) {
  SystemParams p;
  p.n_th = 1e3;
  p.gamma = 1e-5;
  p.kappa0 = kappa0;
  p.G = 0.1;
  return p;
}

inline SystemParams fig4_params() {
  SystemParams p;
  p.n_th = 300;
  p.gamma = 1e-5;
  p.kappa0 = 0.003;
  p.G = 0.3;
  return p;
}

inline SystemParams fig5_params(double G, double n_th) {
  SystemParams p;
  p.n_th = n_th;
  p.gamma = 1e-5;
  p.kappa0 = 0.003;
  p.G = G;
  return p;
}

// fig3 preset protocol: pulses ON on [0, 800), OFF until 2800, ON again to 3200.
inline constexpr double kFig3OffStart = 800.0;
inline constexpr double kFig3OffEnd = 2800.0;
inline constexpr double kFig3End = 3200.0;
// fig4 preset pulse widths in units of pi/(2G).
inline constexpr double kFig4ShortWidth = 0.01;
inline constexpr double kFig4LongWidth = 0.1;

inline ScheduleConfig synchronized_single(double width) {
  ScheduleConfig c;
  c.protocol = "synchronized";
  c.width = width;
  return c;
}

inline ExperimentConfig make_config(const SystemParams& p, ScheduleConfig s, double t_end,
                                    double sample_dt) {
  ExperimentConfig c;
  c.params = p;
  c.schedule = std::move(s);
  c.run.t_end = t_end;
  c.run.sample_dt = sample_dt;
  return c;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fig2a", "fig2b", "fig2d", "fig3", "fig4", "fig5"};
  return names;
}

// Named single-run configurations. Each is the representative curve of its
// figure; the full multi-curve datasets come from figure_curves().
inline ExperimentConfig preset_config(const std::string& name) {
  if (name == "fig2a") return make_config(fig2_params(0.1), {}, 200.0, 0.05);
  if (name == "fig2b") return make_config(fig2_params(0.01), {}, 3000.0, 0.5);
  if (name == "fig2d") {
    const auto p = fig2_params(0.2);
    return make_config(p, synchronized_single(0.01 * half_rabi_time(p)), 600.0, 0.01);
  }
  if (name == "fig3") {
    ScheduleConfig s;
    s.protocol = "synchronized_periodic";
    s.width = 0.01 * half_rabi_time(fig3_params(0.01));
    s.windows = {{0.0, kFig3OffStart}, {kFig3OffEnd, kFig3End}};
    return make_config(fig3_params(0.01), s, kFig3End, 0.1);
  }
  if (name == "fig4") {
    const auto p = fig4_params();
    return make_config(p, synchronized_single(kFig4ShortWidth * half_rabi_time(p)), 200.0, 0.01);
  }
  if (name == "fig5") return make_config(fig5_params(0.3, 1e3), {}, 0.0, 0.1);
  throw ConfigError("unknown preset '" + name + "' (known: fig2a, fig2b, fig2d, fig3, fig4, fig5)");
}

// Builds a config from an optional preset and config file, then applies the
// dotted overrides on the JSON form before validation.
inline ExperimentConfig build_config(const std::optional<std::string>& preset,
                                     const std::optional<std::filesystem::path>& file,
                                     const std::vector<std::string>& overrides) {
  json doc = preset ? to_json(preset_config(*preset)) : to_json(ExperimentConfig{});
  if (file) {
    const json loaded = load_json_file(*file);
    if (!loaded.is_object()) throw ConfigError("config file must hold a JSON object");
    doc.merge_patch(loaded);
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

// ---- runs ----------------------------------------------------------------

struct RunResult {
  ExperimentConfig config;
  PulseSchedule schedule;
  Trajectory trajectory;
  RunSummary summary;
};

inline RunResult run_experiment(const ExperimentConfig& c) {
  RunResult r;
  r.config = c;
  c.params.validate();
  require_stable(c.params);
  const auto rs = resolve_schedule(c.params, c.schedule, c.run.t_end);
  r.schedule = rs.schedule;
  r.trajectory = evolve(c.params, rs.schedule, evolve_options(c.run));
  r.summary = summarize(r.trajectory);
  return r;
}

// One emitted dataset file with the configuration that produced it.
struct CurveRecord {
  std::string name;
  std::string file;
  json config;
  json summary;
};

struct FigureOutput {
  int figure = 0;
  std::vector<CurveRecord> curves;
  json extra;  // reference lines and figure-specific numbers
};

inline json manifest_json(const FigureOutput& f, const json& definition) {
  json curves = json::array();
  for (const auto& c : f.curves) {
    json e{{"name", c.name}, {"file", c.file}};
    if (!c.config.is_null()) {
      e["config"] = c.config;
      e["config_hash"] = config_hash(c.config);
    }
    if (!c.summary.is_null()) e["summary"] = c.summary;
    curves.push_back(e);
  }
  return json{{"figure", f.figure},
              {"tool_version", kToolVersion},
              {"config_hash", config_hash(definition)},
              {"definition", definition},
              {"curves", curves},
              {"reference", f.extra}};
}

// Standalone matplotlib script that reads only the CSVs listed in the manifest.
inline std::string plot_script(const FigureOutput& f) {
  std::ostringstream py;
  py << "#!/usr/bin/env python3\n"
     << "# Plots the datasets of figure " << f.figure << " from this directory.\n"
     << "import csv, os\n"
     << "import matplotlib\n"
     << "matplotlib.use('Agg')\n"
     << "import matplotlib.pyplot as plt\n\n"
     << "here = os.path.dirname(os.path.abspath(__file__))\n\n"
     << "def load(name):\n"
     << "    with open(os.path.join(here, name)) as fh:\n"
     << "        rows = list(csv.DictReader(fh))\n"
     << "    return {k: [float(r[k]) for r in rows] for k in (rows[0].keys() if rows else [])}\n\n"
     << "fig, ax = plt.subplots()\n";
  for (const auto& c : f.curves) {
    py << "d = load('" << c.file << "')\n";
    if (f.figure == 5) {
      py << "for col in ('n_std', 'n_ins', 'n_ins_opt'):\n"
         << "    ax.plot(d['G'], d[col], label='" << c.name << " ' + col)\n";
    } else if (c.file.find("kappa") != std::string::npos) {
      continue;
    } else if (c.file.find("gamma_eff") != std::string::npos) {
      continue;
    } else {
      py << "ax.plot(d['t'], d['N_b'], label='" << c.name << "')\n";
    }
  }
  py << "ax.set_yscale('log')\n"
     << "ax.set_xlabel('" << (f.figure == 5 ? "G / omega_m" : "t (1/omega_m)") << "')\n"
     << "ax.set_ylabel('" << (f.figure == 5 ? "cooling limit" : "N_b") << "')\n"
     << "ax.legend(fontsize='small')\n"
     << "fig.savefig(os.path.join(here, 'fig" << f.figure << ".png'), dpi=150)\n";
  return py.str();
}

inline void write_figure(const std::filesystem::path& dir, const FigureOutput& f,
                         const json& definition, bool with_plot) {
  write_file_atomic(dir / ("fig" + std::to_string(f.figure) + "_manifest.json"),
                    manifest_json(f, definition).dump(2) + "\n");
  if (with_plot)
    write_file_atomic(dir / ("plot_fig" + std::to_string(f.figure) + ".py"), plot_script(f));
}

inline std::string kappa_csv(const PulseSchedule& s, double t_end) {
  std::ostringstream os;
  os << "t,kappa\n";
  char buf[96];
  const auto b = segment_breakpoints(s, t_end);
  for (std::size_t i = 0; i + 1 < b.size(); ++i) {
    const double k = s.kappa_at(b[i]);
    std::snprintf(buf, sizeof buf, "%.12g,%.12g\n%.12g,%.12g\n", b[i], k, b[i + 1], k);
    os << buf;
  }
  return os.str();
}

inline std::string gamma_eff_csv(const Trajectory& tr, std::size_t window) {
  std::ostringstream os;
  os << "t,gamma_eff\n";
  const auto g = effective_cooling_rate(tr, window);
  char buf[64];
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", tr.times[i], g[i]);
    os << buf;
  }
  return os.str();
}

// Runs one curve, writes its CSV and returns the record.
inline CurveRecord emit_curve(const std::filesystem::path& dir, const std::string& name,
                              const ExperimentConfig& c, RunResult* keep = nullptr) {
  auto r = run_experiment(c);
  const std::string file = name + ".csv";
  write_file_atomic(dir / file, trajectory_csv(r.trajectory));
  CurveRecord rec{name, file, to_json(c), to_json(r.summary)};
  rec.summary["schedule"] = to_json(r.schedule, std::nullopt);
  if (keep) *keep = std::move(r);
  return rec;
}

// Applies overrides to every curve config of a figure.
inline ExperimentConfig with_overrides(const ExperimentConfig& c,
                                       const std::vector<std::string>& overrides) {
  if (overrides.empty()) return c;
  json doc = to_json(c);
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

inline FigureOutput figure2(const std::filesystem::path& dir,
                            const std::vector<std::string>& overrides) {
  FigureOutput f;
  f.figure = 2;
  for (double G : {0.005, 0.01, 0.02, 0.1}) {
    std::ostringstream name;
    name << "fig2a_G" << G;
    f.curves.push_back(
        emit_curve(dir, name.str(), with_overrides(make_config(fig2_params(G), {}, 200.0, 0.05), overrides)));
  }
  for (double G : {0.005, 0.01}) {
    std::ostringstream name;
    name << "fig2b_G" << G;
    f.curves.push_back(emit_curve(
        dir, name.str(), with_overrides(make_config(fig2_params(G), {}, 3000.0, 0.5), overrides)));
  }
  const auto pulsed = with_overrides(preset_config("fig2d"), overrides);
  RunResult pr;
  f.curves.push_back(emit_curve(dir, "fig2d_modulated", pulsed, &pr));
  auto plain = pulsed;
  plain.schedule = ScheduleConfig{};
  f.curves.push_back(emit_curve(dir, "fig2d_unmodulated", plain));
  write_file_atomic(dir / "fig2c_kappa.csv", kappa_csv(pr.schedule, pulsed.run.t_end));
  f.curves.push_back({"fig2c_kappa", "fig2c_kappa.csv", json(), json()});
  json lines = json::object();
  for (double G : {0.005, 0.01, 0.02, 0.1, 0.2})
    lines["G_" + format_number(G)] = steady_limit(fig2_params(G)).value;
  f.extra = json{{"n_std", lines}};
  return f;
}

inline FigureOutput figure3(const std::filesystem::path& dir,
                            const std::vector<std::string>& overrides) {
  FigureOutput f;
  f.figure = 3;
  json lines = json::object();
  for (double k0 : {0.01, 0.02}) {
    auto c = preset_config("fig3");
    c.params.kappa0 = k0;
    c = with_overrides(c, overrides);
    std::ostringstream name;
    name << "fig3_kappa0_" << k0;
    RunResult r;
    f.curves.push_back(emit_curve(dir, name.str(), c, &r));
    write_file_atomic(dir / (name.str() + "_kappa.csv"), kappa_csv(r.schedule, c.run.t_end));
    f.curves.push_back({name.str() + "_kappa", name.str() + "_kappa.csv", json(), json()});
    lines["n_std_kappa0_" + format_number(k0)] = steady_limit(c.params).value;
    lines["n_ins"] = instantaneous_limit(c.params).value();
  }
  f.extra = lines;
  return f;
}

inline FigureOutput figure4(const std::filesystem::path& dir,
                            const std::vector<std::string>& overrides) {
  FigureOutput f;
  f.figure = 4;
  const auto base = preset_config("fig4");
  const double th = half_rabi_time(base.params);
  for (auto [label, w] : {std::pair{"short", kFig4ShortWidth}, std::pair{"long", kFig4LongWidth}}) {
    auto c = base;
    c.schedule.width = w * th;
    c = with_overrides(c, overrides);
    RunResult r;
    const std::string name = std::string("fig4_") + label;
    f.curves.push_back(emit_curve(dir, name, c, &r));
    write_file_atomic(dir / (name + "_kappa.csv"), kappa_csv(r.schedule, c.run.t_end));
    f.curves.push_back({name + "_kappa", name + "_kappa.csv", json(), json()});
    write_file_atomic(dir / (name + "_gamma_eff.csv"), gamma_eff_csv(r.trajectory, 1));
    f.curves.push_back({name + "_gamma_eff", name + "_gamma_eff.csv", json(), json()});
  }
  const auto lim = all_limits(base.params);
  f.extra = json{{"n_std", lim.n_std}, {"n_ins", lim.n_ins}, {"n_ins_opt", lim.n_ins_opt}};
  return f;
}

inline std::vector<double> fig5_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 90; ++i) g.push_back(0.005 * i);  // 0.005 .. 0.45
  return g;
}

inline std::string limits_table_csv(const std::vector<double>& grid, double n_th, double kappa0,
                                    double gamma) {
  std::ostringstream os;
  os << "G,n_std,n_ins,n_ins_opt,classical,dissipation_backaction,interaction_backaction\n";
  char buf[256];
  for (double G : grid) {
    SystemParams p;
    p.G = G;
    p.n_th = n_th;
    p.kappa0 = kappa0;
    p.gamma = gamma;
    const auto c = all_limits(p);
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", G, c.n_std,
                  c.n_ins, c.n_ins_opt, c.decomposition.classical,
                  c.decomposition.dissipation_backaction, c.decomposition.interaction_backaction);
    os << buf;
  }
  return os.str();
}

inline FigureOutput figure5(const std::filesystem::path& dir,
                            const std::vector<std::string>& overrides) {
  FigureOutput f;
  f.figure = 5;
  for (double n_th : {1e3, 300.0}) {
    auto c = with_overrides(make_config(fig5_params(0.3, n_th), {}, 0.0, 0.1), overrides);
    std::ostringstream name;
    name << "fig5_nth" << c.params.n_th;
    write_file_atomic(dir / (name.str() + ".csv"),
                      limits_table_csv(fig5_grid(), c.params.n_th, c.params.kappa0, c.params.gamma));
    f.curves.push_back({name.str(), name.str() + ".csv", to_json(c.params), json()});
  }
  const auto l = all_limits(fig5_params(0.3, 1e3));
  f.extra = json{{"G", 0.3}, {"n_std", l.n_std}, {"n_ins", l.n_ins}, {"n_ins_opt", l.n_ins_opt}};
  return f;
}

// Regenerates the datasets of figure n into dir.
inline FigureOutput run_figure(int n, const std::filesystem::path& dir,
                               const std::vector<std::string>& overrides, bool with_plot = true) {
  FigureOutput f;
  switch (n) {
    case 2: f = figure2(dir, overrides); break;
    case 3: f = figure3(dir, overrides); break;
    case 4: f = figure4(dir, overrides); break;
    case 5: f = figure5(dir, overrides); break;
    default: throw ConfigError("unknown figure " + std::to_string(n) + " (expected 2, 3, 4 or 5)");
  }
  json definition{{"figure", n}, {"overrides", overrides}};
  write_figure(dir, f, definition, with_plot);
  return f;
}

// ---- oracle cross-check --------------------------------------------------

inline constexpr double kOracleTolerance = 1e-4;
inline constexpr double kDoublingTolerance = 1e-5;

struct OracleCheckOptions {
  double t_end = 50.0;
  double sample_dt = 0.5;
  bool doubled = false;          // also run with both cutoffs doubled
  std::optional<FockDims> dims;  // default: default_dims(n_th, G)
  bool check_positivity = true;
};

struct OracleCheckResult {
  FockDims dims;
  std::optional<FockDims> doubled_dims;
  double max_abs_diff = 0.0;  // max_t |N_b moments - N_b oracle|
  double t_at_max = 0.0;
  std::optional<double> doubling_diff;  // max_t |N_b(dims) - N_b(2 dims)|
  std::size_t samples = 0;
  bool passed = false;
};

// Evolves the moments and the truncated density matrix on the same grid and
// compares N_b. Passing needs max |diff| < 1e-4 and, when requested, cutoff
// doubling stability < 1e-5. The moment right-hand side is injectable so the
// harness itself can be tested.
inline OracleCheckResult oracle_check(const SystemParams& p, const PulseSchedule& schedule,
                                      const OracleCheckOptions& opt = {},
                                      const MomentRhsFn& rhs_fn = moment_rhs) {
  p.validate();
  require_stable(p);
  if (p.n_th > 2.0 || p.G > 0.3 + 1e-12)
    throw PhysicsError("oracle check is limited to n_th <= 2 and G/omega_m <= 0.3");
  OracleCheckResult r;
  r.dims = opt.dims.value_or(default_dims(p.n_th, p.G));

  EvolveOptions eo;
  eo.t_end = opt.t_end;
  eo.sample_dt = opt.sample_dt;
  eo.check_physicality = false;  // a broken right-hand side must still produce a report
  const auto mom = evolve(p, schedule, MomentState::thermal(p.n_th), eo, rhs_fn);

  FockEvolveOptions fo;
  fo.t_end = opt.t_end;
  fo.sample_dt = opt.sample_dt;
  fo.check_positivity = opt.check_positivity;
  const auto fock = evolve_density(p, schedule, thermal_vacuum_state(p.n_th, r.dims), fo);
  if (fock.samples.size() != mom.size())
    throw NumericalError("oracle and moment sample grids differ");
  r.samples = mom.size();
  for (std::size_t i = 0; i < mom.size(); ++i) {
    const double d = std::abs(mom.states[i].N_b - fock.samples[i].moments.N_b);
    if (!(d <= r.max_abs_diff)) {
      r.max_abs_diff = d;
      r.t_at_max = mom.times[i];
    }
  }
  bool ok = r.max_abs_diff < kOracleTolerance;
  if (opt.doubled) {
    r.doubled_dims = r.dims.doubled();
    fo.check_positivity = false;
    const auto fine = evolve_density(p, schedule, thermal_vacuum_state(p.n_th, *r.doubled_dims), fo);
    double d = 0.0;
    for (std::size_t i = 0; i < fine.samples.size(); ++i)
      d = std::max(d, std::abs(fine.samples[i].moments.N_b - fock.samples[i].moments.N_b));
    r.doubling_diff = d;
    ok = ok && d < kDoublingTolerance;
  }
  r.passed = ok;
  return r;
}

inline json to_json(const OracleCheckResult& r) {
  auto dims = [](const FockDims& d) {
    return json{{"na", d.na}, {"nb", d.nb}, {"cap", d.cap}};
  };
  return json{{"dims", dims(r.dims)},
              {"doubled_dims", r.doubled_dims ? dims(*r.doubled_dims) : json(nullptr)},
              {"samples", r.samples},
              {"max_abs_diff_N_b", r.max_abs_diff},
              {"t_at_max", r.t_at_max},
              {"doubling_diff_N_b", finite_or_null(r.doubling_diff)},
              {"tolerance", kOracleTolerance},
              {"doubling_tolerance", kDoublingTolerance},
              {"passed", r.passed}};
}

}  // namespace dyncool
