#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string_view>
#include <vector>

#include "dyncool/errors.hpp"
#include "dyncool/metrics.hpp"
#include "dyncool/moments.hpp"
#include "dyncool/params.hpp"
#include "dyncool/schedule.hpp"

namespace dyncool {

// pi / (2G): end of the first half Rabi cycle in the rotating-wave picture.
inline double half_rabi_time(const SystemParams& p) {
  if (!(p.G > 0.0)) throw ConfigError("pulse timing needs G > 0");
  return std::numbers::pi / (2.0 * p.G);
}

// Pulse at pi/(2G), width 0.01 pi/(2G), area 10, repeated every pi/(2G).
inline PulseSpec default_spec(const SystemParams& p) {
  const double th = half_rabi_time(p);
  PulseSpec s;
  s.t_first = th;
  s.width = 0.01 * th;
  s.area = 10.0;
  s.period = th;
  return s;
}

inline PulseSchedule single_pulse_schedule(const SystemParams& p, const PulseSpec& spec) {
  spec.validate();
  if (spec.onset() < 0.0) throw ConfigError("pulse starts before t = 0");
  PulseSchedule s = PulseSchedule::constant(p.kappa0);
  s.kind = ScheduleKind::single;
  if (spec.area == 0.0) return s;
  s.segments.push_back({spec.onset(), spec.onset() + spec.width, spec.peak(p.kappa0)});
  return s;
}

// Pulse train with centers t_first + n*period. A pulse is kept only if it
// lies entirely inside one of the ON windows (no windows = always ON) and
// ends by t_end. spec.count > 0 caps the number of pulses.
inline PulseSchedule periodic_schedule(const SystemParams& p, const PulseSpec& spec, double t_end,
                                       const std::vector<TimeWindow>& on_windows = {}) {
  spec.validate();
  if (!(spec.period > spec.width)) throw ConfigError("pulse period must exceed the pulse width");
  if (spec.onset() < 0.0) throw ConfigError("pulse starts before t = 0");
  PulseSchedule s = PulseSchedule::constant(p.kappa0);
  s.kind = on_windows.empty() ? ScheduleKind::periodic : ScheduleKind::on_off;
  if (spec.area == 0.0) return s;
  const double peak = spec.peak(p.kappa0);
  for (std::size_t n = 0;; ++n) {
    const double on = spec.onset() + static_cast<double>(n) * spec.period;
    const double off = on + spec.width;
    if (off > t_end) break;
    if (spec.count > 0 && s.segments.size() >= spec.count) break;
    const bool inside = on_windows.empty() ||
                        std::any_of(on_windows.begin(), on_windows.end(),
                                    [&](const TimeWindow& w) { return w.contains(on, off); });
    if (inside) s.segments.push_back({on, off, peak});
  }
  return s;
}

enum class PulseShape { square, raised_cosine, gaussian };

inline PulseShape pulse_shape_from_string(std::string_view s) {
  if (s == "square") return PulseShape::square;
  if (s == "raised-cosine" || s == "raised_cosine") return PulseShape::raised_cosine;
  if (s == "gaussian" || s == "gaussian-truncated") return PulseShape::gaussian;
  throw ConfigError("unknown pulse shape '" + std::string(s) + "'");
}

inline std::string_view to_string(PulseShape s) {
  switch (s) {
    case PulseShape::square: return "square";
    case PulseShape::raised_cosine: return "raised-cosine";
    case PulseShape::gaussian: return "gaussian";
  }
  return "square";
}

inline constexpr double kGaussianSigmaFraction = 0.15;  // sigma / width

// Equal-area staircase of a smooth pulse occupying the same support
// [onset, onset + width] as the square pulse. Each step carries the exact
// integral of the shape over its sub-interval; the total is rescaled to the
// requested area.
inline PulseSchedule smoothed_pulse_schedule(const SystemParams& p, const PulseSpec& spec,
                                             PulseShape shape, std::size_t steps = 40) {
  if (shape == PulseShape::square) return single_pulse_schedule(p, spec);
  spec.validate();
  if (steps < 20) throw ConfigError("smoothed pulses need at least 20 steps");
  if (spec.onset() < 0.0) throw ConfigError("pulse starts before t = 0");
  PulseSchedule s = PulseSchedule::constant(p.kappa0);
  s.kind = ScheduleKind::smoothed;
  if (spec.area == 0.0) return s;

  // Primitive of the unnormalized shape in s = (t - onset)/width in [0, 1].
  auto primitive = [&](double x) {
    if (shape == PulseShape::raised_cosine)
      return x - std::sin(2.0 * std::numbers::pi * x) / (2.0 * std::numbers::pi);
    const double z = (x - 0.5) / (kGaussianSigmaFraction * std::numbers::sqrt2);
    return 0.5 * std::erf(z);
  };
  const double total = primitive(1.0) - primitive(0.0);
  std::vector<double> weights(steps);
  for (std::size_t j = 0; j < steps; ++j) {
    const double a = static_cast<double>(j) / static_cast<double>(steps);
    const double b = static_cast<double>(j + 1) / static_cast<double>(steps);
    weights[j] = (primitive(b) - primitive(a)) / total;
  }
  const double dt = spec.width / static_cast<double>(steps);
  // Shared edges, so neighbouring steps meet exactly.
  auto edge = [&](std::size_t j) {
    return j == steps ? spec.onset() + spec.width : spec.onset() + static_cast<double>(j) * dt;
  };
  double area = 0.0;
  for (std::size_t j = 0; j < steps; ++j) {
    const double t0 = edge(j), t1 = edge(j + 1);
    const double excess = spec.area * weights[j] / (t1 - t0);
    s.segments.push_back({t0, t1, p.kappa0 + excess});
    area += excess * (t1 - t0);
  }
  // Residual rounding correction so the staircase area is exact.
  const double fix = (spec.area - area) / spec.width;
  for (auto& seg : s.segments) seg.kappa += fix;
  return s;
}

namespace detail {
// Evolves `state` for `duration` at constant kappa and returns the end state.
inline MomentState advance(const SystemParams& p, const MomentState& state, double kappa,
                           double duration, const OdeTolerances& tol) {
  if (!(duration > 0.0)) return state;
  EvolveOptions o;
  o.t_end = duration;
  o.sample_dt = duration;
  o.tol = tol;
  const auto tr = evolve(p, PulseSchedule::constant(kappa), state, o);
  return tr.states.back();
}
}  // namespace detail

inline constexpr OdeTolerances kPulseSearchTolerance{1e-10, 1e-12};

// Offset, measured from the moment `state` is given, of the first minimum of
// N_b under constant kappa, searched over [T/2, 3T/2] with T = pi/(omega_+ -
// omega_-) the half Rabi period. The sampled minimum is refined by a parabola.
inline double locate_phonon_minimum(const SystemParams& p, const MomentState& state, double kappa,
                                    const OdeTolerances& tol = kPulseSearchTolerance) {
  const auto modes = normal_mode_freqs(p);
  if (!(modes.splitting() > 0.0)) throw ConfigError("phonon minimum undefined for G = 0");
  const double th = std::numbers::pi / modes.splitting();
  EvolveOptions o;
  o.t_end = 1.5 * th;
  o.sample_dt = th / 1000.0;
  o.tol = tol;
  const auto tr = evolve(p, PulseSchedule::constant(kappa), state, o);
  std::size_t best = tr.size();
  for (std::size_t i = 1; i + 1 < tr.size(); ++i) {
    if (tr.times[i] < 0.5 * th) continue;
    if (best == tr.size() || tr.states[i].N_b < tr.states[best].N_b) best = i;
  }
  if (best == tr.size()) throw NumericalError("phonon minimum search found no samples");
  const double y0 = tr.states[best - 1].N_b, y1 = tr.states[best].N_b,
               y2 = tr.states[best + 1].N_b;
  const double den = y0 - 2.0 * y1 + y2;
  double t = tr.times[best];
  if (den > 0.0) {
    const double off = 0.5 * (y0 - y2) / den;
    if (std::abs(off) <= 1.0) t += off * o.sample_dt;
  }
  return t;
}

// Absolute time of the first N_b minimum from the default initial state.
inline double locate_phonon_minimum(const SystemParams& p) {
  return locate_phonon_minimum(p, MomentState::thermal(p.n_th), p.kappa0);
}

// Pulse whose onset coincides with the first phonon minimum.
inline PulseSpec synchronized_pulse_spec(const SystemParams& p, double width, double area = 10.0) {
  PulseSpec s = default_spec(p);
  s.width = width;
  s.area = area;
  s.t_first = locate_phonon_minimum(p) + 0.5 * width;
  s.validate();
  return s;
}

// Pulse train where every pulse starts at the next N_b minimum after the
// previous pulse (or after the start of an ON window). Built by stepping the
// moment dynamics forward pulse by pulse.
inline PulseSchedule synchronized_periodic_schedule(const SystemParams& p, double width,
                                                    double area, double t_end,
                                                    std::vector<TimeWindow> on_windows = {},
                                                    const OdeTolerances& tol =
                                                        kPulseSearchTolerance) {
  p.validate();
  if (!(width > 0.0)) throw ConfigError("pulse width must be > 0");
  if (!(area >= 0.0)) throw ConfigError("pulse area must be >= 0");
  PulseSchedule s = PulseSchedule::constant(p.kappa0);
  s.kind = on_windows.empty() ? ScheduleKind::periodic : ScheduleKind::on_off;
  if (area == 0.0) return s;
  if (on_windows.empty()) on_windows.push_back({0.0, t_end});
  std::sort(on_windows.begin(), on_windows.end(),
            [](const TimeWindow& a, const TimeWindow& b) { return a.start < b.start; });
  const double peak = p.kappa0 + area / width;

  double t_cur = 0.0;
  MomentState state = MomentState::thermal(p.n_th);
  for (const auto& w : on_windows) {
    const double stop = std::min(w.end, t_end);
    if (w.start >= stop) continue;
    if (t_cur < w.start) {
      state = detail::advance(p, state, p.kappa0, w.start - t_cur, tol);
      t_cur = w.start;
    }
    for (;;) {
      const double off = locate_phonon_minimum(p, state, p.kappa0, tol);
      const double on = t_cur + off;
      if (on + width > stop) break;
      state = detail::advance(p, state, p.kappa0, off, tol);
      state = detail::advance(p, state, peak, width, tol);
      s.segments.push_back({on, on + width, peak});
      t_cur = on + width;
    }
  }
  return s;
}

struct WidthScan {
  std::vector<double> widths;
  std::vector<double> objectives;  // NaN where the run failed
  double best_width = 0.0;
  double best_objective = 0.0;
  double onset = 0.0;
  TimeWindow window;
};

// Scans pulse widths at fixed area and fixed onset (the first phonon
// minimum). Objective: time-averaged N_b over `window`; by default the 60/omega_m
// following the onset.
inline WidthScan optimize_pulse_width(const SystemParams& p, const std::vector<double>& widths,
                                      std::optional<TimeWindow> window = std::nullopt,
                                      double area = 10.0, double sample_dt = 0.01) {
  if (widths.empty()) throw ConfigError("width grid is empty");
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (!(widths[i] > 0.0)) throw ConfigError("pulse widths must be > 0");
    if (i > 0 && !(widths[i] > widths[i - 1])) throw ConfigError("width grid must be ascending");
  }
  WidthScan scan;
  scan.widths = widths;
  scan.onset = locate_phonon_minimum(p);
  scan.window = window.value_or(TimeWindow{scan.onset, scan.onset + 60.0});
  if (scan.window.start < scan.onset)
    throw ConfigError("objective window must start at or after the pulse onset");
  if (!std::isfinite(scan.window.end) || !(scan.window.end > scan.window.start))
    throw ConfigError("objective window must be finite and non-empty");

  scan.best_objective = std::numeric_limits<double>::infinity();
  bool any = false;
  for (double w : widths) {
    double obj = std::numeric_limits<double>::quiet_NaN();
    try {
      PulseSchedule s = PulseSchedule::constant(p.kappa0);
      s.kind = ScheduleKind::single;
      s.segments.push_back({scan.onset, scan.onset + w, p.kappa0 + area / w});
      EvolveOptions o;
      o.t_end = std::max(scan.window.end, scan.onset + w);
      o.sample_dt = sample_dt;
      const auto tr = evolve(p, s, o);
      const auto nb = tr.phonons();
      obj = time_average(tr.times, nb, scan.window.start, scan.window.end);
    } catch (const std::exception&) {
      obj = std::numeric_limits<double>::quiet_NaN();
    }
    scan.objectives.push_back(obj);
    if (std::isfinite(obj) && obj < scan.best_objective) {
      scan.best_objective = obj;
      scan.best_width = w;
      any = true;
    }
  }
  if (!any) throw NumericalError("pulse width scan: every run failed");
  return scan;
}

// Log-spaced width grid between lo and hi (inclusive).
inline std::vector<double> log_width_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo) || n == 0) throw ConfigError("invalid width grid bounds");
  if (n == 1) return {lo};
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  g.back() = hi;
  return g;
}

struct DriveSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  double kappa = 0.0;
  std::complex<double> omega{};
};

// Drive Omega(t) keeping the intracavity amplitude alpha fixed while kappa(t)
// follows the schedule, one constant piece per schedule piece on [0, t_end].
inline std::vector<DriveSegment> co_modulated_drive(const PulseSchedule& schedule,
                                                    std::complex<double> alpha,
                                                    double delta_prime, double t_end) {
  schedule.validate();
  if (!(t_end > 0.0)) throw ConfigError("t_end must be > 0");
  const auto breaks = segment_breakpoints(schedule, t_end);
  std::vector<DriveSegment> out;
  out.reserve(breaks.size());
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double k = schedule.kappa_at(breaks[i]);
    out.push_back({breaks[i], breaks[i + 1], k, drive_for_constant_alpha(alpha, delta_prime, k)});
  }
  return out;
}

}  // namespace dyncool
