#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dyncool/errors.hpp"

namespace dyncool {

enum class ScheduleKind { single, periodic, on_off, custom, smoothed };

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::single: return "single";
    case ScheduleKind::periodic: return "periodic";
    case ScheduleKind::on_off: return "on_off";
    case ScheduleKind::custom: return "custom";
    case ScheduleKind::smoothed: return "smoothed";
  }
  return "custom";
}

inline ScheduleKind schedule_kind_from_string(std::string_view s) {
  if (s == "single") return ScheduleKind::single;
  if (s == "periodic") return ScheduleKind::periodic;
  if (s == "on_off") return ScheduleKind::on_off;
  if (s == "custom") return ScheduleKind::custom;
  if (s == "smoothed") return ScheduleKind::smoothed;
  throw ConfigError("unknown schedule description '" + std::string(s) + "'");
}

// kappa = value on [t_start, t_end).
struct PulseSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  double kappa = 0.0;

  bool operator==(const PulseSegment&) const = default;
};

struct TimeWindow {
  double start = 0.0;
  double end = std::numeric_limits<double>::infinity();

  bool contains(double t0, double t1) const { return t0 >= start && t1 <= end; }
  bool operator==(const TimeWindow&) const = default;
};

// Parameters of a dissipation pulse (train). Pulses are placed by their
// center time; the excess dissipation integrates to `area`.
struct PulseSpec {
  double t_first = 0.0;  // center of the first pulse
  double width = 0.0;
  double area = 10.0;    // integral of (kappa_pulse - kappa0) dt
  double period = 0.0;   // center-to-center spacing for pulse trains
  std::size_t count = 0;  // trains only; 0 = as many as fit

  // Peak kappa of a square pulse, derived rather than stored.
  double peak(double baseline) const { return baseline + area / width; }
  double onset() const { return t_first - 0.5 * width; }

  void validate() const {
    if (!(width > 0.0) || !std::isfinite(width)) throw ConfigError("pulse width must be > 0");
    if (!(area >= 0.0) || !std::isfinite(area)) throw ConfigError("pulse area must be >= 0");
    if (!std::isfinite(t_first)) throw ConfigError("pulse time must be finite");
  }

  bool operator==(const PulseSpec&) const = default;
};

// Piecewise-constant cavity dissipation: kappa(t) = baseline outside the
// override segments. Every protocol (including smooth shapes) is reduced
// to this form so integration restarts exactly at each edge.
struct PulseSchedule {
  double baseline = 0.0;
  std::vector<PulseSegment> segments;
  ScheduleKind kind = ScheduleKind::custom;

  static PulseSchedule constant(double kappa) {
    PulseSchedule s;
    s.baseline = kappa;
    return s;
  }

  // Right-continuous: the value on [t_start, t_end) belongs to the segment.
  double kappa_at(double t) const {
    auto it = std::upper_bound(segments.begin(), segments.end(), t,
                               [](double v, const PulseSegment& s) { return v < s.t_start; });
    if (it == segments.begin()) return baseline;
    --it;
    return t < it->t_end ? it->kappa : baseline;
  }

  // Sorted, de-duplicated breakpoints of kappa(t).
  std::vector<double> edges() const {
    std::vector<double> e;
    e.reserve(2 * segments.size());
    for (const auto& s : segments) {
      e.push_back(s.t_start);
      e.push_back(s.t_end);
    }
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    return e;
  }

  // Integral of kappa(t) - baseline over [t0, t1].
  double excess_area(double t0 = -std::numeric_limits<double>::infinity(),
                     double t1 = std::numeric_limits<double>::infinity()) const {
    double a = 0.0;
    for (const auto& s : segments) {
      const double lo = std::max(s.t_start, t0), hi = std::min(s.t_end, t1);
      if (hi > lo) a += (s.kappa - baseline) * (hi - lo);
    }
    return a;
  }

  double min_kappa() const {
    double m = baseline;
    for (const auto& s : segments) m = std::min(m, s.kappa);
    return m;
  }

  double max_kappa() const {
    double m = baseline;
    for (const auto& s : segments) m = std::max(m, s.kappa);
    return m;
  }

  void validate(double t_run_end = std::numeric_limits<double>::infinity()) const {
    auto fail = [](const std::string& msg) { throw ConfigError("invalid schedule: " + msg); };
    if (!(baseline >= 0.0) || !std::isfinite(baseline)) fail("baseline kappa must be >= 0");
    double prev_end = 0.0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const auto& s = segments[i];
      std::ostringstream where;
      where << "segment " << i << " [" << s.t_start << ", " << s.t_end << ")";
      if (!(s.kappa >= 0.0) || !std::isfinite(s.kappa)) fail(where.str() + " has kappa < 0");
      if (!(s.t_end > s.t_start)) fail(where.str() + " is empty or reversed");
      if (s.t_start < 0.0) fail(where.str() + " starts before t = 0");
      if (s.t_start < prev_end) fail(where.str() + " overlaps its predecessor");
      if (s.t_end > t_run_end) fail(where.str() + " extends past the end of the run");
      prev_end = s.t_end;
    }
  }

  bool operator==(const PulseSchedule&) const = default;
};

}  // namespace dyncool
