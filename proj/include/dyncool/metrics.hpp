#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "dyncool/errors.hpp"

namespace dyncool {

// Linear interpolation on a strictly increasing grid; clamps outside.
inline double interpolate(std::span<const double> t, std::span<const double> v, double x) {
  if (t.empty() || t.size() != v.size()) throw ConfigError("interpolate: size mismatch");
  if (x <= t.front()) return v.front();
  if (x >= t.back()) return v.back();
  const auto it = std::upper_bound(t.begin(), t.end(), x);
  const auto i = static_cast<std::size_t>(it - t.begin());
  const double w = (x - t[i - 1]) / (t[i] - t[i - 1]);
  return v[i - 1] + w * (v[i] - v[i - 1]);
}

// Trapezoidal mean of v over [t0, t1], interpolating at the window ends.
inline double time_average(std::span<const double> t, std::span<const double> v, double t0,
                           double t1) {
  if (!(t1 > t0)) throw ConfigError("time_average: empty window");
  if (t.size() < 2 || t0 < t.front() - 1e-12 || t1 > t.back() + 1e-12)
    throw ConfigError("time_average: window outside the sampled range");
  double acc = 0.0;
  double prev_t = t0, prev_v = interpolate(t, v, t0);
  auto it = std::upper_bound(t.begin(), t.end(), t0);
  for (auto i = static_cast<std::size_t>(it - t.begin()); i < t.size() && t[i] < t1; ++i) {
    acc += 0.5 * (v[i] + prev_v) * (t[i] - prev_t);
    prev_t = t[i];
    prev_v = v[i];
  }
  acc += 0.5 * (interpolate(t, v, t1) + prev_v) * (t1 - prev_t);
  return acc / (t1 - t0);
}

// First time the series drops below `threshold` and then stays below for at
// least `hold`. The crossing is interpolated between samples. Returns
// nothing if the condition is never met, or if the record ends before the
// hold interval has elapsed.
inline std::optional<double> time_to_reach(std::span<const double> t, std::span<const double> v,
                                           double threshold, double hold) {
  const std::size_t n = t.size();
  std::size_t i = 0;
  while (i < n) {
    if (!(v[i] < threshold)) {
      ++i;
      continue;
    }
    double t_cross = t[i];
    if (i > 0 && v[i - 1] >= threshold)
      t_cross = t[i - 1] + (threshold - v[i - 1]) * (t[i] - t[i - 1]) / (v[i] - v[i - 1]);
    std::size_t j = i;
    while (j < n && v[j] < threshold && t[j] < t_cross + hold) ++j;
    if (j == n) return std::nullopt;
    if (v[j] < threshold) return t_cross;
    i = j;
  }
  return std::nullopt;
}

struct EnvelopeFit {
  double rate = 0.0;       // decay rate of (max - baseline), > 0 for decay
  double intercept = 0.0;  // ln amplitude at t = 0
  std::size_t points = 0;
  std::vector<double> peak_times;
  std::vector<double> peak_values;

  double at(double t) const { return std::exp(intercept - rate * t); }
};

// Envelope of an oscillation with known period: the maximum of v in each
// full window [k T - T/2, k T + T/2) inside [t_min, t_max], refined by a parabola
// through the neighbouring samples. The decay rate is a log-linear least
// squares fit of (peak - baseline) over the peaks exceeding baseline.
inline EnvelopeFit fit_envelope_decay(std::span<const double> t, std::span<const double> v,
                                      double period, double baseline, double t_min,
                                      double t_max) {
  if (!(period > 0.0)) throw ConfigError("envelope fit: period must be > 0");
  EnvelopeFit fit;
  const long k0 = static_cast<long>(std::ceil(t_min / period));
  for (long k = k0;; ++k) {
    const double lo = (static_cast<double>(k) - 0.5) * period;
    const double hi = (static_cast<double>(k) + 0.5) * period;
    if (hi > t_max) break;
    if (lo < t_min) continue;  // clipped windows give spurious edge maxima
    std::size_t best = t.size();
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] >= lo && t[i] < hi && (best == t.size() || v[i] > v[best])) best = i;
    if (best == t.size()) continue;
    double tp = t[best], vp = v[best];
    if (best > 0 && best + 1 < t.size()) {
      const double y0 = v[best - 1], y1 = v[best], y2 = v[best + 1];
      const double den = y0 - 2.0 * y1 + y2;
      const double h = 0.5 * (t[best + 1] - t[best - 1]);
      if (den < 0.0) {
        const double off = 0.5 * (y0 - y2) / den;
        if (std::abs(off) <= 1.0) {
          tp = t[best] + off * h;
          vp = y1 - 0.25 * (y0 - y2) * off;
        }
      }
    }
    fit.peak_times.push_back(tp);
    fit.peak_values.push_back(vp);
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < fit.peak_times.size(); ++i) {
    const double a = fit.peak_values[i] - baseline;
    if (!(a > 0.0)) continue;
    const double x = fit.peak_times[i], y = std::log(a);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) throw NumericalError("envelope fit: fewer than two usable peaks");
  const double md = static_cast<double>(m);
  const double slope = (md * sxy - sx * sy) / (md * sxx - sx * sx);
  fit.rate = -slope;
  fit.intercept = (sy - slope * sx) / md;
  fit.points = m;
  return fit;
}

struct SpectralPeak {
  double omega = 0.0;       // angular frequency of the largest periodogram bin
  double bin_width = 0.0;   // 2 pi / record length
  double power = 0.0;
};

// Periodogram of a uniformly sampled, mean-removed series by direct DFT
// over the bins 1 .. n/2; returns the dominant angular frequency.
inline SpectralPeak dominant_frequency(std::span<const double> v, double dt) {
  const std::size_t n = v.size();
  if (n < 4 || !(dt > 0.0)) throw ConfigError("dominant_frequency: need >= 4 uniform samples");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  SpectralPeak best;
  const double T = static_cast<double>(n) * dt;
  best.bin_width = 2.0 * std::numbers::pi / T;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = v[j] - mean;
      re += x * std::cos(w * static_cast<double>(j));
      im -= x * std::sin(w * static_cast<double>(j));
    }
    const double p = re * re + im * im;
    if (p > best.power) {
      best.power = p;
      best.omega = static_cast<double>(k) * best.bin_width;
    }
  }
  return best;
}

}  // namespace dyncool
