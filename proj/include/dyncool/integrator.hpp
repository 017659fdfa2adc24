#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include "dyncool/errors.hpp"

namespace dyncool {

struct OdeTolerances {
  double rtol = 1e-9;
  double atol = 1e-12;
};

struct OdeStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
};

// Dormand-Prince 5(4) with Hairer's PI step control and the 4th-order
// continuous extension for output between steps. Each call to integrate()
// is a cold start, so callers restart exactly at coefficient discontinuities
// by splitting the interval.
//
// Rhs signature: void(double t, std::span<const double> y, std::span<double> dydt)
// Observer signature: void(double t, std::span<const double> y)
class DormandPrince54 {
 public:
  explicit DormandPrince54(std::size_t n, OdeTolerances tol = {},
                           double h_max = std::numeric_limits<double>::infinity(),
                           std::size_t max_steps = 20'000'000)
      : n_(n), tol_(tol), h_max_(h_max), max_steps_(max_steps),
        k1_(n), k2_(n), k3_(n), k4_(n), k5_(n), k6_(n), k7_(n), ytmp_(n), ynew_(n), yout_(n) {}

  const OdeStats& stats() const { return stats_; }
  std::size_t size() const { return n_; }

  // Advances y from t0 to t1. The observer is called at each entry of
  // `outputs` lying in (t0, t1], in order; entries are assumed sorted.
  template <class Rhs, class Observer>
  void integrate(Rhs&& rhs, double t0, double t1, std::span<double> y,
                 std::span<const double> outputs, Observer&& observer) {
    if (y.size() != n_) throw NumericalError("integrator: state size mismatch");
    if (!(t1 > t0)) return;
    std::size_t next_out = 0;
    while (next_out < outputs.size() && outputs[next_out] <= t0) ++next_out;

    const double span = t1 - t0;
    const double t_eps = 1e-13 * std::max(1.0, std::abs(t1));

    eval(rhs, t0, y, k1_);
    double h = initial_step(rhs, t0, y, span);
    double t = t0;
    double facold = 1e-4;
    bool last_rejected = false;
    std::size_t steps = 0;

    while (t1 - t > t_eps) {
      if (++steps > max_steps_) {
        std::ostringstream os;
        os << "integrator: exceeded " << max_steps_ << " steps at t = " << t;
        throw NumericalError(os.str());
      }
      h = std::min(h, h_max_);
      bool final_step = false;
      if (t + h >= t1 - t_eps) {
        h = t1 - t;
        final_step = true;
      }
      if (h < 1e-14 * std::max(1.0, std::abs(t))) {
        std::ostringstream os;
        os << "integrator: step size underflow at t = " << t;
        throw NumericalError(os.str());
      }

      const double err = attempt(rhs, t, h, y);
      if (!std::isfinite(err)) {
        h *= 0.1;
        ++stats_.rejected;
        last_rejected = true;
        continue;
      }

      constexpr double safe = 0.9, beta = 0.04, expo1 = 0.2 - beta * 0.75;
      const double fac11 = std::pow(std::max(err, 1e-300), expo1);
      if (err <= 1.0) {
        ++stats_.accepted;
        double fac = fac11 / std::pow(facold, beta);
        fac = std::clamp(fac / safe, 0.2, 10.0);  // h_new = h / fac in [h/10, 5h]
        facold = std::max(err, 1e-4);
        double h_new = h / fac;
        if (last_rejected) h_new = std::min(h_new, h);
        last_rejected = false;

        const double t_new = final_step ? t1 : t + h;
        while (next_out < outputs.size() && outputs[next_out] <= t_new + t_eps) {
          const double to = outputs[next_out];
          if (std::abs(to - t_new) <= t_eps) {
            observer(to, std::span<const double>(ynew_));
          } else {
            dense(t, h, y, to);
            observer(to, std::span<const double>(yout_));
          }
          ++next_out;
        }
        std::copy(ynew_.begin(), ynew_.end(), y.begin());
        std::swap(k1_, k7_);  // first-same-as-last
        t = t_new;
        h = h_new;
      } else {
        ++stats_.rejected;
        h /= std::min(5.0, fac11 / safe);
        last_rejected = true;
      }
    }
  }

 private:
  template <class Rhs>
  void eval(Rhs& rhs, double t, std::span<const double> y, std::vector<double>& out) {
    ++stats_.evaluations;
    rhs(t, y, std::span<double>(out));
  }

  double norm(std::span<const double> v, std::span<const double> scale_ref) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double sc = tol_.atol + tol_.rtol * std::abs(scale_ref[i]);
      const double r = v[i] / sc;
      s += r * r;
    }
    return std::sqrt(s / static_cast<double>(std::max<std::size_t>(n_, 1)));
  }

  template <class Rhs>
  double initial_step(Rhs& rhs, double t0, std::span<const double> y0, double span) {
    const double d0 = norm(y0, y0);
    const double d1 = norm(k1_, y0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    for (std::size_t i = 0; i < n_; ++i) ytmp_[i] = y0[i] + h0 * k1_[i];
    eval(rhs, t0 + h0, ytmp_, k2_);
    for (std::size_t i = 0; i < n_; ++i) k3_[i] = k2_[i] - k1_[i];
    const double d2 = norm(k3_, y0) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    return std::min({100.0 * h0, h1, span, h_max_});
  }

  // One trial step of size h; fills ynew_ and k2..k7 and returns the scaled
  // error norm.
  template <class Rhs>
  double attempt(Rhs& rhs, double t, double h, std::span<const double> y) {
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                     a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    for (std::size_t i = 0; i < n_; ++i) ytmp_[i] = y[i] + h * a21 * k1_[i];
    eval(rhs, t + c2 * h, ytmp_, k2_);
    for (std::size_t i = 0; i < n_; ++i) ytmp_[i] = y[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
    eval(rhs, t + c3 * h, ytmp_, k3_);
    for (std::size_t i = 0; i < n_; ++i)
      ytmp_[i] = y[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
    eval(rhs, t + c4 * h, ytmp_, k4_);
    for (std::size_t i = 0; i < n_; ++i)
      ytmp_[i] = y[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
    eval(rhs, t + c5 * h, ytmp_, k5_);
    for (std::size_t i = 0; i < n_; ++i)
      ytmp_[i] = y[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] +
                             a65 * k5_[i]);
    eval(rhs, t + h, ytmp_, k6_);
    for (std::size_t i = 0; i < n_; ++i)
      ynew_[i] = y[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] +
                             a76 * k6_[i]);
    eval(rhs, t + h, ynew_, k7_);

    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double e = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] +
                            e6 * k6_[i] + e7 * k7_[i]);
      const double sc = tol_.atol + tol_.rtol * std::max(std::abs(y[i]), std::abs(ynew_[i]));
      const double r = e / sc;
      s += r * r;
    }
    return std::sqrt(s / static_cast<double>(std::max<std::size_t>(n_, 1)));
  }

  // Continuous extension on the accepted step [t, t+h]; result in yout_.
  void dense(double t, double h, std::span<const double> y, double t_out) {
    constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                     d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                     d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
    const double th = (t_out - t) / h;
    const double th1 = 1.0 - th;
    for (std::size_t i = 0; i < n_; ++i) {
      const double r2 = ynew_[i] - y[i];
      const double r3 = h * k1_[i] - r2;
      const double r4 = r2 - h * k7_[i] - r3;
      const double r5 = h * (d1 * k1_[i] + d3 * k3_[i] + d4 * k4_[i] + d5 * k5_[i] +
                             d6 * k6_[i] + d7 * k7_[i]);
      yout_[i] = y[i] + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
    }
  }

  std::size_t n_;
  OdeTolerances tol_;
  double h_max_;
  std::size_t max_steps_;
  OdeStats stats_;
  std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_, yout_;
};

}  // namespace dyncool
