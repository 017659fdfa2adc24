#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dyncool/errors.hpp"
#include "dyncool/integrator.hpp"
#include "dyncool/params.hpp"
#include "dyncool/schedule.hpp"

namespace dyncool {

using cplx = std::complex<double>;

// Second moments of the Gaussian fluctuation state. First moments <a1>, <b1>
// vanish for the thermal-mechanics / vacuum-cavity initial condition and are
// not part of the state.
struct MomentState {
  double N_a = 0.0;  // <a1^dag a1>
  double N_b = 0.0;  // <b1^dag b1>
  cplx c_ab_dag{};   // <a1^dag b1>
  cplx c_ab{};       // <a1 b1>
  cplx c_aa{};       // <a1^2>
  cplx c_bb{};       // <b1^2>

  static constexpr std::size_t dim = 10;
  using Vector = std::array<double, dim>;

  // Order: N_a, N_b, Re/Im c_ab_dag, Re/Im c_ab, Re/Im c_aa, Re/Im c_bb.
  Vector to_vector() const {
    return {N_a,         N_b,         c_ab_dag.real(), c_ab_dag.imag(), c_ab.real(),
            c_ab.imag(), c_aa.real(), c_aa.imag(),     c_bb.real(),     c_bb.imag()};
  }

  static MomentState from_vector(std::span<const double> v) {
    MomentState s;
    s.N_a = v[0];
    s.N_b = v[1];
    s.c_ab_dag = {v[2], v[3]};
    s.c_ab = {v[4], v[5]};
    s.c_aa = {v[6], v[7]};
    s.c_bb = {v[8], v[9]};
    return s;
  }

  // Vacuum cavity, thermal mechanics at occupancy n.
  static MomentState thermal(double n) {
    MomentState s;
    s.N_b = n;
    return s;
  }
};

inline constexpr double kMomentTolerance = 1e-9;

// Positivity and Cauchy-Schwarz bounds. Returns an empty string when the
// state is physical, otherwise a description of the first violation.
inline std::string physicality_violation(const MomentState& s, double tol = kMomentTolerance) {
  std::ostringstream os;
  if (!(s.N_a >= -tol)) os << "N_a = " << s.N_a << " < 0";
  else if (!(s.N_b >= -tol)) os << "N_b = " << s.N_b << " < 0";
  else if (std::norm(s.c_ab_dag) > (s.N_a + tol) * (s.N_b + tol))
    os << "|<a^dag b>|^2 = " << std::norm(s.c_ab_dag) << " exceeds N_a N_b";
  else if (std::norm(s.c_ab) > (s.N_a + tol) * (s.N_b + 1.0 + tol))
    os << "|<a b>|^2 = " << std::norm(s.c_ab) << " exceeds N_a (N_b + 1)";
  else if (std::norm(s.c_aa) > (s.N_a + tol) * (s.N_a + 1.0 + tol))
    os << "|<a^2>|^2 = " << std::norm(s.c_aa) << " exceeds N_a (N_a + 1)";
  else if (std::norm(s.c_bb) > (s.N_b + tol) * (s.N_b + 1.0 + tol))
    os << "|<b^2>|^2 = " << std::norm(s.c_bb) << " exceeds N_b (N_b + 1)";
  return os.str();
}

inline bool is_physical(const MomentState& s, double tol = kMomentTolerance) {
  return physicality_violation(s, tol).empty();
}

// Time derivative of the six moments from the adjoint master equation with
// H_L = -Delta' a^dag a + omega_m b^dag b + G (a^dag + a)(b + b^dag), cavity
// decay into vacuum at rate kappa and a thermal mechanical bath.
//
// With A = i Delta' - kappa/2 and B = -i omega_m - gamma/2:
//   dN_a     = -kappa N_a - 2G Im<ab> + 2G Im<a^dag b>
//   dN_b     = gamma (n_th - N_b) - 2G (Im<ab> + Im<a^dag b>)
//   d<a^dag b> = (A* + B)<a^dag b> + iG (<b^2> + N_b - N_a - <a^2>*)
//   d<ab>    = (A + B)<ab> - iG (<b^2> + N_b + <a^2> + N_a + 1)
//   d<a^2>   = 2A <a^2> - 2iG (<ab> + <a^dag b>*)
//   d<b^2>   = 2B <b^2> - 2iG (<ab> + <a^dag b>)
inline MomentState moment_rhs(const MomentState& s, const SystemParams& p, double kappa) {
  const cplx i(0.0, 1.0);
  const double G = p.G;
  const cplx A(-0.5 * kappa, p.delta_prime);
  const cplx B(-0.5 * p.gamma, -p.omega_m);

  MomentState d;
  d.N_a = -kappa * s.N_a - 2.0 * G * s.c_ab.imag() + 2.0 * G * s.c_ab_dag.imag();
  d.N_b = p.gamma * (p.n_th - s.N_b) - 2.0 * G * (s.c_ab.imag() + s.c_ab_dag.imag());
  d.c_ab_dag = (std::conj(A) + B) * s.c_ab_dag + i * G * (s.c_bb + s.N_b - s.N_a - std::conj(s.c_aa));
  d.c_ab = (A + B) * s.c_ab - i * G * (s.c_bb + s.N_b + s.c_aa + s.N_a + 1.0);
  d.c_aa = 2.0 * A * s.c_aa - 2.0 * i * G * (s.c_ab + std::conj(s.c_ab_dag));
  d.c_bb = 2.0 * B * s.c_bb - 2.0 * i * G * (s.c_ab + s.c_ab_dag);
  return d;
}

// Signature shared by the production right-hand side and test doubles.
using MomentRhsFn = std::function<MomentState(const MomentState&, const SystemParams&, double)>;

struct Trajectory {
  std::vector<double> times;
  std::vector<MomentState> states;
  std::vector<double> kappa_of_t;
  SystemParams params;
  PulseSchedule schedule;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }

  std::vector<double> phonons() const {
    std::vector<double> v;
    v.reserve(states.size());
    for (const auto& s : states) v.push_back(s.N_b);
    return v;
  }

  std::vector<double> photons() const {
    std::vector<double> v;
    v.reserve(states.size());
    for (const auto& s : states) v.push_back(s.N_a);
    return v;
  }
};

// Uniform samples k*dt on [0, t_end] merged with every schedule edge inside
// the run. Grid points closer than 1e-9 to an edge are replaced by the edge.
inline std::vector<double> sample_grid(double t_end, double sample_dt,
                                       const std::vector<double>& edges) {
  if (!(sample_dt > 0.0)) throw ConfigError("sample_dt must be > 0");
  std::vector<double> grid;
  const auto n = static_cast<std::size_t>(std::floor(t_end / sample_dt + 1e-9));
  grid.reserve(n + 2 + edges.size());
  for (std::size_t k = 0; k <= n; ++k) grid.push_back(static_cast<double>(k) * sample_dt);
  if (t_end - grid.back() > 1e-9) grid.push_back(t_end);
  for (double e : edges)
    if (e > 0.0 && e < t_end) grid.push_back(e);
  std::sort(grid.begin(), grid.end());
  std::vector<double> out;
  out.reserve(grid.size());
  for (double t : grid) {
    if (!out.empty() && t - out.back() < 1e-9) {
      // Prefer the exact edge value over the uniform point.
      if (std::binary_search(edges.begin(), edges.end(), t)) out.back() = t;
      continue;
    }
    out.push_back(t);
  }
  return out;
}

// Splits [0, t_end] at the schedule edges.
inline std::vector<double> segment_breakpoints(const PulseSchedule& schedule, double t_end) {
  std::vector<double> b{0.0};
  for (double e : schedule.edges())
    if (e > 0.0 && e < t_end) b.push_back(e);
  b.push_back(t_end);
  return b;
}

struct EvolveOptions {
  double t_end = 100.0;
  double sample_dt = 0.1;
  OdeTolerances tol{1e-10, 1e-12};
  // Abort if a sample violates the MomentState invariants.
  bool check_physicality = true;
};

// Integrates the moment equations under kappa(t). The integrator is
// restarted at every schedule edge and every edge is a sample point.
// A run with t_end == 0 has no samples.
inline Trajectory evolve(const SystemParams& params, const PulseSchedule& schedule,
                         const MomentState& initial, const EvolveOptions& opt,
                         const MomentRhsFn& rhs_fn = moment_rhs) {
  params.validate();
  require_stable(params);
  schedule.validate();
  if (!(opt.t_end >= 0.0)) throw ConfigError("t_end must be >= 0");
  if (const auto v = physicality_violation(initial); !v.empty())
    throw ConfigError("initial moment state is unphysical: " + v);

  Trajectory traj;
  traj.params = params;
  traj.schedule = schedule;
  if (opt.t_end == 0.0) return traj;

  const auto grid = sample_grid(opt.t_end, opt.sample_dt, schedule.edges());
  const auto breaks = segment_breakpoints(schedule, opt.t_end);
  traj.times.reserve(grid.size());
  traj.states.reserve(grid.size());
  traj.kappa_of_t.reserve(grid.size());

  auto record = [&](double t, const MomentState& s) {
    if (opt.check_physicality) {
      if (const auto v = physicality_violation(s); !v.empty()) {
        std::ostringstream os;
        os << "moment state became unphysical at t = " << t << ": " << v;
        throw NumericalError(os.str());
      }
    }
    traj.times.push_back(t);
    traj.states.push_back(s);
    traj.kappa_of_t.push_back(schedule.kappa_at(t));
  };

  auto y = initial.to_vector();
  record(0.0, initial);

  DormandPrince54 stepper(MomentState::dim, opt.tol);
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k], b = breaks[k + 1];
    const double kappa = schedule.kappa_at(a);
    auto rhs = [&](double, std::span<const double> yv, std::span<double> dy) {
      const auto d = rhs_fn(MomentState::from_vector(yv), params, kappa).to_vector();
      std::copy(d.begin(), d.end(), dy.begin());
    };
    auto first = std::upper_bound(grid.begin(), grid.end(), a);
    auto last = std::upper_bound(grid.begin(), grid.end(), b + 1e-12);
    std::span<const double> outs(&*first, static_cast<std::size_t>(last - first));
    stepper.integrate(rhs, a, b, std::span<double>(y), outs,
                      [&](double t, std::span<const double> yv) {
                        record(t, MomentState::from_vector(yv));
                      });
  }
  return traj;
}

// Convenience overload with the default initial condition (vacuum cavity,
// mechanics at n_th).
inline Trajectory evolve(const SystemParams& params, const PulseSchedule& schedule,
                         const EvolveOptions& opt) {
  return evolve(params, schedule, MomentState::thermal(params.n_th), opt);
}

// Linear form of the moment equations: dy/dt = M y + c.
struct LinearMomentSystem {
  Eigen::Matrix<double, 10, 10> M;
  Eigen::Matrix<double, 10, 1> c;
};

inline LinearMomentSystem linearize(const SystemParams& params, double kappa,
                                    const MomentRhsFn& rhs_fn = moment_rhs) {
  LinearMomentSystem sys;
  const auto c = rhs_fn(MomentState{}, params, kappa).to_vector();
  for (std::size_t r = 0; r < 10; ++r) sys.c(static_cast<Eigen::Index>(r)) = c[r];
  for (std::size_t j = 0; j < 10; ++j) {
    MomentState::Vector e{};
    e[j] = 1.0;
    const auto col = rhs_fn(MomentState::from_vector(e), params, kappa).to_vector();
    for (std::size_t r = 0; r < 10; ++r)
      sys.M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = col[r] - c[r];
  }
  return sys;
}

// Fixed point of the moment equations at constant kappa, by direct solve.
inline MomentState steady_state(const SystemParams& params, double kappa) {
  params.validate();
  require_stable(params);
  if (!(kappa > 0.0)) throw ConfigError("steady state requires kappa > 0");
  const auto sys = linearize(params, kappa);
  Eigen::FullPivLU<Eigen::Matrix<double, 10, 10>> lu(sys.M);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible())
    throw NumericalError("steady state: moment system is singular (no unique fixed point)");
  const Eigen::Matrix<double, 10, 1> y = lu.solve(-sys.c);
  const double residual = (sys.M * y + sys.c).norm();
  if (!(residual < 1e-10 * std::max(1.0, y.norm())))
    throw NumericalError("steady state: residual too large");
  std::array<double, 10> v{};
  for (std::size_t r = 0; r < 10; ++r) v[r] = y(static_cast<Eigen::Index>(r));
  return MomentState::from_vector(v);
}

inline MomentState steady_state(const SystemParams& params) {
  return steady_state(params, params.kappa0);
}

// Gamma_eff = (dN_b/dt) / N_b, from a centered difference of ln N_b
// (one-sided at the ends), optionally smoothed by a centered moving average
// over `window` samples. Negative while cooling.
inline std::vector<double> effective_cooling_rate(const Trajectory& traj, std::size_t window = 1) {
  const std::size_t n = traj.size();
  if (n < 3) throw ConfigError("effective cooling rate needs at least 3 samples");
  std::vector<double> logn(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double nb = traj.states[i].N_b;
    if (!(nb > 0.0)) {
      std::ostringstream os;
      os << "effective cooling rate undefined: N_b = " << nb << " at t = " << traj.times[i];
      throw NumericalError(os.str());
    }
    logn[i] = std::log(nb);
  }
  std::vector<double> rate(n);
  const auto& t = traj.times;
  rate[0] = (logn[1] - logn[0]) / (t[1] - t[0]);
  rate[n - 1] = (logn[n - 1] - logn[n - 2]) / (t[n - 1] - t[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i)
    rate[i] = (logn[i + 1] - logn[i - 1]) / (t[i + 1] - t[i - 1]);
  if (window <= 1) return rate;

  const std::size_t half = window / 2;
  std::vector<double> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    double s = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) s += rate[j];
    smooth[i] = s / static_cast<double>(hi - lo + 1);
  }
  return smooth;
}

// Weak-coupling reference: exponential cooling at Gamma = 4 G^2 / kappa0.
inline double analytic_weak_trajectory(const SystemParams& p, double t) {
  const double Gamma = 4.0 * p.G * p.G / p.kappa0;
  const double backaction = p.kappa0 * p.kappa0 / (16.0 * p.omega_m * p.omega_m);
  if (p.gamma + Gamma == 0.0) return p.n_th;
  const double decay = std::exp(-Gamma * t);
  return p.n_th * (p.gamma + Gamma * decay) / (p.gamma + Gamma) + backaction * (1.0 - decay);
}

inline double weak_cooling_rate(const SystemParams& p) { return 4.0 * p.G * p.G / p.kappa0; }

struct StrongCouplingReference {
  double swap = 0.0;        // energy-exchange part
  double backaction = 0.0;  // counter-rotating / quantum backaction part
  double total() const { return swap + backaction; }
};

// Strong-coupling reference trajectory: Rabi oscillation at omega_+ - omega_-
// under an envelope decaying at (kappa + gamma)/2.
inline StrongCouplingReference analytic_strong_trajectory(const SystemParams& p, double t) {
  const auto modes = normal_mode_freqs(p);
  const double k = p.kappa0, g = p.gamma;
  const double env = std::exp(-0.5 * (k + g) * t);
  const double c_diff = std::cos(modes.splitting() * t);
  const double c_sum = std::cos(modes.sum() * t);
  StrongCouplingReference r;
  r.swap = p.n_th * (g + 0.5 * env * (k - g + (k + g) * c_diff)) / (k + g);
  r.backaction = p.G * p.G * (1.0 - env * c_sum * c_diff) /
                 (2.0 * (p.omega_m * p.omega_m - 4.0 * p.G * p.G));
  return r;
}

inline constexpr const char* kTrajectoryCsvHeader =
    "t,N_a,N_b,re_ab_dag,im_ab_dag,re_ab,im_ab,re_aa,im_aa,re_bb,im_bb,kappa";

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << kTrajectoryCsvHeader << '\n';
  char buf[64];
  for (std::size_t i = 0; i < traj.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g", traj.times[i]);
    os << buf;
    for (double v : traj.states[i].to_vector()) {
      std::snprintf(buf, sizeof buf, ",%.12g", v);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.12g", traj.kappa_of_t[i]);
    os << buf << '\n';
  }
}

}  // namespace dyncool
