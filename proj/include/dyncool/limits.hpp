#pragma once

#include <cmath>
#include <numbers>
#include <sstream>

#include "dyncool/errors.hpp"
#include "dyncool/params.hpp"

namespace dyncool {

struct BackactionDecomposition {
  double classical = 0.0;
  double dissipation_backaction = 0.0;   // kappa^2 / (16 (omega_m^2 - 4G^2))
  double interaction_backaction = 0.0;   // G^2 / (2 (omega_m^2 - 4G^2))

  double quantum() const { return dissipation_backaction + interaction_backaction; }
  double total() const { return classical + quantum(); }
};

struct SteadyLimit {
  double value = 0.0;
  BackactionDecomposition decomposition;
  double weak = 0.0;    // gamma n_th / (Gamma + gamma) + kappa^2 / (16 omega_m^2)
  double strong = 0.0;  // gamma n_th / (kappa + gamma) + G^2 / (2 (omega_m^2 - 4G^2))
};

namespace detail {
inline void require_coupling(const SystemParams& p, const char* what) {
  p.validate();
  require_stable(p);
  if (!(p.G > 0.0)) {
    std::ostringstream os;
    os << what << " undefined for G = 0 (no cooling without coupling)";
    throw PhysicsError(os.str());
  }
}
}  // namespace detail

// Steady-state phonon occupancy under constant dissipation, split into the
// classical limit and the two quantum backaction contributions.
inline SteadyLimit steady_limit(const SystemParams& p) {
  detail::require_coupling(p, "steady-state limit");
  const double G2 = p.G * p.G, k = p.kappa0, g = p.gamma;
  const double w2 = p.omega_m * p.omega_m;
  const double gap = w2 - 4.0 * G2;
  SteadyLimit r;
  r.decomposition.classical = g * (4.0 * G2 + k * k) * p.n_th / (4.0 * G2 * (k + g));
  r.decomposition.dissipation_backaction = k * k / (16.0 * gap);
  r.decomposition.interaction_backaction = G2 / (2.0 * gap);
  r.value = r.decomposition.total();
  const double Gamma = 4.0 * G2 / k;
  r.weak = g * p.n_th / (Gamma + g) + k * k / (16.0 * w2);
  r.strong = g * p.n_th / (k + g) + G2 / (2.0 * gap);
  return r;
}

struct InstantaneousLimit {
  double thermal = 0.0;  // pi gamma n_th / (4G)
  double quantum = 0.0;  // pi^2 G^4 / ((omega_m^2 - G^2)(omega_m^2 - 4G^2))
  double value() const { return thermal + quantum; }
};

// Sum of the individual minima of the swap and counter-rotating parts of the
// strong-coupling trajectory.
inline InstantaneousLimit instantaneous_limit(const SystemParams& p) {
  detail::require_coupling(p, "instantaneous-state limit");
  const double pi = std::numbers::pi;
  const double G2 = p.G * p.G, w2 = p.omega_m * p.omega_m;
  InstantaneousLimit r;
  r.thermal = pi * p.gamma * p.n_th / (4.0 * p.G);
  r.quantum = pi * pi * G2 * G2 / ((w2 - G2) * (w2 - 4.0 * G2));
  return r;
}

// Matching index k for coupling G, i.e. the root k >= 1 of k/(k^2+1) = G/omega_m.
inline double matching_index(double G_over_wm) {
  if (!(G_over_wm > 0.0) || !(G_over_wm < 0.5)) return 0.0;
  return (1.0 + std::sqrt(1.0 - 4.0 * G_over_wm * G_over_wm)) / (2.0 * G_over_wm);
}

// True when G/omega_m = k/(k^2+1) for an odd integer k >= 3, to 1e-9.
inline bool is_matched_coupling(const SystemParams& p) {
  const double k = matching_index(p.G / p.omega_m);
  const double kr = std::round(k);
  if (kr < 3.0 || std::fmod(kr, 2.0) == 0.0) return false;
  return std::abs(kr / (kr * kr + 1.0) - p.G / p.omega_m) <= 1e-9 * (p.G / p.omega_m);
}

struct OptimizedLimit {
  double value = 0.0;
  double reduction_factor = 0.0;  // pi kappa / (4G)
  bool on_matching = false;       // evaluated off-match is allowed but flagged
};

inline OptimizedLimit optimized_instantaneous_limit(const SystemParams& p) {
  detail::require_coupling(p, "optimized instantaneous-state limit");
  const double G2 = p.G * p.G, k = p.kappa0;
  const double gap = p.omega_m * p.omega_m - 4.0 * G2;
  OptimizedLimit r;
  r.reduction_factor = std::numbers::pi * k / (4.0 * p.G);
  r.value = r.reduction_factor * (p.gamma * p.n_th / k + G2 / (2.0 * gap));
  r.on_matching = is_matched_coupling(p);
  return r;
}

// Carrier-envelope frequency matching: (omega_+ + omega_-)/(omega_+ - omega_-)
// = k gives G/omega_m = k/(k^2+1). k must be odd and >= 3.
inline double matching_couplings(int k) {
  if (k < 3 || k % 2 == 0) {
    std::ostringstream os;
    os << "matching index k = " << k << " must be an odd integer >= 3";
    throw ConfigError(os.str());
  }
  const double kd = static_cast<double>(k);
  const double G = kd / (kd * kd + 1.0);
  SystemParams p;
  p.G = G;
  const auto m = normal_mode_freqs(p);
  const double ratio = m.sum() / m.splitting();
  if (!(std::abs(ratio - kd) < 1e-10 * kd))
    throw NumericalError("matching coupling fails the frequency-ratio identity");
  return G;
}

struct CoolingLimits {
  double n_std = 0.0;
  double n_std_weak = 0.0;
  double n_std_strong = 0.0;
  double n_ins = 0.0;
  double n_ins_opt = 0.0;
  BackactionDecomposition decomposition;
  InstantaneousLimit ins_terms;
  double reduction_factor = 0.0;
  bool on_matching = false;
};

inline CoolingLimits all_limits(const SystemParams& p) {
  const auto s = steady_limit(p);
  const auto i = instantaneous_limit(p);
  const auto o = optimized_instantaneous_limit(p);
  CoolingLimits c;
  c.n_std = s.value;
  c.n_std_weak = s.weak;
  c.n_std_strong = s.strong;
  c.decomposition = s.decomposition;
  c.n_ins = i.value();
  c.ins_terms = i;
  c.n_ins_opt = o.value;
  c.reduction_factor = o.reduction_factor;
  c.on_matching = o.on_matching;
  return c;
}

}  // namespace dyncool
