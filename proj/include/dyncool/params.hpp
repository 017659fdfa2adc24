#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <string>

#include "dyncool/errors.hpp"

namespace dyncool {

// Linearized optomechanics parameters. Every rate and detuning is expressed
// in units of the mechanical frequency, so time is measured in 1/omega_m.
struct SystemParams {
  double omega_m = 1.0;
  double kappa0 = 0.05;      // baseline cavity dissipation rate
  double gamma = 1e-5;       // mechanical dissipation rate
  double G = 0.0;            // |G|, linearized coupling magnitude
  double delta_prime = -1.0; // modified detuning; -omega_m is the cooling point
  double n_th = 0.0;         // bath phonon occupancy

  // Throws ConfigError for values outside the model's domain.
  void validate() const {
    auto bad = [](const std::string& what) { throw ConfigError("invalid parameter: " + what); };
    if (!(omega_m > 0.0) || !std::isfinite(omega_m)) bad("omega_m must be > 0");
    if (!(kappa0 > 0.0) || !std::isfinite(kappa0)) bad("kappa0 must be > 0");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) bad("gamma must be >= 0");
    if (!(G >= 0.0) || !std::isfinite(G)) bad("G must be >= 0");
    if (!(n_th >= 0.0) || !std::isfinite(n_th)) bad("n_th must be >= 0");
    if (!std::isfinite(delta_prime)) bad("delta_prime must be finite");
  }

  // kappa0 < omega_m; a violation is worth a warning, not an error.
  bool resolved_sideband() const { return kappa0 < omega_m; }

  SystemParams with_kappa(double kappa) const {
    SystemParams p = *this;
    p.kappa0 = kappa;
    return p;
  }
};

struct StabilityReport {
  bool stable = false;
  double margin = 0.0;  // omega_m - 2G, units of omega_m
};

// Routh-Hurwitz condition at the cooling point: 2|G| < omega_m.
inline StabilityReport validate_stability(const SystemParams& p) {
  StabilityReport r;
  r.margin = p.omega_m - 2.0 * p.G;
  r.stable = 2.0 * p.G < p.omega_m;
  return r;
}

inline void require_stable(const SystemParams& p) {
  const auto r = validate_stability(p);
  if (!r.stable) {
    std::ostringstream os;
    os << "unstable parameters: Routh-Hurwitz condition 2|G| < omega_m violated (G = " << p.G
       << ", omega_m = " << p.omega_m << ")";
    throw PhysicsError(os.str());
  }
}

// C = 4 G^2 / (gamma kappa0).
inline double cooperativity(const SystemParams& p) {
  if (p.gamma == 0.0 || p.kappa0 == 0.0)
    throw std::domain_error("cooperativity undefined for zero gamma or kappa");
  return 4.0 * p.G * p.G / (p.gamma * p.kappa0);
}

struct NormalModes {
  double plus = 0.0;
  double minus = 0.0;
  double splitting() const { return plus - minus; }
  double sum() const { return plus + minus; }
};

// omega_pm = sqrt(omega_m^2 +- 2 G omega_m).
inline NormalModes normal_mode_freqs(const SystemParams& p) {
  require_stable(p);
  const double w2 = p.omega_m * p.omega_m;
  const double shift = 2.0 * p.G * p.omega_m;
  return {std::sqrt(w2 + shift), std::sqrt(w2 - shift)};
}

// Full Rabi period 2 pi / (omega_+ - omega_-). Requires G > 0.
inline double rabi_period(const SystemParams& p) {
  const auto m = normal_mode_freqs(p);
  if (!(m.splitting() > 0.0)) throw ConfigError("Rabi period undefined for G = 0");
  return 2.0 * std::numbers::pi / m.splitting();
}

// Delta' = omega - omega_c + 2 G^2 / omega_m.
inline double effective_detuning(double omega, double omega_c, double G, double omega_m) {
  if (!(omega_m > 0.0)) throw ConfigError("omega_m must be > 0");
  return omega - omega_c + 2.0 * G * G / omega_m;
}

// Bose-Einstein occupancy for x = hbar omega / (k_B T); x = inf gives 0.
inline double bose_occupancy(double x) {
  if (!(x > 0.0)) throw ConfigError("hbar*omega/(k_B*T) must be > 0");
  if (std::isinf(x)) return 0.0;
  return 1.0 / std::expm1(x);
}

namespace constants {
inline constexpr double hbar = 1.054571817e-34;  // J s
inline constexpr double k_B = 1.380649e-23;      // J / K
}  // namespace constants

// Thermal occupancy at temperature T [K] of a mode at angular frequency
// omega_m [rad/s].
inline double thermal_occupancy(double T, double omega_m) {
  if (T < 0.0) throw ConfigError("temperature must be >= 0");
  if (!(omega_m > 0.0)) throw ConfigError("omega_m must be > 0");
  if (T == 0.0) return 0.0;
  return bose_occupancy(constants::hbar * omega_m / (constants::k_B * T));
}

// Drive amplitude that keeps the intracavity amplitude alpha fixed while
// kappa(t) is modulated: [i Delta' - kappa/2] alpha - i Omega = 0.
inline std::complex<double> drive_for_constant_alpha(std::complex<double> alpha,
                                                     double delta_prime, double kappa_t) {
  return std::complex<double>(delta_prime, 0.5 * kappa_t) * alpha;
}

inline double drive_constraint_residual(std::complex<double> alpha, double delta_prime,
                                        double kappa_t, std::complex<double> drive) {
  const std::complex<double> i(0.0, 1.0);
  return std::abs((i * delta_prime - 0.5 * kappa_t) * alpha - i * drive);
}

inline double kappa_from_quality(double omega_c, double Q_c) { return omega_c / Q_c; }
inline double gamma_from_quality(double omega_m, double Q_m) { return omega_m / Q_m; }

// Pre-linearization quantities in physical units (rad/s, K).
struct PhysicalInputs {
  double omega = 0.0;    // drive laser
  double omega_c = 0.0;  // cavity resonance
  double omega_m = 1.0;  // mechanical resonance
  double g = 0.0;        // single-photon coupling
  std::complex<double> alpha{};
  std::complex<double> beta{};  // mechanical mean; unused by the fluctuation dynamics
  double temperature = 0.0;
  double kappa = 0.0;
  double gamma = 0.0;
};

// Converts once to dimensionless units of omega_m.
inline SystemParams to_system_params(const PhysicalInputs& in) {
  if (!(in.omega_m > 0.0)) throw ConfigError("omega_m must be > 0");
  const double G = std::abs(in.alpha) * in.g;
  SystemParams p;
  p.omega_m = 1.0;
  p.G = G / in.omega_m;
  p.kappa0 = in.kappa / in.omega_m;
  p.gamma = in.gamma / in.omega_m;
  p.delta_prime = effective_detuning(in.omega, in.omega_c, G, in.omega_m) / in.omega_m;
  p.n_th = thermal_occupancy(in.temperature, in.omega_m);
  p.validate();
  return p;
}

}  // namespace dyncool
