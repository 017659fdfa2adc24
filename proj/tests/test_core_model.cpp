#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "dyncool/params.hpp"
#include "test_util.hpp"

using namespace dyncool;
using testutil::uniform;

namespace {
SystemParams with_G(double G) {
  SystemParams p;
  p.G = G;
  return p;
}
}  // namespace

TEST(Stability, StrongCouplingWithinBound) {
  const auto r = validate_stability(with_G(0.2));
  EXPECT_TRUE(r.stable);
  EXPECT_NEAR(r.margin, 0.6, 1e-15);
}

TEST(Stability, BoundaryIsUnstable) {
  EXPECT_FALSE(validate_stability(with_G(0.5)).stable);
  EXPECT_THROW(require_stable(with_G(0.5)), PhysicsError);
}

TEST(Stability, DeepStrongCouplingRunIsValid) {
  const auto r = validate_stability(with_G(0.3));
  EXPECT_TRUE(r.stable);
  EXPECT_NEAR(r.margin, 0.4, 1e-15);
}

TEST(Stability, MonotoneInCoupling) {
  auto& g = testutil::rng();
  for (int i = 0; i < 200; ++i) {
    const double G1 = uniform(g, 0.0, 0.6), G2 = uniform(g, 0.0, G1);
    if (validate_stability(with_G(G1)).stable) EXPECT_TRUE(validate_stability(with_G(G2)).stable);
  }
}

TEST(Cooperativity, Values) {
  SystemParams p;
  p.G = 0.01;
  p.gamma = 1e-5;
  p.kappa0 = 0.05;
  EXPECT_NEAR(cooperativity(p), 4.0 * 1e-4 / (1e-5 * 0.05), 1e-9);
  EXPECT_NEAR(cooperativity(p), 800.0, 1e-9);
  p.G = 0.0;
  EXPECT_EQ(cooperativity(p), 0.0);
  p.G = 0.3;
  p.kappa0 = 0.003;
  EXPECT_NEAR(cooperativity(p) / 1.2e7, 1.0, 1e-12);
}

TEST(Cooperativity, ZeroRatesAreAnError) {
  SystemParams p;
  p.G = 0.1;
  p.gamma = 0.0;
  EXPECT_THROW(cooperativity(p), std::domain_error);
}

TEST(NormalModes, DecoupledModesCoincide) {
  const auto m = normal_mode_freqs(with_G(0.0));
  EXPECT_EQ(m.plus, 1.0);
  EXPECT_EQ(m.minus, 1.0);
}

TEST(NormalModes, ExampleValues) {
  auto m = normal_mode_freqs(with_G(0.2));
  EXPECT_NEAR(m.plus, std::sqrt(1.4), 1e-15);
  EXPECT_NEAR(m.plus, 1.18322, 5e-6);
  EXPECT_NEAR(m.minus, 0.77460, 5e-6);
  m = normal_mode_freqs(with_G(0.1));
  EXPECT_NEAR(m.plus, 1.09545, 5e-6);
  EXPECT_NEAR(m.minus, 0.89443, 5e-6);
}

TEST(NormalModes, InstabilityNamesRouthHurwitz) {
  try {
    normal_mode_freqs(with_G(0.6));
    FAIL() << "expected an instability error";
  } catch (const PhysicsError& e) {
    EXPECT_NE(std::string(e.what()).find("Routh-Hurwitz"), std::string::npos);
  }
}

TEST(NormalModes, ProductAndSumIdentities) {
  auto& g = testutil::rng();
  for (int i = 0; i < 500; ++i) {
    SystemParams p;
    p.omega_m = uniform(g, 0.2, 5.0);
    p.G = uniform(g, 0.0, 0.4999) * p.omega_m;
    const auto m = normal_mode_freqs(p);
    const double w2 = p.omega_m * p.omega_m;
    EXPECT_LE(testutil::rel(m.plus * m.minus, p.omega_m * std::sqrt(w2 - 4.0 * p.G * p.G)), 1e-12);
    EXPECT_LE(testutil::rel(m.plus * m.plus + m.minus * m.minus, 2.0 * w2), 1e-12);
    EXPECT_GE(m.plus, p.omega_m);
    EXPECT_LE(m.minus, p.omega_m);
    EXPECT_GT(m.minus, 0.0);
  }
}

TEST(Detuning, Examples) {
  EXPECT_EQ(effective_detuning(3.0, 3.0, 0.0, 1.0), 0.0);
  EXPECT_NEAR(effective_detuning(0.0, 1.02, 0.1, 1.0), -1.0, 1e-15);
  EXPECT_EQ(effective_detuning(2.0, 3.0, 0.0, 1.0), -1.0);
  EXPECT_THROW(effective_detuning(0.0, 1.0, 0.1, 0.0), ConfigError);
}

TEST(ThermalOccupancy, Examples) {
  const double wm = 2.0 * std::numbers::pi * 1e6;
  EXPECT_EQ(thermal_occupancy(0.0, wm), 0.0);
  EXPECT_THROW(thermal_occupancy(-1.0, wm), ConfigError);
  // hbar omega / (k_B T) = ln 2 gives exactly one quantum.
  const double T_ln2 = constants::hbar * wm / (constants::k_B * std::log(2.0));
  EXPECT_NEAR(thermal_occupancy(T_ln2, wm), 1.0, 1e-12);
  // High temperature: k_B T / (hbar omega) - 1/2 + x/12.
  const double T_hi = constants::hbar * wm / (constants::k_B * 1e-3);
  EXPECT_NEAR(thermal_occupancy(T_hi, wm), 1e3 - 0.5 + 1e-3 / 12.0, 1e-6);
  EXPECT_NEAR(thermal_occupancy(T_hi, wm), 999.5, 1e-3);
}

TEST(Drive, Examples) {
  EXPECT_EQ(drive_for_constant_alpha(0.0, -1.0, 0.05), std::complex<double>(0.0, 0.0));
  const auto om = drive_for_constant_alpha(100.0, -1.0, 0.05);
  EXPECT_NEAR(om.real(), -100.0, 1e-12);
  EXPECT_NEAR(om.imag(), 2.5, 1e-12);
  const auto om2 = drive_for_constant_alpha(100.0, -1.0, 0.1);
  EXPECT_NEAR(om2.imag(), 2.0 * om.imag(), 1e-12);
  EXPECT_EQ(om2.real(), om.real());
}

TEST(Drive, ConstraintResidualVanishes) {
  auto& g = testutil::rng();
  for (int i = 0; i < 500; ++i) {
    const std::complex<double> alpha(uniform(g, -1e3, 1e3), uniform(g, -1e3, 1e3));
    const double dp = uniform(g, -3.0, 3.0), k = uniform(g, 0.0, 50.0);
    const auto om = drive_for_constant_alpha(alpha, dp, k);
    EXPECT_LT(drive_constraint_residual(alpha, dp, k, om), 1e-12 * std::abs(alpha) + 1e-300);
  }
}

TEST(Params, ValidationRejectsOutOfDomain) {
  SystemParams p;
  p.kappa0 = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = SystemParams{};
  p.n_th = -1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = SystemParams{};
  p.G = -0.1;
  EXPECT_THROW(p.validate(), ConfigError);
  p = SystemParams{};
  p.kappa0 = 2.0;
  EXPECT_NO_THROW(p.validate());
  EXPECT_FALSE(p.resolved_sideband());
}

TEST(Params, PhysicalInputsConvertOnce) {
  PhysicalInputs in;
  in.omega_m = 2.0;
  in.g = 0.01;
  in.alpha = {30.0, 40.0};  // |alpha| = 50
  in.omega = 10.0;
  in.omega_c = 12.0;
  in.kappa = 0.1;
  in.gamma = 2e-5;
  in.temperature = 0.0;
  const auto p = to_system_params(in);
  EXPECT_NEAR(p.G, 0.25, 1e-15);
  EXPECT_NEAR(p.kappa0, 0.05, 1e-15);
  EXPECT_NEAR(p.gamma, 1e-5, 1e-18);
  EXPECT_NEAR(p.delta_prime, (-2.0 + 2.0 * 0.5 * 0.5 / 2.0) / 2.0, 1e-15);
  EXPECT_EQ(p.n_th, 0.0);
  EXPECT_NEAR(kappa_from_quality(1e3, 1e4), 0.1, 1e-15);
  EXPECT_NEAR(gamma_from_quality(1.0, 1e5), 1e-5, 1e-18);
}
