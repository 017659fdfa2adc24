#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dyncool/limits.hpp"
#include "dyncool/moments.hpp"
#include "test_util.hpp"

using namespace dyncool;
using testutil::rel;
using testutil::uniform;

namespace {
SystemParams make(double G, double kappa, double gamma, double n_th) {
  SystemParams p;
  p.G = G;
  p.kappa0 = kappa;
  p.gamma = gamma;
  p.n_th = n_th;
  return p;
}

// Closed forms written out independently of the library's term split.
double eq_std(const SystemParams& p) {
  const double G2 = p.G * p.G, k = p.kappa0, g = p.gamma;
  return g * (4 * G2 + k * k) / (4 * G2 * (k + g)) * p.n_th + (k * k + 8 * G2) / (16 * (1 - 4 * G2));
}
double eq_ins(const SystemParams& p) {
  const double pi = std::numbers::pi, G = p.G;
  return pi * p.gamma * p.n_th / (4 * G) + pi * pi * std::pow(G, 4) / ((1 - G * G) * (1 - 4 * G * G));
}
double eq_opt(const SystemParams& p) {
  const double pi = std::numbers::pi, G = p.G, k = p.kappa0;
  return pi * k / (4 * G) * (p.gamma * p.n_th / k + G * G / (2 * (1 - 4 * G * G)));
}
}  // namespace

TEST(SteadyLimit, HeadlineValue) {
  const auto s = steady_limit(make(0.3, 0.003, 1e-5, 1e3));
  EXPECT_NEAR(s.value, 3.39, 0.005);
  EXPECT_NEAR(s.value, 3.4, 0.1);
}

TEST(SteadyLimit, Fig2Value) {
  const auto p = make(0.2, 0.05, 1e-5, 1e3);
  EXPECT_NEAR(steady_limit(p).value, eq_std(p), 1e-14);
  EXPECT_NEAR(steady_limit(p).value, 0.227, 0.0005);
}

TEST(SteadyLimit, DecompositionSumsExactly) {
  auto& g = testutil::rng();
  for (int i = 0; i < 300; ++i) {
    const auto p = make(uniform(g, 0.001, 0.49), uniform(g, 1e-4, 0.5), uniform(g, 0.0, 1e-3),
                        uniform(g, 0.0, 2e3));
    const auto s = steady_limit(p);
    EXPECT_EQ(s.value, s.decomposition.classical + s.decomposition.quantum());
    EXPECT_LE(rel(s.value, eq_std(p)), 1e-12);
    EXPECT_GE(s.decomposition.classical, 0.0);
    EXPECT_GE(s.decomposition.dissipation_backaction, 0.0);
    EXPECT_GE(s.decomposition.interaction_backaction, 0.0);
    const auto c = all_limits(p);
    for (double v : {c.n_std, c.n_std_weak, c.n_std_strong, c.n_ins, c.n_ins_opt}) EXPECT_GE(v, 0.0);
  }
}

TEST(SteadyLimit, StrongReductionWhenCouplingDominates) {
  for (double G : {0.1, 0.2, 0.3}) {
    const auto s = steady_limit(make(G, 1e-3, 1e-6, 1e3));
    EXPECT_LT(rel(s.strong, s.value), 0.01) << "G = " << G;
  }
}

TEST(SteadyLimit, WeakReductionMatchesWeakTrajectoryLimit) {
  const auto p = make(0.005, 0.05, 1e-5, 1e3);
  EXPECT_NEAR(steady_limit(p).weak, analytic_weak_trajectory(p, 1e7), 1e-9);
}

TEST(SteadyLimit, ZeroCouplingIsAnError) {
  EXPECT_THROW(steady_limit(make(0.0, 0.05, 1e-5, 1e3)), PhysicsError);
  EXPECT_THROW(steady_limit(make(0.5, 0.05, 1e-5, 1e3)), PhysicsError);
}

TEST(InstantaneousLimit, Examples) {
  auto p = make(0.1, 0.05, 1e-5, 1e3);
  const auto r = instantaneous_limit(p);
  EXPECT_NEAR(r.thermal, 0.0785, 5e-5);
  EXPECT_NEAR(r.quantum, 0.00104, 5e-6);
  EXPECT_NEAR(r.value(), 0.0796, 5e-5);
  EXPECT_NEAR(r.value(), eq_ins(p), 1e-15);
  p.n_th = 0.0;
  EXPECT_EQ(instantaneous_limit(p).thermal, 0.0);
  EXPECT_NEAR(instantaneous_limit(p).value(), eq_ins(p), 1e-16);
  // Quoted to four figures; the exact value is 0.163446.
  EXPECT_NEAR(instantaneous_limit(make(0.3, 0.003, 1e-5, 1e3)).value(), 0.1635, 1e-4);
  EXPECT_THROW(instantaneous_limit(make(0.0, 0.05, 1e-5, 1e3)), PhysicsError);
}

TEST(OptimizedLimit, Examples) {
  const auto p = make(0.3, 0.003, 1e-5, 1e3);
  const auto o = optimized_instantaneous_limit(p);
  EXPECT_NEAR(o.value, 0.027, 0.0005);
  EXPECT_NEAR(o.value, eq_opt(p), 1e-15);
  EXPECT_NEAR(o.reduction_factor, 0.00785, 5e-6);
  EXPECT_GT(steady_limit(p).value / o.value, 100.0);
  EXPECT_TRUE(o.on_matching);
  EXPECT_FALSE(optimized_instantaneous_limit(make(0.25, 0.003, 1e-5, 1e3)).on_matching);
  // Factor crosses 1 at kappa = 4G / pi.
  EXPECT_NEAR(optimized_instantaneous_limit(make(0.3, 1.2 / std::numbers::pi, 1e-5, 1e3))
                  .reduction_factor,
              1.0, 1e-15);
  EXPECT_THROW(optimized_instantaneous_limit(make(0.0, 0.05, 1e-5, 1e3)), PhysicsError);
}

TEST(Matching, Couplings) {
  EXPECT_EQ(matching_couplings(3), 0.3);
  EXPECT_EQ(matching_couplings(5), 5.0 / 26.0);
  EXPECT_EQ(matching_couplings(7), 0.14);
  for (int k : {-3, 0, 1, 2, 4, 6}) EXPECT_THROW(matching_couplings(k), ConfigError) << k;
}

TEST(Matching, RatioIdentityAtEveryOddIndex) {
  for (int k = 3; k <= 41; k += 2) {
    SystemParams p;
    p.G = matching_couplings(k);
    const auto m = normal_mode_freqs(p);
    EXPECT_NEAR(m.sum() / m.splitting(), k, 1e-10 * k);
    EXPECT_TRUE(is_matched_coupling(p));
    EXPECT_NEAR(matching_index(p.G), k, 1e-9 * k);
  }
}

TEST(Ordering, MatchedStrongCoupling) {
  for (int k : {3, 5, 7}) {
    const auto c = all_limits(make(matching_couplings(k), 0.003, 1e-5, 1e3));
    EXPECT_LT(c.n_ins_opt, c.n_ins) << k;
    EXPECT_LT(c.n_ins, c.n_std) << k;
  }
}

TEST(Consistency, StrongTrajectoryMinimumMatchesThermalTerm) {
  for (double G : {0.1, 0.2, 0.3}) {
    for (double k : {0.003, 0.01}) {
      const auto p = make(G, k, 1e-5, 1e3);
      ASSERT_LT(k * std::numbers::pi / (2 * G), 0.2);
      const double T = 2 * std::numbers::pi / normal_mode_freqs(p).splitting();
      double lo = 1e300;
      for (int i = 0; i <= 20000; ++i) lo = std::min(lo, analytic_strong_trajectory(p, T * i / 20000.0).swap);
      EXPECT_LT(rel(lo, instantaneous_limit(p).thermal), 0.10) << "G = " << G << " kappa = " << k;
    }
  }
}

TEST(Sweep, ClassicalTermDecreasesWithCoupling) {
  double prev = 1e300;
  for (double G = 0.05; G <= 0.45 + 1e-12; G += 0.005) {
    const double c = steady_limit(make(G, 0.003, 1e-5, 1e3)).decomposition.classical;
    EXPECT_LT(c, prev);
    prev = c;
  }
}
