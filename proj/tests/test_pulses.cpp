#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "dyncool/limits.hpp"
#include "dyncool/moments.hpp"
#include "dyncool/pulses.hpp"
#include "test_util.hpp"

using namespace dyncool;
using testutil::rel;

namespace {

SystemParams fig2d() {
  SystemParams p;
  p.G = 0.2;
  p.kappa0 = 0.05;
  p.gamma = 1e-5;
  p.n_th = 1e3;
  return p;
}

MomentState state_at(const SystemParams& p, const PulseSchedule& s, double t) {
  EvolveOptions o;
  o.t_end = t;
  o.sample_dt = t;
  return evolve(p, s, o).states.back();
}

}  // namespace

TEST(SinglePulse, DefaultsAtFig2Coupling) {
  const auto p = fig2d();
  const auto spec = default_spec(p);
  const auto s = single_pulse_schedule(p, spec);
  ASSERT_EQ(s.segments.size(), 1u);
  const auto& seg = s.segments[0];
  EXPECT_NEAR(0.5 * (seg.t_start + seg.t_end), std::numbers::pi / 0.4, 1e-12);
  EXPECT_NEAR(0.5 * (seg.t_start + seg.t_end), 7.854, 5e-4);
  EXPECT_NEAR(seg.t_end - seg.t_start, 0.0785, 5e-5);
  EXPECT_NEAR(seg.kappa - p.kappa0, 127.3, 0.05);
  EXPECT_NEAR(s.excess_area(), 10.0, 1e-10);
  EXPECT_EQ(s.kind, ScheduleKind::single);
}

TEST(SinglePulse, ZeroAreaIsConstant) {
  const auto p = fig2d();
  auto spec = default_spec(p);
  spec.area = 0.0;
  const auto s = single_pulse_schedule(p, spec);
  EXPECT_TRUE(s.segments.empty());
  EXPECT_EQ(s.baseline, p.kappa0);
}

TEST(SinglePulse, Deterministic) {
  const auto p = fig2d();
  EXPECT_EQ(single_pulse_schedule(p, default_spec(p)), single_pulse_schedule(p, default_spec(p)));
}

TEST(SinglePulse, RejectsPulseBeforeZero) {
  const auto p = fig2d();
  auto spec = default_spec(p);
  spec.t_first = 0.01;
  EXPECT_THROW(single_pulse_schedule(p, spec), ConfigError);
  spec = default_spec(p);
  spec.width = 0.0;
  EXPECT_THROW(single_pulse_schedule(p, spec), ConfigError);
}

TEST(Periodic, OnOffWindowing) {
  SystemParams p = fig2d();
  p.G = 0.1;
  const auto spec = default_spec(p);
  const auto s = periodic_schedule(p, spec, 400.0, {{0.0, 200.0}});
  ASSERT_FALSE(s.segments.empty());
  for (const auto& seg : s.segments) EXPECT_LE(seg.t_end, 200.0);
  EXPECT_EQ(s.kind, ScheduleKind::on_off);
  for (std::size_t i = 1; i < s.segments.size(); ++i)
    EXPECT_NEAR(s.segments[i].t_start - s.segments[i - 1].t_start, 15.708, 5e-4);
}

TEST(Periodic, CountAndOverlap) {
  const auto p = fig2d();
  auto spec = default_spec(p);
  spec.count = 3;
  EXPECT_EQ(periodic_schedule(p, spec, 1000.0).segments.size(), 3u);
  spec.period = spec.width;
  EXPECT_THROW(periodic_schedule(p, spec, 100.0), ConfigError);
}

TEST(Smoothed, SquareIsTheSinglePulse) {
  const auto p = fig2d();
  EXPECT_EQ(smoothed_pulse_schedule(p, default_spec(p), PulseShape::square),
            single_pulse_schedule(p, default_spec(p)));
}

TEST(Smoothed, AreaAndStepCount) {
  const auto p = fig2d();
  for (auto shape : {PulseShape::raised_cosine, PulseShape::gaussian}) {
    const auto s = smoothed_pulse_schedule(p, default_spec(p), shape, 40);
    EXPECT_EQ(s.segments.size(), 40u);
    EXPECT_LT(rel(s.excess_area(), 10.0), 1e-6);
    EXPECT_NO_THROW(s.validate());
    EXPECT_EQ(s.kind, ScheduleKind::smoothed);
  }
  EXPECT_THROW(smoothed_pulse_schedule(p, default_spec(p), PulseShape::gaussian, 19), ConfigError);
  EXPECT_EQ(pulse_shape_from_string("raised-cosine"), PulseShape::raised_cosine);
  EXPECT_THROW(pulse_shape_from_string("triangle"), ConfigError);
}

TEST(Smoothed, ShapeMattersLessForShorterPulses) {
  // Back-transfer during the pulse scales as G^2 N_a / kappa_peak^2, so the
  // shape only drops out once the pulse is short and strong.
  const auto p = fig2d();
  double prev = 0.0;
  for (double f : {0.001, 0.003, 0.01}) {
    const auto spec = synchronized_pulse_spec(p, f * half_rabi_time(p));
    const double end = spec.onset() + spec.width;
    const double sq = state_at(p, single_pulse_schedule(p, spec), end).N_b;
    const double rc = state_at(p, smoothed_pulse_schedule(p, spec, PulseShape::raised_cosine), end).N_b;
    const double d = rel(rc, sq);
    if (f == 0.001) EXPECT_LT(d, 0.02);
    EXPECT_GT(d, prev) << f;
    prev = d;
  }
}

TEST(Smoothed, SmallerAreaLeavesMorePhotons) {
  const auto p = fig2d();
  auto spec = synchronized_pulse_spec(p, 0.01 * half_rabi_time(p));
  const double after = spec.onset() + spec.width;
  const double full = state_at(p, single_pulse_schedule(p, spec), after).N_a;
  spec.area = 5.0;
  const double half = state_at(p, single_pulse_schedule(p, spec), after).N_a;
  EXPECT_GT(half, full);
}

TEST(Pulses, ReinitializeTheCavity) {
  for (double G : {0.1, 0.2, 0.3}) {
    SystemParams p = fig2d();
    p.G = G;
    const auto spec = synchronized_pulse_spec(p, 0.01 * half_rabi_time(p));
    const double before = state_at(p, PulseSchedule::constant(p.kappa0), spec.onset()).N_a;
    const double after = state_at(p, single_pulse_schedule(p, spec), spec.onset() + spec.width).N_a;
    EXPECT_LT(after, std::exp(-10.0) * before + 0.01) << "G = " << G << ", before " << before;
  }
}

TEST(Synchronized, OnsetAtFirstPhononMinimum) {
  const auto p = fig2d();
  const double t0 = locate_phonon_minimum(p);
  EvolveOptions o;
  o.t_end = 2 * t0;
  o.sample_dt = 1e-3;
  const auto tr = evolve(p, PulseSchedule::constant(p.kappa0), o);
  std::size_t best = 0;
  for (std::size_t i = 0; i < tr.size(); ++i)
    if (tr.times[i] > 0.5 * t0 && (best == 0 || tr.states[i].N_b < tr.states[best].N_b)) best = i;
  EXPECT_NEAR(t0, tr.times[best], 2e-3);
  // Close to, but not exactly at, the rotating-wave estimate pi/(2G).
  EXPECT_LT(rel(t0, half_rabi_time(p)), 0.05);
}

TEST(Synchronized, PeriodicTrainRespectsWindows) {
  SystemParams p = fig2d();
  p.G = 0.1;
  p.kappa0 = 0.01;
  const auto s = synchronized_periodic_schedule(p, 0.157, 10.0, 400.0, {{0.0, 150.0}, {300.0, 400.0}});
  ASSERT_GE(s.segments.size(), 10u);
  for (const auto& seg : s.segments)
    EXPECT_TRUE((seg.t_end <= 150.0) || (seg.t_start >= 300.0 && seg.t_end <= 400.0));
  EXPECT_NO_THROW(s.validate(400.0));
}

TEST(OptimizeWidth, Fig4ArgminBeatsEndpoints) {
  SystemParams p;
  p.n_th = 300;
  p.G = 0.3;
  p.kappa0 = 0.003;
  p.gamma = 1e-5;
  const double th = half_rabi_time(p);
  const auto grid = log_width_grid(0.01 * th, 0.3 * th, 7);
  const auto scan = optimize_pulse_width(p, grid);
  EXPECT_LE(scan.best_objective, scan.objectives.front());
  EXPECT_LE(scan.best_objective, scan.objectives.back());
  EXPECT_EQ(scan.widths.size(), 7u);
  // Deterministic.
  EXPECT_EQ(optimize_pulse_width(p, grid).objectives, scan.objectives);
  // A single-width grid returns that width.
  EXPECT_EQ(optimize_pulse_width(p, {grid[3]}).best_width, grid[3]);
  // Widening the grid never raises the minimum.
  auto wide = grid;
  wide.push_back(0.6 * th);
  EXPECT_LE(optimize_pulse_width(p, wide).best_objective, scan.best_objective);
}

TEST(OptimizeWidth, RejectsBadGrids) {
  const auto p = fig2d();
  EXPECT_THROW(optimize_pulse_width(p, {}), ConfigError);
  EXPECT_THROW(optimize_pulse_width(p, {0.2, 0.1}), ConfigError);
  EXPECT_THROW(optimize_pulse_width(p, {-0.1}), ConfigError);
  EXPECT_THROW(log_width_grid(0.0, 1.0, 3), ConfigError);
}

TEST(CoModulation, ConstantKappaGivesConstantDrive) {
  const auto d = co_modulated_drive(PulseSchedule::constant(0.05), {100.0, 0.0}, -1.0, 50.0);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NEAR(d[0].omega.real(), -100.0, 1e-12);
  EXPECT_NEAR(d[0].omega.imag(), 2.5, 1e-12);
}

TEST(CoModulation, PulseModulusAndEdges) {
  const auto p = fig2d();
  const auto s = single_pulse_schedule(p, default_spec(p));
  const std::complex<double> alpha(30.0, 40.0);
  const auto d = co_modulated_drive(s, alpha, -1.0, 20.0);
  ASSERT_EQ(d.size(), 3u);
  const double kp = s.segments[0].kappa;
  EXPECT_NEAR(std::abs(d[1].omega), std::abs(alpha) * std::sqrt(1.0 + kp * kp / 4.0), 1e-9);
  EXPECT_EQ(d[1].t_start, s.segments[0].t_start);
  EXPECT_EQ(d[1].t_end, s.segments[0].t_end);
  EXPECT_EQ(d[0].t_end, d[1].t_start);
  EXPECT_EQ(d[2].t_start, d[1].t_end);
  // The drive trace carries exactly the schedule's excess area.
  double area = 0.0;
  for (const auto& x : d) area += (x.kappa - p.kappa0) * (x.t_end - x.t_start);
  EXPECT_NEAR(area, 10.0, 1e-10);
  for (const auto& x : d) EXPECT_LT(drive_constraint_residual(alpha, -1.0, x.kappa, x.omega), 1e-12 * 50);
}

TEST(OnOff, RelaxesToSteadyLimitAndRecovers) {
  SystemParams p = fig2d();
  p.G = 0.1;
  p.kappa0 = 0.02;
  const double th = half_rabi_time(p);
  const auto s = synchronized_periodic_schedule(p, 0.01 * th, 10.0, 1300.0, {{0.0, 300.0}, {1200.0, 1300.0}});
  EvolveOptions o;
  o.t_end = 1300;
  o.sample_dt = 0.1;
  const auto tr = evolve(p, s, o);
  const double n_std = steady_limit(p).value, n_ins = instantaneous_limit(p).value();
  EXPECT_LT(rel(interpolate(tr.times, tr.phonons(), 1200.0), n_std), 0.05);
  // Back below 1.1 n_ins within two pulse periods (one half Rabi cycle each)
  // of re-entering the ON window.
  double lo = 1e300;
  for (std::size_t i = 0; i < tr.size(); ++i)
    if (tr.times[i] >= 1200.0 && tr.times[i] <= 1200.0 + 2 * th) lo = std::min(lo, tr.states[i].N_b);
  EXPECT_LT(lo, 1.1 * n_ins);
}
