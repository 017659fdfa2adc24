#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dyncool/experiments.hpp"
#include "test_util.hpp"

using namespace dyncool;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("dyncool_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Hash, Fnv1aReferenceVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(config_hash(json{{"a", 1}}).size(), 16u);
  EXPECT_NE(config_hash(json{{"a", 1}}), config_hash(json{{"a", 2}}));
}

TEST(Config, EveryPresetRoundTrips) {
  for (const auto& name : preset_names()) {
    const auto c = preset_config(name);
    const auto back = config_from_json(json::parse(to_json(c).dump()));
    EXPECT_EQ(back, c) << name;
    EXPECT_EQ(config_hash(to_json(back)), config_hash(to_json(c))) << name;
  }
  EXPECT_THROW(preset_config("fig9"), ConfigError);
}

TEST(Config, ExplicitScheduleRoundTrips) {
  ExperimentConfig c;
  c.params.G = 0.1;
  c.schedule.protocol = "explicit";
  PulseSchedule s = PulseSchedule::constant(c.params.kappa0);
  s.segments.push_back({1.0, 2.0, 3.0});
  s.segments.push_back({4.0, 4.5, 0.2});
  c.schedule.explicit_schedule = s;
  EXPECT_EQ(config_from_json(json::parse(to_json(c).dump())), c);
  const auto rs = resolve_schedule(c.params, c.schedule, 10.0);
  EXPECT_EQ(rs.schedule.segments, s.segments);
}

TEST(Config, OverridesApplyDottedKeys) {
  const auto c = build_config("fig2a", std::nullopt, {"params.G=0.05", "run.t_end=12.5",
                                                       "outputs.csv=run.csv", "schedule.windows=[]"});
  EXPECT_EQ(c.params.G, 0.05);
  EXPECT_EQ(c.run.t_end, 12.5);
  EXPECT_EQ(c.outputs.csv, "run.csv");
  EXPECT_THROW(build_config("fig2a", std::nullopt, {"params.G"}), ConfigError);
  EXPECT_THROW(build_config("fig2a", std::nullopt, {"params..G=1"}), ConfigError);
  EXPECT_THROW(build_config("fig2a", std::nullopt, {"params.G.x=1"}), ConfigError);
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_THROW(build_config("fig2a", std::nullopt, {"params.bogus=1"}), ConfigError);
  EXPECT_THROW(build_config("fig2a", std::nullopt, {"extra=1"}), ConfigError);
  EXPECT_THROW(build_config("fig2a", std::nullopt, {"params.kappa0=-1"}), ConfigError);
  EXPECT_THROW(build_config("fig2a", std::nullopt, {"schedule.protocol=zigzag"}), ConfigError);
  EXPECT_THROW(parse_json("{not json", "inline"), ConfigError);
  EXPECT_THROW(load_json_file("/nonexistent/config.json"), ConfigError);
}

TEST(Config, FileMergesOverPreset) {
  const auto dir = scratch("merge");
  write_file_atomic(dir / "c.json", R"({"params": {"n_th": 5}, "run": {"t_end": 3}})");
  const auto c = build_config("fig2a", dir / "c.json", {"run.sample_dt=0.5"});
  EXPECT_EQ(c.params.n_th, 5.0);
  EXPECT_EQ(c.params.G, 0.1);
  EXPECT_EQ(c.run.t_end, 3.0);
  EXPECT_EQ(c.run.sample_dt, 0.5);
}

TEST(Config, SynchronizedRejectsExplicitTiming) {
  auto c = preset_config("fig2d");
  c.schedule.t_first = 3.0;
  EXPECT_THROW(resolve_schedule(c.params, c.schedule, 10.0), ConfigError);
}

TEST(ScheduleJson, RoundTripAndValidation) {
  PulseSchedule s = PulseSchedule::constant(0.05);
  s.segments.push_back({1.0, 1.5, 20.0});
  s.kind = ScheduleKind::single;
  const auto back = schedule_from_json(to_json(s));
  EXPECT_EQ(back, s);
  json bad = to_json(s);
  bad["segments"] = json::array({json::array({2.0, 1.0, 3.0})});
  EXPECT_THROW(schedule_from_json(bad), ConfigError);
}

TEST(Files, AtomicWriteCreatesDirectoriesAndReplaces) {
  const auto dir = scratch("atomic");
  const auto f = dir / "a" / "b" / "x.txt";
  write_file_atomic(f, "one");
  write_file_atomic(f, "two");
  EXPECT_EQ(slurp(f), "two");
  EXPECT_FALSE(fs::exists(dir / "a" / "b" / "x.txt.tmp"));
}

TEST(Summary, ZeroLengthRunIsAllNull) {
  auto c = preset_config("fig2a");
  c.run.t_end = 0.0;
  const auto r = run_experiment(c);
  const auto j = to_json(r.summary);
  EXPECT_EQ(j["samples"], 0);
  for (const auto& [k, v] : j.items())
    if (k != "samples") EXPECT_TRUE(v.is_null()) << k;
  EXPECT_EQ(trajectory_csv(r.trajectory).find('\n'), trajectory_csv(r.trajectory).size() - 1);
}

TEST(Summary, Fig2dPulsedReachesTheLimitFaster) {
  auto pulsed = preset_config("fig2d");
  pulsed.run.sample_dt = 0.05;
  auto plain = pulsed;
  plain.schedule = ScheduleConfig{};
  const auto a = run_experiment(pulsed).summary;
  const auto b = run_experiment(plain).summary;
  ASSERT_TRUE(a.time_to_limit && b.time_to_limit);
  EXPECT_LT(*a.time_to_limit, 0.1 * *b.time_to_limit);
  ASSERT_TRUE(a.mean_rate_to_limit && b.mean_rate_to_limit);
  EXPECT_GT(*a.mean_rate_to_limit / *b.mean_rate_to_limit, 10.0);
  EXPECT_NEAR(*a.steady_state_N_b, *b.steady_state_N_b, 1e-12);
}

TEST(Csv, TrajectoryColumns) {
  auto c = preset_config("fig2a");
  c.run.t_end = 1.0;
  c.run.sample_dt = 0.5;
  const auto csv = trajectory_csv(run_experiment(c).trajectory);
  std::istringstream in(csv);
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("t,N_a,N_b", 0), 0u) << header;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(Figure5, LimitsTableOrderingAndMonotonicity) {
  const auto dir = scratch("fig5");
  const auto f = run_figure(5, dir, {}, true);
  ASSERT_EQ(f.curves.size(), 2u);
  for (const auto& c : f.curves) {
    std::istringstream in(slurp(dir / c.file));
    std::string line;
    std::getline(in, line);
    double prev_ins = 0.0;
    int rows = 0;
    while (std::getline(in, line)) {
      double G, n_std, n_ins, n_opt;
      ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &G, &n_std, &n_ins, &n_opt), 4);
      // Below G ~ (kappa / 8 pi)^(1/3) the pi kappa G / 8 term of n_ins_opt
      // exceeds the quantum part of n_ins, so the ordering starts there.
      if (G >= 0.05) EXPECT_LE(n_opt, n_ins) << G;
      if (G >= 0.05 && G <= 0.4) EXPECT_LT(n_ins, n_std) << G;
      // The thermal part of n_ins falls with G until the quantum part takes over.
      if (rows > 0 && G <= 0.1) EXPECT_LT(n_ins, prev_ins) << G;
      prev_ins = n_ins;
      ++rows;
    }
    EXPECT_EQ(rows, 90);
  }
  EXPECT_TRUE(fs::exists(dir / "fig5_manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "plot_fig5.py"));
}

TEST(Figures, OutputsAreByteIdentical) {
  const auto d1 = scratch("same1"), d2 = scratch("same2");
  const std::vector<std::string> ov{"run.t_end=30", "run.sample_dt=0.5"};
  run_figure(4, d1, ov, true);
  run_figure(4, d2, ov, true);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(d1)) {
    const auto other = d2 / e.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path().filename();
    ++files;
  }
  EXPECT_GE(files, 8u);
}

TEST(Figures, ManifestListsEveryFileAndPlotReadsOnlyThem) {
  const auto dir = scratch("fig4");
  const auto f = run_figure(4, dir, {"run.t_end=20", "run.sample_dt=0.5"}, true);
  const auto m = json::parse(slurp(dir / "fig4_manifest.json"));
  EXPECT_EQ(m["tool_version"], kToolVersion);
  EXPECT_EQ(m["curves"].size(), f.curves.size());
  for (const auto& c : m["curves"]) EXPECT_TRUE(fs::exists(dir / c["file"].get<std::string>()));
  const auto py = slurp(dir / "plot_fig4.py");
  std::size_t pos = 0;
  while ((pos = py.find("load('", pos)) != std::string::npos) {
    pos += 6;
    const auto file = py.substr(pos, py.find('\'', pos) - pos);
    EXPECT_TRUE(file.ends_with(".csv")) << file;
    EXPECT_TRUE(fs::exists(dir / file)) << file;
  }
  EXPECT_EQ(py.find("import dyncool"), std::string::npos);
}

TEST(Figures, UnknownFigureIsAConfigError) {
  EXPECT_THROW(run_figure(7, scratch("none"), {}), ConfigError);
}

TEST(Figures, Fig3KeepsTheOffWindowFreeOfPulses) {
  auto c = preset_config("fig3");
  const auto rs = resolve_schedule(c.params, c.schedule, c.run.t_end);
  ASSERT_FALSE(rs.schedule.segments.empty());
  for (const auto& s : rs.schedule.segments)
    EXPECT_TRUE(s.t_end <= kFig3OffStart || s.t_start >= kFig3OffEnd);
}
