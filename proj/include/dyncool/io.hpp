#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dyncool/errors.hpp"
#include "dyncool/params.hpp"
#include "dyncool/pulses.hpp"
#include "dyncool/schedule.hpp"

namespace dyncool {

using json = nlohmann::ordered_json;

// How the kappa(t) schedule of a run is produced. Unset pulse fields fall
// back to the defaults derived from G (see default_spec).
struct ScheduleConfig {
  std::string protocol = "constant";  // constant | single | periodic | synchronized |
                                      // synchronized_periodic | smoothed | explicit
  std::optional<double> t_first;
  std::optional<double> width;
  std::optional<double> period;
  double area = 10.0;
  std::size_t count = 0;
  std::string shape = "square";
  std::size_t steps = 40;
  std::vector<TimeWindow> windows;  // ON windows; empty = always ON
  std::optional<PulseSchedule> explicit_schedule;

  bool operator==(const ScheduleConfig&) const = default;
};

struct RunConfig {
  double t_end = 100.0;
  double sample_dt = 0.1;
  double rtol = 1e-10;
  double atol = 1e-12;

  bool operator==(const RunConfig&) const = default;
};

struct OutputConfig {
  std::string csv = "trajectory.csv";
  std::string summary = "summary.json";
  bool plot_script = true;

  bool operator==(const OutputConfig&) const = default;
};

struct ExperimentConfig {
  SystemParams params;
  ScheduleConfig schedule;
  RunConfig run;
  OutputConfig outputs;

  bool operator==(const ExperimentConfig& o) const {
    const auto& a = params;
    const auto& b = o.params;
    return a.omega_m == b.omega_m && a.kappa0 == b.kappa0 && a.gamma == b.gamma && a.G == b.G &&
           a.delta_prime == b.delta_prime && a.n_th == b.n_th && schedule == o.schedule &&
           run == o.run && outputs == o.outputs;
  }
};

namespace detail {

inline double number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

inline void reject_unknown(const json& j, const std::vector<std::string>& known,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

inline json window_to_json(const TimeWindow& w) {
  json a = json::array({w.start});
  if (std::isfinite(w.end)) a.push_back(w.end);
  else a.push_back(nullptr);
  return a;
}

inline TimeWindow window_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number())
    throw ConfigError("window must be [start, end] (end may be null)");
  TimeWindow w;
  w.start = j[0].get<double>();
  if (!j[1].is_null()) {
    if (!j[1].is_number()) throw ConfigError("window end must be a number or null");
    w.end = j[1].get<double>();
  }
  if (!(w.end > w.start)) throw ConfigError("window end must exceed its start");
  return w;
}

}  // namespace detail

inline json to_json(const SystemParams& p) {
  return json{{"omega_m", p.omega_m}, {"kappa0", p.kappa0},           {"gamma", p.gamma},
              {"G", p.G},             {"delta_prime", p.delta_prime}, {"n_th", p.n_th}};
}

inline SystemParams params_from_json(const json& j) {
  detail::reject_unknown(j, {"omega_m", "kappa0", "gamma", "G", "delta_prime", "n_th"}, "params");
  SystemParams p;
  p.omega_m = detail::number(j, "omega_m", p.omega_m);
  p.kappa0 = detail::number(j, "kappa0", p.kappa0);
  p.gamma = detail::number(j, "gamma", p.gamma);
  p.G = detail::number(j, "G", p.G);
  p.delta_prime = detail::number(j, "delta_prime", p.delta_prime);
  p.n_th = detail::number(j, "n_th", p.n_th);
  p.validate();
  return p;
}

inline json to_json(const PulseSpec& s) {
  return json{{"t_first", s.t_first}, {"width", s.width}, {"area", s.area},
              {"period", s.period},   {"count", s.count}};
}

// {baseline, segments: [[t0, t1, kappa]...], description[, spec]}
inline json to_json(const PulseSchedule& s, const std::optional<PulseSpec>& spec = std::nullopt) {
  json seg = json::array();
  for (const auto& x : s.segments) seg.push_back(json::array({x.t_start, x.t_end, x.kappa}));
  json j{{"baseline", s.baseline}, {"segments", seg}, {"description", to_string(s.kind)}};
  if (spec) j["spec"] = to_json(*spec);
  return j;
}

inline PulseSchedule schedule_from_json(const json& j) {
  detail::reject_unknown(j, {"baseline", "segments", "description", "spec", "protocol"},
                         "schedule");
  PulseSchedule s;
  if (!j.contains("baseline")) throw ConfigError("explicit schedule needs 'baseline'");
  s.baseline = detail::number(j, "baseline", 0.0);
  if (j.contains("description"))
    s.kind = schedule_kind_from_string(j.at("description").get<std::string>());
  if (j.contains("segments")) {
    if (!j.at("segments").is_array()) throw ConfigError("'segments' must be an array");
    for (const auto& x : j.at("segments")) {
      if (!x.is_array() || x.size() != 3)
        throw ConfigError("each segment must be [t_start, t_end, kappa]");
      s.segments.push_back({x[0].get<double>(), x[1].get<double>(), x[2].get<double>()});
    }
  }
  s.validate();
  return s;
}

inline json to_json(const ScheduleConfig& c) {
  if (c.protocol == "explicit") {
    json j = to_json(*c.explicit_schedule);
    j["protocol"] = "explicit";
    return j;
  }
  json j{{"protocol", c.protocol}};
  if (c.t_first) j["t_first"] = *c.t_first;
  if (c.width) j["width"] = *c.width;
  if (c.period) j["period"] = *c.period;
  j["area"] = c.area;
  j["count"] = c.count;
  j["shape"] = c.shape;
  j["steps"] = c.steps;
  json w = json::array();
  for (const auto& x : c.windows) w.push_back(detail::window_to_json(x));
  j["windows"] = w;
  return j;
}

inline ScheduleConfig schedule_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("schedule must be a JSON object");
  ScheduleConfig c;
  if (j.contains("segments") || j.value("protocol", "") == "explicit") {
    c.protocol = "explicit";
    json body = j;
    body.erase("protocol");
    c.explicit_schedule = schedule_from_json(body);
    return c;
  }
  detail::reject_unknown(
      j, {"protocol", "t_first", "width", "period", "area", "count", "shape", "steps", "windows"},
      "schedule");
  c.protocol = j.value("protocol", c.protocol);
  static const std::vector<std::string> protocols{"constant",      "single",
                                                  "periodic",      "synchronized",
                                                  "synchronized_periodic", "smoothed"};
  if (std::find(protocols.begin(), protocols.end(), c.protocol) == protocols.end())
    throw ConfigError("unknown schedule protocol '" + c.protocol + "'");
  auto opt = [&](const char* k, std::optional<double>& dst) {
    if (j.contains(k) && !j.at(k).is_null()) dst = detail::number(j, k, 0.0);
  };
  opt("t_first", c.t_first);
  opt("width", c.width);
  opt("period", c.period);
  c.area = detail::number(j, "area", c.area);
  if (j.contains("count")) c.count = j.at("count").get<std::size_t>();
  c.shape = j.value("shape", c.shape);
  (void)pulse_shape_from_string(c.shape);
  if (j.contains("steps")) c.steps = j.at("steps").get<std::size_t>();
  if (j.contains("windows")) {
    if (!j.at("windows").is_array()) throw ConfigError("'windows' must be an array");
    for (const auto& w : j.at("windows")) c.windows.push_back(detail::window_from_json(w));
  }
  return c;
}

inline json to_json(const ExperimentConfig& c) {
  return json{{"params", to_json(c.params)},
              {"schedule", to_json(c.schedule)},
              {"run",
               {{"t_end", c.run.t_end},
                {"sample_dt", c.run.sample_dt},
                {"rtol", c.run.rtol},
                {"atol", c.run.atol}}},
              {"outputs",
               {{"csv", c.outputs.csv},
                {"summary", c.outputs.summary},
                {"plot_script", c.outputs.plot_script}}}};
}

inline ExperimentConfig config_from_json(const json& j) {
  detail::reject_unknown(j, {"params", "schedule", "run", "outputs"}, "config");
  ExperimentConfig c;
  if (j.contains("params")) c.params = params_from_json(j.at("params"));
  if (j.contains("schedule")) c.schedule = schedule_config_from_json(j.at("schedule"));
  if (j.contains("run")) {
    const auto& r = j.at("run");
    detail::reject_unknown(r, {"t_end", "sample_dt", "rtol", "atol"}, "run");
    c.run.t_end = detail::number(r, "t_end", c.run.t_end);
    c.run.sample_dt = detail::number(r, "sample_dt", c.run.sample_dt);
    c.run.rtol = detail::number(r, "rtol", c.run.rtol);
    c.run.atol = detail::number(r, "atol", c.run.atol);
  }
  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    detail::reject_unknown(o, {"csv", "summary", "plot_script"}, "outputs");
    c.outputs.csv = o.value("csv", c.outputs.csv);
    c.outputs.summary = o.value("summary", c.outputs.summary);
    c.outputs.plot_script = o.value("plot_script", c.outputs.plot_script);
  }
  if (!(c.run.t_end >= 0.0)) throw ConfigError("run.t_end must be >= 0");
  if (!(c.run.sample_dt > 0.0)) throw ConfigError("run.sample_dt must be > 0");
  if (!(c.run.rtol > 0.0) || !(c.run.atol > 0.0)) throw ConfigError("run tolerances must be > 0");
  return c;
}

inline json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + origin + ": " + e.what());
  }
}

inline json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path.string());
}

// Applies "a.b.c=value" to a JSON document. The value is read as JSON when it
// parses (numbers, booleans, arrays, null), otherwise as a plain string.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override key '" + key + "' descends into a value");
      *node = json::object();
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
}

// 64-bit FNV-1a of the canonical (compact) serialization.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

// Writes through a temporary file in the same directory and renames it over
// the target, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

// JSON numbers that may be undefined (NaN / inf) are written as null.
inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline json finite_or_null(const std::optional<double>& v) {
  return v ? finite_or_null(*v) : json(nullptr);
}

}  // namespace dyncool
