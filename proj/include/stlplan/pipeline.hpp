#pragma once

// End-to-end planning: routing, seeding, mission compilation, optimization and
// headings, plus the CSV/JSON artifacts each stage emits.

#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "stlplan/dynamics.hpp"
#include "stlplan/error.hpp"
#include "stlplan/headings.hpp"
#include "stlplan/mission.hpp"
#include "stlplan/optimizer.hpp"
#include "stlplan/scenario.hpp"
#include "stlplan/warmstart.hpp"

namespace stlplan {

enum class Mode { Basic, Attrition };

inline Mode mode_from_string(const std::string& s) {
  if (s == "basic") return Mode::Basic;
  if (s == "attrition" || s == "attrition-aware") return Mode::Attrition;
  throw Error("unknown mode '" + s + "'");
}

inline const char* mode_name(Mode m) { return m == Mode::Basic ? "basic" : "attrition"; }

struct PipelineConfig {
  OptimizerConfig optimizer;
  SeedOptions seed;
};

// Optimizer defaults taken from the scenario thresholds.
inline PipelineConfig default_config(const Scenario& sc) {
  PipelineConfig c;
  c.optimizer.lambda = sc.thresholds.lambda;
  c.optimizer.zeta = sc.thresholds.zeta;
  return c;
}

struct PipelineOutput {
  Mode mode = Mode::Basic;
  InspectionGraph graph;
  RoutePlan plan;
  SeedResult seed;
  Mission mission;
  PlanResult result;
  std::vector<std::vector<double>> headings;
  std::vector<std::pair<std::string, double>> timings;  // stage, wall-clock seconds
};

namespace detail {

template <class F>
auto stage(const char* name, std::vector<std::pair<std::string, double>>& timings, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  auto record = [&] {
    timings.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      record();
    } else {
      auto r = f();
      record();
      return r;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

// Keeps the first N steps of an overlong seed.
inline Trace truncate(const Trace& tr, long N) {
  auto acc = extract_accelerations(tr);
  for (auto& a : acc) a.resize(static_cast<std::size_t>(N));
  return rollout(initial_states(tr), acc, tr.Ts);
}

}  // namespace detail

inline PipelineOutput run_pipeline(const Scenario& sc, Mode mode, const PipelineConfig& cfg) {
  PipelineOutput out;
  out.mode = mode;
  auto& tm = out.timings;
  detail::stage("validate", tm, [&] { sc.validate(); });
  out.graph = detail::stage("build_graph", tm, [&] { return build_graph(sc); });
  out.plan = detail::stage("solve_assignment", tm, [&] { return solve_assignment(out.graph); });
  out.plan = detail::stage("stitch_subtours", tm, [&] { return stitch_subtours(out.plan, out.graph); });
  out.seed = detail::stage("seed_trajectories", tm, [&] {
    SeedResult s = seed_trajectories(out.plan, out.graph, sc, cfg.seed);
    if (s.horizon_overflow) s.trace = detail::truncate(s.trace, sc.steps());
    return s;
  });
  out.mission = detail::stage("compile_mission", tm, [&] { return compile_mission(sc); });
  out.result = detail::stage("optimize", tm, [&] {
    const WeightMap* w = mode == Mode::Attrition ? &out.mission.weights : nullptr;
    return optimize(out.mission.formula, w, out.seed.trace, sc, cfg.optimizer);
  });
  out.headings = detail::stage("assign_headings", tm, [&] { return assign_headings(out.result.trace, sc, out.plan, out.graph); });
  return out;
}

// ---------------------------------------------------------------------------
// Trace CSV
// ---------------------------------------------------------------------------

// Columns: t, drone, px, py, pz, vx, vy, vz, ax, ay, az. The last sample has no
// control and carries zero acceleration. `digits` significant digits per value.
inline void write_trace_csv(std::ostream& os, const Trace& tr, int digits = 17) {
  os << "t,drone,px,py,pz,vx,vy,vz,ax,ay,az\n";
  char buf[64];
  auto put = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    os << ',' << buf;
  };
  for (std::size_t d = 0; d < tr.drone_count(); ++d) {
    const auto& t = tr.drones[d];
    for (std::size_t k = 0; k < t.p.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.*g", digits, static_cast<double>(k) * tr.Ts);
      os << buf << ',' << d;
      for (int j = 0; j < 3; ++j) put(t.p[k][j]);
      for (int j = 0; j < 3; ++j) put(t.v[k][j]);
      const Vec3 a = k < t.a.size() ? t.a[k] : Vec3{};
      for (int j = 0; j < 3; ++j) put(a[j]);
      os << '\n';
    }
  }
}

// Reads a trace written by write_trace_csv. Ts comes from the time column.
inline Trace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("t,drone,px", 0) != 0) throw ParseError("trace CSV: missing header");
  std::map<int, std::vector<std::pair<double, std::array<double, 9>>>> rows;
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError("trace CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (v.size() != 11) throw ParseError("trace CSV line " + std::to_string(lineno) + ": expected 11 columns");
    std::array<double, 9> x{};
    std::copy(v.begin() + 2, v.end(), x.begin());
    rows[static_cast<int>(v[1])].push_back({v[0], x});
  }
  Trace tr;
  if (rows.empty()) return tr;
  const auto& first = rows.begin()->second;
  if (first.size() < 2) throw ParseError("trace CSV: need at least two samples");
  tr.Ts = first[1].first - first[0].first;
  int expect = 0;
  for (const auto& [d, r] : rows) {
    if (d != expect++) throw ParseError("trace CSV: drone ids must be 0..n-1");
    if (r.size() != first.size()) throw ParseError("trace CSV: drones differ in sample count");
    DroneTrack t;
    for (std::size_t k = 0; k < r.size(); ++k) {
      const auto& x = r[k].second;
      t.p.push_back({x[0], x[1], x[2]});
      t.v.push_back({x[3], x[4], x[5]});
      if (k + 1 < r.size()) t.a.push_back({x[6], x[7], x[8]});
    }
    tr.drones.push_back(std::move(t));
  }
  // The time column is rounded; recover the period from the full span.
  tr.Ts = (first.back().first - first.front().first) / static_cast<double>(first.size() - 1);
  return tr;
}

inline void write_headings_csv(std::ostream& os, const std::vector<std::vector<double>>& h, double Ts) {
  os << "t,drone,yaw\n";
  char buf[64];
  for (std::size_t d = 0; d < h.size(); ++d)
    for (std::size_t k = 0; k < h[d].size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.9g,%zu,%.9g\n", static_cast<double>(k) * Ts, d, h[d][k]);
      os << buf;
    }
}

inline nlohmann::json timings_json(const std::vector<std::pair<std::string, double>>& t) {
  nlohmann::json j = nlohmann::json::object();
  double total = 0.0;
  for (const auto& [s, v] : t) {
    j[s] = v;
    total += v;
  }
  j["total"] = total;
  return j;
}

// Writes every artifact of a pipeline run into `dir` (which must exist).
inline void write_outputs(const std::string& dir, const PipelineOutput& o, const Scenario& sc) {
  auto open = [&](const std::string& name) {
    std::ofstream f(dir + "/" + name);
    if (!f) throw Error("cannot write " + dir + "/" + name);
    return f;
  };
  open("routes.json") << to_json(o.plan).dump(2) << '\n';
  {
    auto f = open("graph.csv");
    write_graph_csv(f, o.graph);
  }
  {
    auto f = open("seed_trace.csv");
    write_trace_csv(f, o.seed.trace);
  }
  {
    auto f = open("trace.csv");
    write_trace_csv(f, o.result.trace);
  }
  {
    auto f = open("headings.csv");
    write_headings_csv(f, o.headings, sc.timing.T_s);
  }
  {
    auto f = open("history.csv");
    write_history_csv(f, o.result.history);
  }
  nlohmann::json r = to_json(o.result);
  r["mode"] = mode_name(o.mode);
  r["seed_horizon_overflow"] = o.seed.horizon_overflow;
  r["timings"] = timings_json(o.timings);
  open("report.json") << r.dump(2) << '\n';
}

}  // namespace stlplan
