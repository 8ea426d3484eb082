#pragma once

// Inspection scenario: geometry, fleet, timing, weights and thresholds, with
// strict JSON ingestion and validation.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "stlplan/dynamics.hpp"
#include "stlplan/error.hpp"
#include "stlplan/geometry.hpp"

namespace stlplan {

struct TargetArea {
  Box box;
  double yaw = 0.0;  // heading held while dwelling, rad
};

// One side of a blade: the leading-edge to rotor-shaft segment and the
// corridor box the drone must stay in while covering it.
struct BladeSide {
  Segment segment;
  Box box;
  int blade = 0;  // sides sharing this id belong to one blade
};

struct DroneSpec {
  Vec3 depot{};
  Box home;
  DroneLimits limits;
  std::optional<std::vector<int>> targets;  // servable target indices; all when unset
  std::optional<std::vector<int>> blades;   // servable blade ids; all when unset
};

struct Timing {
  double T_N = 13.0;
  double T_ins = 1.0;
  double T_bla = 1.5;
  double T_s = 0.05;
};

struct ClassWeights {
  double ws = 2.0;
  double obs = 4.0;
  double dis = 3.0;
  double tr = 1.0;
  double bla = 1.0;
  double hm = 1.0;
};

struct Thresholds {
  double gamma_dis = 1.0;
  double gamma_bla = 2.5;
  double epsilon = 1.0;
  double zeta = 0.2;
  double lambda = 10.0;
  double eta = 1.0;
};

struct Scenario {
  std::string name;
  Box workspace;
  std::vector<Box> obstacles;
  std::vector<TargetArea> targets;
  std::vector<BladeSide> blades;
  std::vector<DroneSpec> fleet;
  Timing timing;
  ClassWeights weights;
  Thresholds thresholds;

  std::size_t drone_count() const { return fleet.size(); }
  long steps() const { return std::lround(timing.T_N / timing.T_s); }

  // Distinct blade ids in ascending order.
  std::vector<int> blade_ids() const {
    std::set<int> ids;
    for (const auto& b : blades) ids.insert(b.blade);
    return {ids.begin(), ids.end()};
  }

  bool can_serve_target(std::size_t d, int q) const {
    const auto& t = fleet[d].targets;
    return !t || std::find(t->begin(), t->end(), q) != t->end();
  }
  bool can_serve_blade(std::size_t d, int blade) const {
    const auto& b = fleet[d].blades;
    return !b || std::find(b->begin(), b->end(), blade) != b->end();
  }

  void validate() const;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace detail {

inline void require_box(const Box& b, const std::string& field) {
  for (int j = 0; j < 3; ++j)
    if (!std::isfinite(b.lo[j]) || !std::isfinite(b.hi[j])) throw ValidationError(field, "non-finite vertex");
  if (b.degenerate()) throw ValidationError(field, "box must satisfy min < max on every axis");
}

inline void require_multiple(double t, double Ts, const std::string& field) {
  if (!(t > 0.0)) throw ValidationError(field, "must be positive");
  const double x = t / Ts;
  if (std::abs(x - std::round(x)) > 1e-9 * std::max(1.0, x))
    throw ValidationError(field, "must be a multiple of the sampling period");
}

}  // namespace detail

inline void Scenario::validate() const {
  using detail::require_box;
  require_box(workspace, "workspace");
  for (std::size_t i = 0; i < obstacles.size(); ++i) require_box(obstacles[i], "obstacles[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < targets.size(); ++i) require_box(targets[i].box, "targets[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < blades.size(); ++i) {
    const std::string f = "blades[" + std::to_string(i) + "]";
    require_box(blades[i].box, f + ".box");
    if (!(blades[i].segment.length() > 0.0)) throw ValidationError(f, "leading edge and rotor shaft coincide");
  }
  if (fleet.empty()) throw ValidationError("fleet", "at least one drone is required");
  for (std::size_t d = 0; d < fleet.size(); ++d) {
    const std::string f = "fleet[" + std::to_string(d) + "]";
    require_box(fleet[d].home, f + ".home");
    if (!workspace.contains(fleet[d].depot)) throw ValidationError(f + ".depot", "depot lies outside the workspace");
    for (const auto& o : obstacles)
      if (o.contains(fleet[d].depot)) throw ValidationError(f + ".depot", "depot lies inside an obstacle");
    try {
      fleet[d].limits.validate();
    } catch (const Error& e) {
      throw ValidationError(f + ".limits", e.what());
    }
  }

  if (!(timing.T_s > 0.0)) throw ValidationError("timing.T_s", "must be positive");
  detail::require_multiple(timing.T_N, timing.T_s, "timing.T_N");
  detail::require_multiple(timing.T_ins, timing.T_s, "timing.T_ins");
  detail::require_multiple(timing.T_bla, timing.T_s, "timing.T_bla");
  if (timing.T_ins > timing.T_N) throw ValidationError("timing.T_ins", "exceeds the mission time T_N");
  if (timing.T_bla > timing.T_N) throw ValidationError("timing.T_bla", "exceeds the mission time T_N");

  const auto& th = thresholds;
  if (!(th.gamma_dis > 0.0)) throw ValidationError("thresholds.gamma_dis", "must be positive");
  if (!(th.epsilon > 0.0)) throw ValidationError("thresholds.epsilon", "must be positive");
  if (!(th.gamma_bla - th.epsilon > 0.0)) throw ValidationError("thresholds.gamma_bla", "gamma_bla - epsilon must be positive");
  if (!(th.lambda > 0.0)) throw ValidationError("thresholds.lambda", "must be positive");
  if (!(th.zeta >= 0.0)) throw ValidationError("thresholds.zeta", "must be non-negative");
  if (!(th.eta > 0.0)) throw ValidationError("thresholds.eta", "must be positive");

  const double ws[] = {weights.ws, weights.obs, weights.dis, weights.tr, weights.bla, weights.hm};
  const char* names[] = {"ws", "obs", "dis", "tr", "bla", "hm"};
  for (int i = 0; i < 6; ++i)
    if (!(ws[i] > 0.0)) throw ValidationError(std::string("weights.") + names[i], "must be positive");
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& path) {
  if (!j.is_object()) throw ParseError(path + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* allowed : keys) ok = ok || k == allowed;
    if (!ok) throw ParseError((path.empty() ? k : path + "." + k) + ": unknown key");
  }
}

inline const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw ParseError(path + "." + key + ": missing");
  return j.at(key);
}

inline double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path + ": expected a number");
  return j.get<double>();
}

inline Vec3 vec(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ParseError(path + ": expected [x, y, z]");
  return {num(j[0], path + "[0]"), num(j[1], path + "[1]"), num(j[2], path + "[2]")};
}

// Accepts either a scalar (same on all axes) or a 3-vector.
inline Vec3 axes(const json& j, const std::string& path) {
  if (j.is_number()) {
    const double x = j.get<double>();
    return {x, x, x};
  }
  return vec(j, path);
}

inline Box box(const json& j, const std::string& path) {
  allow_keys(j, {"min", "max"}, path);
  return {vec(field(j, "min", path), path + ".min"), vec(field(j, "max", path), path + ".max")};
}

inline std::vector<int> int_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path + ": expected an array of integers");
  std::vector<int> out;
  for (const auto& x : j) {
    if (!x.is_number_integer()) throw ParseError(path + ": expected an array of integers");
    out.push_back(x.get<int>());
  }
  return out;
}

inline json box_json(const Box& b) { return {{"min", {b.lo[0], b.lo[1], b.lo[2]}}, {"max", {b.hi[0], b.hi[1], b.hi[2]}}}; }
inline json v3(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

}  // namespace detail

// Parses and validates a scenario document. Unknown keys are rejected.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  using namespace detail;
  allow_keys(j, {"name", "workspace", "obstacles", "targets", "blades", "fleet", "timing", "weights", "thresholds"}, "");
  Scenario s;
  s.name = j.value("name", "");
  s.workspace = box(field(j, "workspace", ""), "workspace");

  if (j.contains("obstacles")) {
    const auto& arr = j.at("obstacles");
    if (!arr.is_array()) throw ParseError("obstacles: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) s.obstacles.push_back(box(arr[i], "obstacles[" + std::to_string(i) + "]"));
  }
  if (j.contains("targets")) {
    const auto& arr = j.at("targets");
    if (!arr.is_array()) throw ParseError("targets: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = "targets[" + std::to_string(i) + "]";
      allow_keys(arr[i], {"min", "max", "yaw"}, p);
      TargetArea t;
      t.box = {vec(field(arr[i], "min", p), p + ".min"), vec(field(arr[i], "max", p), p + ".max")};
      if (arr[i].contains("yaw")) t.yaw = num(arr[i].at("yaw"), p + ".yaw");
      s.targets.push_back(t);
    }
  }
  if (j.contains("blades")) {
    const auto& arr = j.at("blades");
    if (!arr.is_array()) throw ParseError("blades: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = "blades[" + std::to_string(i) + "]";
      allow_keys(arr[i], {"leading_edge", "rotor_shaft", "box", "blade"}, p);
      BladeSide b;
      b.segment = {vec(field(arr[i], "leading_edge", p), p + ".leading_edge"),
                   vec(field(arr[i], "rotor_shaft", p), p + ".rotor_shaft")};
      b.box = box(field(arr[i], "box", p), p + ".box");
      if (arr[i].contains("blade")) b.blade = arr[i].at("blade").get<int>();
      s.blades.push_back(b);
    }
  }
  {
    const auto& arr = field(j, "fleet", "");
    if (!arr.is_array()) throw ParseError("fleet: expected an array");
    for (std::size_t d = 0; d < arr.size(); ++d) {
      const std::string p = "fleet[" + std::to_string(d) + "]";
      allow_keys(arr[d], {"depot", "home", "v_max", "a_max", "v_relaxed", "a_relaxed", "targets", "blades"}, p);
      DroneSpec spec;
      spec.depot = vec(field(arr[d], "depot", p), p + ".depot");
      spec.home = box(field(arr[d], "home", p), p + ".home");
      spec.limits.v_max = axes(field(arr[d], "v_max", p), p + ".v_max");
      spec.limits.a_max = axes(field(arr[d], "a_max", p), p + ".a_max");
      spec.limits.v_relaxed = arr[d].contains("v_relaxed") ? axes(arr[d].at("v_relaxed"), p + ".v_relaxed") : Vec3{2, 2, 2};
      spec.limits.a_relaxed = arr[d].contains("a_relaxed") ? axes(arr[d].at("a_relaxed"), p + ".a_relaxed") : Vec3{5, 5, 5};
      if (arr[d].contains("targets")) spec.targets = int_list(arr[d].at("targets"), p + ".targets");
      if (arr[d].contains("blades")) spec.blades = int_list(arr[d].at("blades"), p + ".blades");
      s.fleet.push_back(spec);
    }
  }
  {
    const auto& t = field(j, "timing", "");
    allow_keys(t, {"T_N", "T_ins", "T_bla", "T_s"}, "timing");
    s.timing.T_N = num(field(t, "T_N", "timing"), "timing.T_N");
    s.timing.T_ins = num(field(t, "T_ins", "timing"), "timing.T_ins");
    s.timing.T_bla = num(field(t, "T_bla", "timing"), "timing.T_bla");
    s.timing.T_s = num(field(t, "T_s", "timing"), "timing.T_s");
  }
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    allow_keys(w, {"ws", "obs", "dis", "tr", "bla", "hm"}, "weights");
    auto opt = [&](const char* k, double& dst) {
      if (w.contains(k)) dst = num(w.at(k), std::string("weights.") + k);
    };
    opt("ws", s.weights.ws);
    opt("obs", s.weights.obs);
    opt("dis", s.weights.dis);
    opt("tr", s.weights.tr);
    opt("bla", s.weights.bla);
    opt("hm", s.weights.hm);
  }
  {
    const auto& t = field(j, "thresholds", "");
    allow_keys(t, {"gamma_dis", "gamma_bla", "epsilon", "zeta", "lambda", "eta"}, "thresholds");
    auto req = [&](const char* k, double& dst) { dst = num(field(t, k, "thresholds"), std::string("thresholds.") + k); };
    req("gamma_dis", s.thresholds.gamma_dis);
    req("gamma_bla", s.thresholds.gamma_bla);
    req("epsilon", s.thresholds.epsilon);
    req("zeta", s.thresholds.zeta);
    req("lambda", s.thresholds.lambda);
    req("eta", s.thresholds.eta);
  }
  s.validate();
  return s;
}

inline nlohmann::json to_json(const Scenario& s) {
  using namespace detail;
  json j;
  if (!s.name.empty()) j["name"] = s.name;
  j["workspace"] = box_json(s.workspace);
  j["obstacles"] = json::array();
  for (const auto& o : s.obstacles) j["obstacles"].push_back(box_json(o));
  j["targets"] = json::array();
  for (const auto& t : s.targets) {
    json e = box_json(t.box);
    e["yaw"] = t.yaw;
    j["targets"].push_back(e);
  }
  j["blades"] = json::array();
  for (const auto& b : s.blades)
    j["blades"].push_back({{"leading_edge", v3(b.segment.a)}, {"rotor_shaft", v3(b.segment.b)}, {"box", box_json(b.box)}, {"blade", b.blade}});
  j["fleet"] = json::array();
  for (const auto& d : s.fleet) {
    json e{{"depot", v3(d.depot)},         {"home", box_json(d.home)},           {"v_max", v3(d.limits.v_max)},
           {"a_max", v3(d.limits.a_max)}, {"v_relaxed", v3(d.limits.v_relaxed)}, {"a_relaxed", v3(d.limits.a_relaxed)}};
    if (d.targets) e["targets"] = *d.targets;
    if (d.blades) e["blades"] = *d.blades;
    j["fleet"].push_back(e);
  }
  j["timing"] = {{"T_N", s.timing.T_N}, {"T_ins", s.timing.T_ins}, {"T_bla", s.timing.T_bla}, {"T_s", s.timing.T_s}};
  j["weights"] = {{"ws", s.weights.ws}, {"obs", s.weights.obs}, {"dis", s.weights.dis},
                  {"tr", s.weights.tr}, {"bla", s.weights.bla}, {"hm", s.weights.hm}};
  const auto& th = s.thresholds;
  j["thresholds"] = {{"gamma_dis", th.gamma_dis}, {"gamma_bla", th.gamma_bla}, {"epsilon", th.epsilon},
                     {"zeta", th.zeta},           {"lambda", th.lambda},       {"eta", th.eta}};
  return j;
}

// Reads, parses and validates a scenario file. Syntax errors report the line.
inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw ParseError(path + ":" + std::to_string(line) + ": " + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace stlplan
