#pragma once

// Compiles an inspection scenario into the mission formula: per-drone safety,
// target and blade coverage windows, return home and stay home, together with
// the class weight map used by the attrition-aware mode.

#include <string>
#include <vector>

#include "stlplan/robustness.hpp"
#include "stlplan/scenario.hpp"
#include "stlplan/stl_ast.hpp"

namespace stlplan {

struct Mission {
  Formula formula;
  WeightMap weights;
  std::vector<Formula> conjuncts;  // top-level operands in order
};

inline double dist_to_blade(const Vec3& p, const BladeSide& side) { return dist_to_segment(p, side.segment); }

namespace detail {
inline std::string tag(const char* cls, std::size_t i) { return std::string(cls) + "[" + std::to_string(i) + "]"; }
}  // namespace detail

// Box membership for drone d on every axis.
inline Formula in_box(int d, const Box& b, std::string label = "") {
  return atom(Predicate::inside(d, b), std::move(label));
}

inline Mission compile_mission(const Scenario& sc) {
  const auto& tm = sc.timing;
  const auto& th = sc.thresholds;
  if (tm.T_ins > tm.T_N) throw InfeasibleWindow("T_ins exceeds the mission time");
  if (tm.T_bla > tm.T_N) throw InfeasibleWindow("T_bla exceeds the mission time");
  if (tm.T_N < 2.0) throw InfeasibleWindow("mission time must allow the [1, T_N - 1] home windows");
  const std::size_t n = sc.drone_count();
  using detail::tag;

  Mission m;
  std::vector<double> top_weights;

  // Safety: workspace, obstacles, mutual distance, for the whole mission.
  for (std::size_t d = 0; d < n; ++d) {
    const int di = static_cast<int>(d);
    std::vector<Formula> parts;
    std::vector<double> w;
    parts.push_back(in_box(di, sc.workspace, tag("ws", d)));
    w.push_back(sc.weights.ws);
    if (!sc.obstacles.empty()) {
      std::vector<Formula> obs;
      for (std::size_t q = 0; q < sc.obstacles.size(); ++q)
        obs.push_back(atom(Predicate::outside(di, sc.obstacles[q])));
      parts.push_back(obs.size() == 1 ? atom(*obs[0]->predicate, tag("obs", d)) : conj(obs, tag("obs", d)));
      w.push_back(sc.weights.obs);
    }
    if (n > 1) {
      std::vector<Formula> dis;
      for (std::size_t o = 0; o < n; ++o)
        if (o != d) dis.push_back(atom(Predicate::mutual_distance(di, static_cast<int>(o), th.gamma_dis)));
      parts.push_back(dis.size() == 1 ? atom(*dis[0]->predicate, tag("dis", d)) : conj(dis, tag("dis", d)));
      w.push_back(sc.weights.dis);
    }
    const Formula inner = conj(parts, tag("safe", d));
    m.weights.set(inner->id, w);
    m.conjuncts.push_back(always({0.0, tm.T_N}, inner, tag("safety", d)));
    top_weights.push_back(std::max({sc.weights.ws, sc.obstacles.empty() ? 0.0 : sc.weights.obs,
                                    n > 1 ? sc.weights.dis : 0.0}));
  }

  // Pylon targets: some capable drone stays inside for T_ins.
  for (std::size_t q = 0; q < sc.targets.size(); ++q) {
    std::vector<Formula> who;
    for (std::size_t d = 0; d < n; ++d)
      if (sc.can_serve_target(d, static_cast<int>(q)))
        who.push_back(always({0.0, tm.T_ins}, in_box(static_cast<int>(d), sc.targets[q].box)));
    if (who.empty()) throw NoCapableDrone("no drone may serve target " + std::to_string(q));
    m.conjuncts.push_back(eventually({0.0, tm.T_N - tm.T_ins}, disj(who), tag("target", q)));
    top_weights.push_back(sc.weights.tr);
  }

  // Blade sides: inside the corridor and within the standoff band for T_bla.
  for (std::size_t q = 0; q < sc.blades.size(); ++q) {
    const auto& side = sc.blades[q];
    std::vector<Formula> who;
    for (std::size_t d = 0; d < n; ++d) {
      if (!sc.can_serve_blade(d, side.blade)) continue;
      const int di = static_cast<int>(d);
      const Formula cover =
          conj({in_box(di, side.box), atom(Predicate::blade_band(di, side.segment, th.gamma_bla, th.epsilon))});
      who.push_back(always({0.0, tm.T_bla}, cover));
    }
    if (who.empty()) throw NoCapableDrone("no drone may serve blade side " + std::to_string(q));
    m.conjuncts.push_back(eventually({0.0, tm.T_N - tm.T_bla}, disj(who), tag("blade", q)));
    top_weights.push_back(sc.weights.bla);
  }

  // Mission completion: reach home, and once home stay home.
  for (std::size_t d = 0; d < n; ++d) {
    m.conjuncts.push_back(eventually({1.0, tm.T_N}, in_box(static_cast<int>(d), sc.fleet[d].home), tag("home", d)));
    top_weights.push_back(sc.weights.hm);
  }
  for (std::size_t d = 0; d < n; ++d) {
    const int di = static_cast<int>(d);
    const Formula stay = implies(in_box(di, sc.fleet[d].home), next({0.0, tm.T_s}, in_box(di, sc.fleet[d].home)));
    m.conjuncts.push_back(always({1.0, tm.T_N - 1.0}, stay, tag("stay_home", d)));
    top_weights.push_back(sc.weights.hm);
  }

  m.formula = conj(m.conjuncts, "mission");
  m.weights.set(m.formula->id, top_weights);
  return m;
}

// Exact robustness of "always over [0, span]" applied to a sub-formula: the
// worst value of that clause along the trace.
inline double clause_minimum(const Formula& node, const Trace& tr, double span) {
  return eval_exact(always({0.0, span}, node), tr);
}

}  // namespace stlplan
