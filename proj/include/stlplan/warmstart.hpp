#pragma once

// Inspection graph, exact multi-depot routing (task partitions + Held-Karp),
// plan verification, subtour stitching and seed trajectory generation.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "stlplan/dynamics.hpp"
#include "stlplan/error.hpp"
#include "stlplan/scenario.hpp"
#include "stlplan/trace.hpp"

namespace stlplan {

// Weight for an edge into a task the drone may not serve.
inline constexpr double kUnservable = 1e6;

struct TaskVertex {
  enum class Kind { Target, Blade };
  Kind kind = Kind::Target;
  int index = 0;  // target index or blade id
  Vec3 position{};
};

// Vertices are numbered tasks first (0..tau-1), then one depot per drone
// (tau..tau+delta-1). Each drone only sees the tasks and its own depot, so the
// weights are stored per drone as a (tau+1)^2 matrix whose last row/column is
// that drone's depot.
struct InspectionGraph {
  std::vector<TaskVertex> tasks;
  std::vector<Vec3> depots;
  std::vector<std::vector<std::vector<double>>> local;

  std::size_t task_count() const { return local.empty() ? tasks.size() : local.front().size() - 1; }
  std::size_t drone_count() const { return local.size(); }
  int depot_vertex(std::size_t d) const { return static_cast<int>(task_count() + d); }
  bool is_depot(int v) const { return v >= static_cast<int>(task_count()); }

  // Weight of the directed edge i -> j for drone d, global vertex ids.
  // Foreign depots are unreachable; a vertex to itself costs nothing.
  double weight(std::size_t d, int i, int j) const {
    if (i == j) return 0.0;
    const auto li = to_local(d, i), lj = to_local(d, j);
    if (li < 0 || lj < 0) return std::numeric_limits<double>::infinity();
    return local[d][li][lj];
  }

  bool capable(std::size_t d, int task) const { return local[d][task_count()][task] < kUnservable; }

  // Unordered vertex pairs carrying a weight for drone d.
  std::size_t edge_count(std::size_t) const {
    const std::size_t n = task_count() + 1;
    return n * (n - 1) / 2;
  }

  // Builds a graph directly from per-drone local matrices; positions stay zero.
  static InspectionGraph from_weights(std::vector<std::vector<std::vector<double>>> w) {
    InspectionGraph g;
    g.local = std::move(w);
    const std::size_t tau = g.local.empty() ? 0 : g.local.front().size() - 1;
    for (const auto& m : g.local) {
      if (m.size() != tau + 1) throw LengthMismatch("weight matrices must share one size");
      for (const auto& row : m)
        if (row.size() != tau + 1) throw LengthMismatch("weight matrices must be square");
    }
    g.tasks.resize(tau);
    for (std::size_t i = 0; i < tau; ++i) g.tasks[i].index = static_cast<int>(i);
    g.depots.resize(g.local.size());
    return g;
  }

 private:
  int to_local(std::size_t d, int v) const {
    const int tau = static_cast<int>(task_count());
    if (v >= 0 && v < tau) return v;
    return v == depot_vertex(d) ? tau : -1;
  }
};

inline InspectionGraph build_graph(const Scenario& sc) {
  InspectionGraph g;
  for (std::size_t q = 0; q < sc.targets.size(); ++q)
    g.tasks.push_back({TaskVertex::Kind::Target, static_cast<int>(q), sc.targets[q].box.center()});
  for (int id : sc.blade_ids()) {
    Vec3 mid{};
    int sides = 0;
    for (const auto& b : sc.blades)
      if (b.blade == id) {
        mid = mid + b.segment.midpoint();
        ++sides;
      }
    g.tasks.push_back({TaskVertex::Kind::Blade, id, (1.0 / sides) * mid});
  }
  const std::size_t tau = g.tasks.size();
  for (std::size_t d = 0; d < sc.drone_count(); ++d) {
    const auto& spec = sc.fleet[d];
    g.depots.push_back(spec.depot);
    std::vector<Vec3> pos;
    std::vector<bool> ok;
    for (const auto& t : g.tasks) {
      pos.push_back(t.position);
      ok.push_back(t.kind == TaskVertex::Kind::Target ? sc.can_serve_target(d, t.index) : sc.can_serve_blade(d, t.index));
    }
    pos.push_back(spec.depot);
    ok.push_back(true);
    std::vector<std::vector<double>> m(tau + 1, std::vector<double>(tau + 1, 0.0));
    for (std::size_t i = 0; i <= tau; ++i)
      for (std::size_t j = 0; j <= tau; ++j) {
        if (i == j) continue;
        m[i][j] = (ok[i] && ok[j]) ? time_of_flight(pos[i], pos[j], spec.limits) : kUnservable;
      }
    g.local.push_back(std::move(m));
  }
  return g;
}

// Edge list with one line per drone and ordered vertex pair.
inline void write_graph_csv(std::ostream& os, const InspectionGraph& g) {
  os << "drone,from,to,weight\n";
  for (std::size_t d = 0; d < g.drone_count(); ++d) {
    std::vector<int> verts;
    for (std::size_t i = 0; i < g.task_count(); ++i) verts.push_back(static_cast<int>(i));
    verts.push_back(g.depot_vertex(d));
    for (int i : verts)
      for (int j : verts)
        if (i != j) os << d << ',' << i << ',' << j << ',' << g.weight(d, i, j) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Route plans
// ---------------------------------------------------------------------------

using Route = std::vector<int>;  // global vertex ids, closed at the depot

struct RoutePlan {
  std::vector<Route> routes;                 // one closed tour per drone
  std::vector<std::vector<Route>> subtours;  // extra cycles per drone, first vertex not repeated
  double objective = 0.0;
};

inline double route_cost(const InspectionGraph& g, std::size_t d, const Route& r) {
  double c = 0.0;
  for (std::size_t k = 0; k + 1 < r.size(); ++k) c += g.weight(d, r[k], r[k + 1]);
  return c;
}

inline double cycle_cost(const InspectionGraph& g, std::size_t d, const Route& c) {
  double s = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) s += g.weight(d, c[k], c[(k + 1) % c.size()]);
  return s;
}

inline double plan_cost(const InspectionGraph& g, const RoutePlan& p) {
  double c = 0.0;
  for (std::size_t d = 0; d < p.routes.size(); ++d) {
    c += route_cost(g, d, p.routes[d]);
    if (d < p.subtours.size())
      for (const auto& s : p.subtours[d]) c += cycle_cost(g, d, s);
  }
  return c;
}

inline nlohmann::json to_json(const RoutePlan& p) {
  nlohmann::json j;
  j["routes"] = p.routes;
  j["objective"] = p.objective;
  if (!p.subtours.empty()) j["subtours"] = p.subtours;
  return j;
}

inline RoutePlan route_plan_from_json(const nlohmann::json& j) {
  RoutePlan p;
  p.routes = j.at("routes").get<std::vector<Route>>();
  p.objective = j.at("objective").get<double>();
  if (j.contains("subtours")) p.subtours = j.at("subtours").get<std::vector<std::vector<Route>>>();
  return p;
}

namespace detail {

// Held-Karp table for one drone: f[S][i] is the cheapest path that starts at
// task i, visits every task of S once and ends at the depot (i in S).
struct TourTable {
  std::size_t tau = 0;
  std::vector<double> f;
  std::vector<double> best;  // best closed tour through S, +inf when S holds an unservable task

  double at(std::uint32_t S, std::size_t i) const { return f[static_cast<std::size_t>(S) * tau + i]; }
};

inline TourTable held_karp(const InspectionGraph& g, std::size_t d) {
  const std::size_t tau = g.task_count();
  const int o = g.depot_vertex(d);
  const double inf = std::numeric_limits<double>::infinity();
  const std::uint32_t full = 1u << tau;
  TourTable t;
  t.tau = tau;
  t.f.assign(static_cast<std::size_t>(full) * std::max<std::size_t>(tau, 1), inf);
  t.best.assign(full, inf);
  std::uint32_t servable = 0;
  for (std::size_t i = 0; i < tau; ++i)
    if (g.capable(d, static_cast<int>(i))) servable |= 1u << i;
  t.best[0] = 0.0;
  for (std::uint32_t S = 1; S < full; ++S) {
    if ((S & ~servable) != 0) continue;
    for (std::size_t i = 0; i < tau; ++i) {
      if (!(S >> i & 1u)) continue;
      const std::uint32_t rest = S & ~(1u << i);
      double v;
      if (rest == 0) {
        v = g.weight(d, static_cast<int>(i), o);
      } else {
        v = inf;
        for (std::size_t j = 0; j < tau; ++j)
          if (rest >> j & 1u) v = std::min(v, g.weight(d, static_cast<int>(i), static_cast<int>(j)) + t.at(rest, j));
      }
      t.f[static_cast<std::size_t>(S) * tau + i] = v;
      t.best[S] = std::min(t.best[S], g.weight(d, o, static_cast<int>(i)) + v);
    }
  }
  return t;
}

inline bool near(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

// Lexicographically smallest optimal tour through S.
inline Route reconstruct(const InspectionGraph& g, std::size_t d, const TourTable& t, std::uint32_t S) {
  const int o = g.depot_vertex(d);
  Route r{o};
  int cur = o;
  double target = t.best[S];
  while (S != 0) {
    for (std::size_t i = 0; i < t.tau; ++i) {
      if (!(S >> i & 1u)) continue;
      const double v = t.at(S, i);
      if (near(g.weight(d, cur, static_cast<int>(i)) + v, target)) {
        r.push_back(static_cast<int>(i));
        cur = static_cast<int>(i);
        target = v;
        S &= ~(1u << i);
        break;
      }
    }
  }
  r.push_back(o);
  return r;
}

}  // namespace detail

// Exact optimum over visit-once closed routes: every assignment of tasks to
// capable drones, each drone's tour by Held-Karp. Ties go to the
// lexicographically smallest sequence of routes.
inline RoutePlan solve_assignment(const InspectionGraph& g) {
  const std::size_t tau = g.task_count(), delta = g.drone_count();
  if (tau > 20) throw Error("too many tasks for exact routing");
  std::vector<std::vector<std::size_t>> who(tau);
  for (std::size_t i = 0; i < tau; ++i) {
    for (std::size_t d = 0; d < delta; ++d)
      if (g.capable(d, static_cast<int>(i))) who[i].push_back(d);
    if (who[i].empty()) throw Uncoverable("task " + std::to_string(i) + " has no capable drone");
  }
  std::vector<detail::TourTable> tables;
  for (std::size_t d = 0; d < delta; ++d) tables.push_back(detail::held_karp(g, d));

  std::vector<std::size_t> choice(tau, 0);
  std::vector<std::uint32_t> masks(delta);
  double best_total = std::numeric_limits<double>::infinity();
  std::vector<Route> best_routes;
  auto routes_for = [&](const std::vector<std::uint32_t>& m) {
    std::vector<Route> r;
    for (std::size_t d = 0; d < delta; ++d) r.push_back(detail::reconstruct(g, d, tables[d], m[d]));
    return r;
  };
  while (true) {
    std::fill(masks.begin(), masks.end(), 0u);
    for (std::size_t i = 0; i < tau; ++i) masks[who[i][choice[i]]] |= 1u << i;
    double total = 0.0;
    for (std::size_t d = 0; d < delta; ++d) total += tables[d].best[masks[d]];
    if (best_routes.empty() || (total < best_total && !detail::near(total, best_total))) {
      best_total = total;
      best_routes = routes_for(masks);
    } else if (detail::near(total, best_total)) {
      auto r = routes_for(masks);
      if (r < best_routes) best_routes = std::move(r);
    }
    std::size_t i = 0;
    while (i < tau && ++choice[i] == who[i].size()) choice[i++] = 0;
    if (i == tau) break;
  }
  RoutePlan p;
  p.routes = std::move(best_routes);
  p.objective = plan_cost(g, p);
  return p;
}

// ---------------------------------------------------------------------------
// Verification and stitching
// ---------------------------------------------------------------------------

struct Violation {
  enum class Kind { Coverage, Flow, DepotDegree };
  Kind kind;
  int drone = -1;
  int vertex = -1;
  std::string message;
};

struct PlanCheck {
  bool valid = true;
  std::vector<Violation> violations;
  bool has(Violation::Kind k) const {
    return std::any_of(violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; });
  }
};

// Checks coverage (at least one visit), flow conservation at tasks and one
// departure and one arrival per own depot on the edge counts the plan implies.
inline PlanCheck verify_plan(const RoutePlan& p, const InspectionGraph& g) {
  const std::size_t tau = g.task_count(), delta = g.drone_count();
  const std::size_t nv = tau + delta;
  PlanCheck out;
  auto add = [&](Violation::Kind k, int d, int v, std::string msg) {
    out.violations.push_back({k, d, v, std::move(msg)});
  };
  std::vector<int> visits(tau, 0);
  for (std::size_t d = 0; d < delta; ++d) {
    std::vector<int> in(nv, 0), out_deg(nv, 0);
    auto edge = [&](int a, int b) {
      if (a < 0 || b < 0 || a >= static_cast<int>(nv) || b >= static_cast<int>(nv)) return;
      ++out_deg[a];
      ++in[b];
    };
    if (d < p.routes.size()) {
      const Route& r = p.routes[d];
      for (std::size_t k = 0; k + 1 < r.size(); ++k) edge(r[k], r[k + 1]);
      if (r.size() == 1) edge(r[0], r[0]);
    }
    if (d < p.subtours.size())
      for (const auto& c : p.subtours[d])
        for (std::size_t k = 0; k < c.size(); ++k) edge(c[k], c[(k + 1) % c.size()]);
    for (std::size_t i = 0; i < tau; ++i) {
      visits[i] += in[i];
      if (in[i] != out_deg[i])
        add(Violation::Kind::Flow, static_cast<int>(d), static_cast<int>(i),
            "drone " + std::to_string(d) + " enters task " + std::to_string(i) + " " + std::to_string(in[i]) +
                " times but leaves " + std::to_string(out_deg[i]) + " times");
    }
    for (std::size_t e = 0; e < delta; ++e) {
      const int o = g.depot_vertex(e);
      const int want = e == d ? 1 : 0;
      if (out_deg[o] != want || in[o] != want)
        add(Violation::Kind::DepotDegree, static_cast<int>(d), o,
            "drone " + std::to_string(d) + " departs depot " + std::to_string(o) + " " + std::to_string(out_deg[o]) +
                " times and arrives " + std::to_string(in[o]) + " times");
    }
  }
  for (std::size_t i = 0; i < tau; ++i)
    if (visits[i] < 1)
      add(Violation::Kind::Coverage, -1, static_cast<int>(i), "task " + std::to_string(i) + " is never visited");
  out.valid = out.violations.empty();
  return out;
}

// Splices every extra cycle of a drone into its main tour at the cheapest
// pair of cut edges, trying both orientations of the cycle.
inline RoutePlan stitch_subtours(const RoutePlan& plan, const InspectionGraph& g) {
  RoutePlan p = plan;
  for (std::size_t d = 0; d < p.subtours.size() && d < p.routes.size(); ++d) {
    for (const Route& c : p.subtours[d]) {
      if (c.empty()) continue;
      Route& r = p.routes[d];
      if (r.size() == 1) r.push_back(r[0]);
      const std::size_t m = c.size();
      double best = std::numeric_limits<double>::infinity();
      Route best_route;
      for (std::size_t k = 0; k + 1 < r.size(); ++k) {
        const int u = r[k], v = r[k + 1];
        for (std::size_t i = 0; i < m; ++i) {
          const int x = c[i], y = c[(i + 1) % m];
          const double base = -g.weight(d, u, v) - (m > 1 ? g.weight(d, x, y) : 0.0);
          for (int dir = 0; dir < 2; ++dir) {
            Route path;
            for (std::size_t s = 0; s < m; ++s)
              path.push_back(dir == 0 ? c[(i + 1 + s) % m] : c[(i + m - s) % m]);
            const double delta = base + g.weight(d, u, path.front()) + g.weight(d, path.back(), v);
            if (delta < best - 1e-12) {
              best = delta;
              best_route.assign(r.begin(), r.begin() + static_cast<long>(k) + 1);
              best_route.insert(best_route.end(), path.begin(), path.end());
              best_route.insert(best_route.end(), r.begin() + static_cast<long>(k) + 1, r.end());
            }
          }
        }
      }
      r = std::move(best_route);
    }
    p.subtours[d].clear();
  }
  bool any = false;
  for (const auto& s : p.subtours) any = any || !s.empty();
  if (!any) p.subtours.clear();
  p.objective = plan_cost(g, p);
  return p;
}

// ---------------------------------------------------------------------------
// Seed trajectories
// ---------------------------------------------------------------------------

enum class ReturnPolicy {
  TerminalHover,  // fly home right after the last task and hover there
  LateReturn,     // hold at the last task and reach home exactly at T_N
};

struct SeedOptions {
  ReturnPolicy policy = ReturnPolicy::TerminalHover;
  double sweep_fraction = 0.8;  // share of the reachable sweep length used along a blade
};

struct TaskVisit {
  int task = 0;     // graph vertex
  long start = 0;   // first sample of the dwell or sweep
  long end = 0;     // last sample
};

struct SeedResult {
  Trace trace;
  bool horizon_overflow = false;
  std::vector<std::vector<TaskVisit>> visits;
};

namespace detail {

// Standoff sweep for one blade side: start and end points at distance
// gamma_bla from the segment, on the side of the corridor box centre.
inline std::pair<Vec3, Vec3> blade_sweep(const BladeSide& side, double gamma, const Vec3& v_max, const Vec3& a_max,
                                         double T, double fraction, bool reverse) {
  const Segment& s = side.segment;
  const Vec3 u = (1.0 / s.length()) * (s.b - s.a);
  double param = 0.0;
  const Vec3 c = closest_point_on_segment(side.box.center(), s, &param);
  Vec3 n = side.box.center() - c;
  n = n - dot(n, u) * u;
  if (norm(n) < 1e-12) {
    // Box centred on the segment: pick any perpendicular.
    const Vec3 e = std::abs(u[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    n = e - dot(e, u) * u;
  }
  n = (1.0 / norm(n)) * n;
  double L = 0.5 * s.length();
  for (int j = 0; j < 3; ++j) {
    if (std::abs(u[j]) < 1e-12) continue;
    L = std::min(L, fraction * a_max[j] * T * T / 4.0 / std::abs(u[j]));
    L = std::min(L, fraction * v_max[j] * T / 2.0 / std::abs(u[j]));
  }
  const double len = s.length();
  const double mid = std::clamp(param * len, L / 2.0, len - L / 2.0);
  Vec3 p0 = s.a + (mid - L / 2.0) * u + gamma * n;
  Vec3 p1 = s.a + (mid + L / 2.0) * u + gamma * n;
  if (reverse) std::swap(p0, p1);
  return {p0, p1};
}

struct SeedBuilder {
  const DroneLimits& lim;
  double Ts;
  Vec3 pos;
  std::vector<Vec3> acc;

  void leg(const Vec3& to, long min_steps = 0) {
    auto a = rest_to_rest_profile(pos, to, lim.v_max, lim.a_max, Ts, min_steps);
    acc.insert(acc.end(), a.begin(), a.end());
    pos = to;
  }
  void hold(long n) { acc.insert(acc.end(), static_cast<std::size_t>(std::max(0L, n)), Vec3{}); }
  long now() const { return static_cast<long>(acc.size()); }
};

}  // namespace detail

inline SeedResult seed_trajectories(const RoutePlan& plan, const InspectionGraph& g, const Scenario& sc,
                                    const SeedOptions& opt = {}) {
  const double Ts = sc.timing.T_s;
  const long N = sc.steps();
  const long n_ins = std::lround(sc.timing.T_ins / Ts);
  const long n_bla = std::lround(sc.timing.T_bla / Ts);
  SeedResult out;
  out.trace.Ts = Ts;
  out.visits.resize(sc.drone_count());
  std::vector<std::vector<Vec3>> accels;
  std::vector<DroneState> init;
  std::size_t longest = static_cast<std::size_t>(N);
  for (std::size_t d = 0; d < sc.drone_count(); ++d) {
    const auto& spec = sc.fleet[d];
    detail::SeedBuilder b{spec.limits, Ts, spec.depot, {}};
    const Route empty{g.depot_vertex(d), g.depot_vertex(d)};
    const Route& r = d < plan.routes.size() ? plan.routes[d] : empty;
    for (std::size_t k = 1; k + 1 < r.size(); ++k) {
      const TaskVertex& t = g.tasks.at(static_cast<std::size_t>(r[k]));
      if (t.kind == TaskVertex::Kind::Target) {
        b.leg(sc.targets[static_cast<std::size_t>(t.index)].box.center());
        const long s = b.now();
        b.hold(n_ins);
        out.visits[d].push_back({r[k], s, b.now()});
      } else {
        int side_no = 0;
        for (const auto& side : sc.blades) {
          if (side.blade != t.index) continue;
          const auto [p0, p1] = detail::blade_sweep(side, sc.thresholds.gamma_bla, spec.limits.v_max, spec.limits.a_max,
                                                    sc.timing.T_bla, opt.sweep_fraction, side_no++ % 2 == 1);
          b.leg(p0);
          const long s = b.now();
          b.leg(p1, n_bla);
          out.visits[d].push_back({r[k], s, b.now()});
        }
      }
    }
    // A drone already inside its home box after its last task hovers there.
    if (!spec.home.contains(b.pos)) {
      long home_steps = 0;
      for (int j = 0; j < 3; ++j)
        home_steps = std::max(home_steps, axis_profile_steps(spec.depot[j] - b.pos[j], spec.limits.v_max[j],
                                                             spec.limits.a_max[j], Ts));
      if (opt.policy == ReturnPolicy::LateReturn) b.hold(N - b.now() - home_steps);
      b.leg(spec.depot);
    }
    if (b.now() > N) out.horizon_overflow = true;
    b.hold(N - b.now());
    longest = std::max(longest, b.acc.size());
    accels.push_back(project_controls(std::move(b.acc), spec.limits.a_max));
    init.push_back({spec.depot, {}});
  }
  // Overflowing seeds are kept unscaled; shorter drones hover to the common length.
  for (auto& a : accels) a.resize(longest, Vec3{});
  out.trace = rollout(init, accels, Ts);
  return out;
}

}  // namespace stlplan
