#pragma once

// Event-triggered replanning: deviations beyond eta trigger a recomputation of
// the affected drone's segment up to its next task, with relaxed limits and
// every other drone frozen.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "stlplan/dynamics.hpp"
#include "stlplan/error.hpp"
#include "stlplan/mission.hpp"
#include "stlplan/optimizer.hpp"
#include "stlplan/scenario.hpp"
#include "stlplan/trace.hpp"

namespace stlplan {

inline bool detect_event(const Vec3& actual, const Vec3& planned, double eta) {
  if (!(eta > 0.0)) throw Error("eta must be positive");
  return norm(actual - planned) > eta;
}

struct Disturbance {
  double t = 0.0;
  int drone = 0;
  Vec3 offset{};
};

struct ReplanEvent {
  double t = 0.0;
  long k = 0;
  int drone = 0;
  double deviation = 0.0;
  long window_begin = 0;
  long window_end = 0;        // sample where the segment rejoins the committed plan
  bool glide_home = false;    // no task left, the segment runs to the end of the mission
  std::vector<long> skipped;  // task starts passed over because the window was too short
  int iterations = 0;
};

struct ExecutionState {
  long k = 0;
  Trace committed;  // current plan, updated at every splice
  Trace executed;   // what actually happened, disturbances included
  std::vector<ReplanEvent> log;
  std::vector<long> window_end;  // per drone, last sample of the active replan window or -1
};

struct ReplanConfig {
  OptimizerConfig optimizer;
  int max_iters = 400;
  bool weighted = false;  // use the mission's class weights (attrition-aware mode)
};

struct ReplanOutcome {
  std::vector<Vec3> segment;  // accelerations on [window_begin, window_end)
  long window_begin = 0;
  long window_end = 0;
  bool glide_home = false;
  std::vector<long> skipped;
  int iterations = 0;
  Trace plan;  // committed plan with the segment spliced in
};

// First samples at which drone d starts a full target dwell or blade sweep in `tr`.
inline std::vector<long> task_starts(const Trace& tr, const Scenario& sc, std::size_t d) {
  const long n_ins = std::lround(sc.timing.T_ins / tr.Ts);
  const long n_bla = std::lround(sc.timing.T_bla / tr.Ts);
  const long last = static_cast<long>(tr.samples()) - 1;
  const int di = static_cast<int>(d);
  std::vector<long> out;
  auto scan = [&](long len, auto&& holds) {
    long run = 0;
    for (long k = 0; k <= last; ++k) {
      run = holds(static_cast<std::size_t>(k)) ? run + 1 : 0;
      if (run == len + 1) {
        out.push_back(k - len);
        return;
      }
    }
  };
  for (const auto& t : sc.targets) {
    const Predicate p = Predicate::inside(di, t.box);
    scan(n_ins, [&](std::size_t k) { return p.value(tr, k) > 0.0; });
  }
  for (const auto& side : sc.blades) {
    const Predicate in = Predicate::inside(di, side.box);
    const Predicate band = Predicate::blade_band(di, side.segment, sc.thresholds.gamma_bla, sc.thresholds.epsilon);
    scan(n_bla, [&](std::size_t k) { return in.value(tr, k) > 0.0 && band.value(tr, k) > 0.0; });
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace detail {

// Terminal-state influence of a_i over an n-step window, per axis:
// p_n gains Ts^2 (n - i - 1/2) a_i and v_n gains Ts a_i.
struct TerminalMap {
  std::vector<double> c;
  double e = 0.0;
  double g11 = 0, g12 = 0, g22 = 0;

  TerminalMap(long n, double Ts) : c(static_cast<std::size_t>(n)), e(Ts) {
    for (long i = 0; i < n; ++i) c[i] = Ts * Ts * (static_cast<double>(n - i) - 0.5);
    for (double x : c) {
      g11 += x * x;
      g12 += x * e;
    }
    g22 = static_cast<double>(n) * e * e;
  }

  // Coefficients (x, y) with [c e]^T [c e] (x, y) = (rp, rv).
  std::pair<double, double> solve(double rp, double rv) const {
    const double det = g11 * g22 - g12 * g12;
    return {(g22 * rp - g12 * rv) / det, (g11 * rv - g12 * rp) / det};
  }
};

inline DroneState terminal(DroneState s, const std::vector<Vec3>& a, long from, long to, double Ts) {
  for (long k = from; k < to; ++k) s = step(s, a[k], Ts);
  return s;
}

// Smallest change to a[from, to) that lands on `goal` from `start`.
inline void correct_terminal(std::vector<Vec3>& a, long from, long to, const DroneState& start, const DroneState& goal,
                             double Ts) {
  const TerminalMap m(to - from, Ts);
  for (int pass = 0; pass < 2; ++pass) {
    const DroneState end = terminal(start, a, from, to, Ts);
    for (int j = 0; j < 3; ++j) {
      const auto [x, y] = m.solve(goal.p[j] - end.p[j], goal.v[j] - end.v[j]);
      for (long k = from; k < to; ++k) a[k][j] += m.c[k - from] * x + m.e * y;
    }
  }
}

}  // namespace detail

// Recomputes drone d's plan from the current executed state up to its next
// task start, keeping every other drone as committed.
inline ReplanOutcome replan(const ExecutionState& st, const Scenario& sc, const Mission& mission, std::size_t d,
                            const ReplanConfig& cfg) {
  const long k = st.k;
  const long N = static_cast<long>(st.committed.steps());
  const double Ts = st.committed.Ts;
  const auto& lim = sc.fleet[d].limits;
  const DroneState start{st.executed.drones[d].p[k], st.executed.drones[d].v[k]};

  // Base trace: executed history, committed future.
  Trace base = st.committed;
  for (std::size_t e = 0; e < base.drone_count(); ++e)
    if (e == d) {
      auto& t = base.drones[e];
      for (long i = 0; i <= k; ++i) {
        t.p[i] = st.executed.drones[e].p[i];
        t.v[i] = st.executed.drones[e].v[i];
      }
      for (long i = 0; i < k; ++i) t.a[i] = st.executed.drones[e].a[i];
    } else {
      base.drones[e] = st.executed.drones[e];
    }

  std::vector<long> ends;
  for (long s : task_starts(st.committed, sc, d))
    if (s > k) ends.push_back(s);
  const bool tasks_left = !ends.empty();
  ends.push_back(N);

  ReplanOutcome out;
  out.window_begin = k;
  std::vector<Vec3> acc = st.committed.drones[d].a;
  bool found = false;
  for (long kh : ends) {
    if (kh - k < 2) {
      if (kh != N) out.skipped.push_back(kh);
      continue;
    }
    std::vector<Vec3> trial = st.committed.drones[d].a;
    const DroneState goal{st.committed.drones[d].p[kh], st.committed.drones[d].v[kh]};
    detail::correct_terminal(trial, k, kh, start, goal, Ts);
    bool ok = true;
    for (long i = k; i < kh && ok; ++i)
      for (int j = 0; j < 3; ++j) ok = ok && std::abs(trial[i][j]) <= lim.a_relaxed[j];
    if (!ok) {
      if (kh != N) out.skipped.push_back(kh);
      continue;
    }
    acc = std::move(trial);
    out.window_end = kh;
    out.glide_home = kh == N && !tasks_left;
    found = true;
    break;
  }
  if (!found) throw InfeasibleWindow("no replan window is reachable at relaxed limits");
  const long kh = out.window_end;
  const detail::TerminalMap tmap(kh - k, Ts);
  const DroneState goal{st.committed.drones[d].p[kh], st.committed.drones[d].v[kh]};

  std::vector<Vec3> v_max;
  for (std::size_t e = 0; e < sc.drone_count(); ++e)
    v_max.push_back(e == d ? lim.v_relaxed : sc.fleet[e].limits.v_max);
  const double T = static_cast<double>(N) * Ts;
  const auto vclauses = velocity_clauses(v_max, T, cfg.optimizer.velocity_sharpness);
  std::vector<Formula> parts{mission.formula};
  parts.insert(parts.end(), vclauses.begin(), vclauses.end());

  OptimizerConfig oc = cfg.optimizer;
  oc.max_iters = cfg.max_iters;
  Problem pb;
  pb.objective = conj(parts, "objective");
  pb.weights = cfg.weighted ? &mission.weights : nullptr;
  pb.initial = extract_accelerations(base);
  pb.initial[d] = acc;
  pb.apply = [&](const Controls& c) {
    Trace tr = base;
    tr.drones[d].a = c[d];
    reroll_from(tr, d, static_cast<std::size_t>(k));
    return tr;
  };
  pb.direction = [&](ControlGradient& G) {
    for (std::size_t e = 0; e < G.size(); ++e)
      for (long i = 0; i < static_cast<long>(G[e].size()); ++i)
        if (e != d || i < k || i >= kh) G[e][i] = Vec3{};
    for (int j = 0; j < 3; ++j) {
      double cp = 0.0, cv = 0.0;
      for (long i = k; i < kh; ++i) {
        cp += tmap.c[i - k] * G[d][i][j];
        cv += tmap.e * G[d][i][j];
      }
      const auto [x, y] = tmap.solve(cp, cv);
      for (long i = k; i < kh; ++i) G[d][i][j] -= tmap.c[i - k] * x + tmap.e * y;
    }
  };
  pb.admit = [&](Controls& c) {
    detail::correct_terminal(c[d], k, kh, start, goal, Ts);
    return within_bounds(std::vector<Vec3>(c[d].begin() + k, c[d].begin() + kh), lim.a_relaxed);
  };
  pb.done = [&](const Trace& tr, double ms) {
    return ms > 0.0 && eval_exact(mission.formula, tr) > 0.0 && velocity_margin(vclauses, tr) > 0.0;
  };

  const AscentResult r = ascend(pb, oc);
  out.iterations = r.iterations;
  out.segment.assign(r.controls[d].begin() + k, r.controls[d].begin() + kh);
  out.plan = st.committed;
  auto& t = out.plan.drones[d];
  for (long i = k; i < kh; ++i) t.a[i] = r.controls[d][i];
  t.p[k] = start.p;
  t.v[k] = start.v;
  reroll_from(out.plan, d, static_cast<std::size_t>(k));
  return out;
}

struct SimulationResult {
  ExecutionState state;
  Trace executed;
};

// Steps through the committed plan, applying each offset at sample
// round(t / Ts) and replanning whenever a drone outside an active window
// deviates by more than eta.
inline SimulationResult simulate_with_disturbance(const Trace& plan, const std::vector<Disturbance>& schedule,
                                                  const Scenario& sc, const Mission& mission, const ReplanConfig& cfg) {
  const double eta = sc.thresholds.eta;
  if (!(eta > 0.0)) throw Error("eta must be positive");
  ExecutionState st;
  st.committed = plan;
  st.executed = plan;
  st.window_end.assign(plan.drone_count(), -1);
  const long N = static_cast<long>(plan.steps());
  for (long k = 0; k <= N; ++k) {
    st.k = k;
    for (const auto& ev : schedule) {
      if (std::lround(ev.t / plan.Ts) != k) continue;
      if (ev.drone < 0 || ev.drone >= static_cast<int>(plan.drone_count())) throw Error("disturbance names an unknown drone");
      auto& t = st.executed.drones[ev.drone];
      t.p[k] = t.p[k] + ev.offset;
      reroll_from(st.executed, ev.drone, k);
    }
    for (std::size_t d = 0; d < plan.drone_count(); ++d) {
      if (k <= st.window_end[d]) continue;
      const Vec3& actual = st.executed.drones[d].p[k];
      const Vec3& planned = st.committed.drones[d].p[k];
      if (!detect_event(actual, planned, eta)) continue;
      ReplanEvent e;
      e.t = static_cast<double>(k) * plan.Ts;
      e.k = k;
      e.drone = static_cast<int>(d);
      e.deviation = norm(actual - planned);
      if (k >= N) {
        st.log.push_back(e);  // nothing left to steer
        continue;
      }
      ReplanOutcome o = replan(st, sc, mission, d, cfg);
      e.window_begin = o.window_begin;
      e.window_end = o.window_end;
      e.glide_home = o.glide_home;
      e.skipped = o.skipped;
      e.iterations = o.iterations;
      st.log.push_back(e);
      st.committed = std::move(o.plan);
      auto& x = st.executed.drones[d];
      for (long i = k; i < N; ++i) x.a[i] = st.committed.drones[d].a[i];
      reroll_from(st.executed, d, k);
      st.window_end[d] = o.window_end;
    }
  }
  SimulationResult r;
  r.executed = st.executed;
  r.state = std::move(st);
  return r;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline std::vector<Disturbance> disturbances_from_json(const nlohmann::json& j) {
  std::vector<Disturbance> out;
  const auto& arr = j.is_object() ? j.at("disturbances") : j;
  for (const auto& e : arr) {
    const auto& o = e.at("offset");
    out.push_back({e.at("t").get<double>(), e.at("drone").get<int>(),
                   {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()}});
  }
  return out;
}

inline nlohmann::json to_json(const Disturbance& d) {
  return {{"t", d.t}, {"drone", d.drone}, {"offset", {d.offset[0], d.offset[1], d.offset[2]}}};
}

inline nlohmann::json to_json(const ReplanEvent& e) {
  return {{"t", e.t},
          {"k", e.k},
          {"drone", e.drone},
          {"deviation", e.deviation},
          {"window", {e.window_begin, e.window_end}},
          {"glide_home", e.glide_home},
          {"skipped", e.skipped},
          {"iterations", e.iterations}};
}

inline nlohmann::json event_log_json(const std::vector<ReplanEvent>& log) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : log) j.push_back(to_json(e));
  return j;
}

}  // namespace stlplan
