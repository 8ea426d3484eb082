#pragma once

// Projected quasi-Newton ascent of smooth robustness over per-drone acceleration
// sequences. Gradients with respect to states are pulled back to
// accelerations through the double-integrator recurrence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "stlplan/dynamics.hpp"
#include "stlplan/error.hpp"
#include "stlplan/robustness.hpp"
#include "stlplan/scenario.hpp"
#include "stlplan/stl_ast.hpp"
#include "stlplan/trace.hpp"

namespace stlplan {

enum class PlanStatus { SatisfiedWithMargin, SatisfiedNoMargin, Violated, IterationCap };

inline const char* status_name(PlanStatus s) {
  switch (s) {
    case PlanStatus::SatisfiedWithMargin: return "SatisfiedWithMargin";
    case PlanStatus::SatisfiedNoMargin: return "SatisfiedNoMargin";
    case PlanStatus::Violated: return "Violated";
    case PlanStatus::IterationCap: return "IterationCap";
  }
  return "?";
}

inline bool is_satisfied(PlanStatus s) {
  return s == PlanStatus::SatisfiedWithMargin || s == PlanStatus::SatisfiedNoMargin;
}

struct OptimizerConfig {
  double lambda = 10.0;
  double zeta = 0.2;
  int max_iters = 3000;
  double step = 1.0;
  double shrink = 0.5;
  double grow = 1.6;
  double tol = 1e-7;
  int patience = 40;  // accepted iterations allowed without tol progress
  double min_step = 1e-9;
  double armijo = 1e-4;
  double velocity_sharpness = 2.0;
  std::uint64_t seed = 1;
  int restarts = 1;
  int memory = 8;  // quasi-Newton pairs; 0 gives plain gradient ascent
  double kink_sharpness = 20.0;  // predicate-kink blending for search directions; 0 uses the raw subgradient
  bool stop_at_margin = true;

  void validate() const {
    if (!(lambda > 0.0)) throw Error("lambda must be positive");
    if (!(zeta >= 0.0)) throw Error("zeta must be non-negative");
    if (max_iters < 1) throw Error("max_iters must be at least 1");
    if (!(step > 0.0) || !(tol > 0.0) || !(min_step > 0.0)) throw Error("step sizes and tolerances must be positive");
    if (!(shrink > 0.0 && shrink < 1.0) || !(grow >= 1.0)) throw Error("shrink must lie in (0, 1) and grow be at least 1");
    if (!(velocity_sharpness > 0.0)) throw Error("velocity sharpness must be positive");
  }
};

struct PlanResult {
  Trace trace;
  RobustnessReport report;
  int iterations = 0;
  std::vector<double> history;  // augmented objective at each accepted iterate
  PlanStatus status = PlanStatus::Violated;
  double velocity_exact = 0.0;  // worst velocity-box margin over all drones
  bool restarted = false;
};

// Reverse accumulation through p' = p + v Ts + a Ts^2/2, v' = v + a Ts.
inline ControlGradient pullback_gradient(const StateGradient& g, const Trace& tr) {
  const double Ts = tr.Ts;
  ControlGradient out(tr.drone_count());
  for (std::size_t d = 0; d < tr.drone_count(); ++d) {
    const std::size_t N = tr.drones[d].a.size();
    if (g.dp[d].size() != N + 1 || g.dv[d].size() != N + 1) throw LengthMismatch("gradient and trace shapes differ");
    out[d].assign(N, Vec3{});
    Vec3 lp = g.dp[d][N], lv = g.dv[d][N];
    for (std::size_t k = N; k-- > 0;) {
      for (int j = 0; j < 3; ++j) {
        out[d][k][j] = 0.5 * Ts * Ts * lp[j] + Ts * lv[j];
        const double np = g.dp[d][k][j] + lp[j];
        const double nv = g.dv[d][k][j] + Ts * lp[j] + lv[j];
        lp[j] = np;
        lv[j] = nv;
      }
    }
  }
  return out;
}

inline ControlGradient pullback_gradient(const StateGradient& g, const Trace& tr, double Ts) {
  Trace t = tr;
  t.Ts = Ts;
  return pullback_gradient(g, t);
}

// Per-drone velocity boxes over [0, T], scaled by `sharpness`.
inline std::vector<Formula> velocity_clauses(const std::vector<Vec3>& v_max, double T, double sharpness) {
  std::vector<Formula> out;
  for (std::size_t d = 0; d < v_max.size(); ++d)
    out.push_back(always({0.0, T}, atom(Predicate::velocity_box(static_cast<int>(d), v_max[d], sharpness)),
                         "velocity[" + std::to_string(d) + "]"));
  return out;
}

// ---------------------------------------------------------------------------
// Generic ascent
// ---------------------------------------------------------------------------

using Controls = std::vector<std::vector<Vec3>>;

// Everything the ascent needs to know about the decision variables.
struct Problem {
  Formula objective;         // maximized smooth robustness; first operand is the mission
  const WeightMap* weights = nullptr;
  Controls initial;
  std::function<Trace(const Controls&)> apply;         // controls -> trace
  std::function<void(ControlGradient&)> direction;     // mask / constrain an ascent direction
  std::function<bool(Controls&)> admit;                // project a candidate; false rejects it
  std::function<bool(const Trace&, double mission_smooth)> done;  // early stop on the accepted iterate
  std::function<double(const Trace&, double mission_smooth)> score;  // ranks iterates for the returned trace
};

struct AscentResult {
  Controls controls;
  Trace trace;
  std::vector<double> history;
  int iterations = 0;
  bool capped = false;
  Trace best_trace;  // highest-scoring accepted iterate, when a score is given
  double best_score = -std::numeric_limits<double>::infinity();
};

namespace detail {

struct Evaluated {
  double value = 0.0;
  double mission = 0.0;
  NodeSignal signal;
};

inline Evaluated evaluate_objective(const Problem& pb, const Trace& tr, double lambda, bool keep_signal,
                                    double kink_sharpness = 0.0) {
  EvalOptions opt;
  opt.kink_sharpness = kink_sharpness;
  opt.semantics = pb.weights ? Semantics::WeightedSmooth : Semantics::Smooth;
  opt.weights = pb.weights;
  opt.lambda = lambda;
  Evaluated e;
  NodeSignal sig = Evaluator(tr, opt).forward(pb.objective.get(), 0, 1);
  e.value = sig.values[0];
  e.mission = pb.objective->op == Op::And ? sig.children[0].values[0] : e.value;
  if (keep_signal) e.signal = std::move(sig);
  return e;
}

inline ControlGradient objective_gradient(const Problem& pb, const Trace& tr, double lambda, const NodeSignal& sig,
                                          double kink_sharpness = 0.0) {
  EvalOptions opt;
  opt.kink_sharpness = kink_sharpness;
  opt.semantics = pb.weights ? Semantics::WeightedSmooth : Semantics::Smooth;
  opt.weights = pb.weights;
  opt.lambda = lambda;
  StateGradient g(tr.drone_count(), tr.samples());
  Evaluator(tr, opt).backward(sig, {1.0}, g);
  return pullback_gradient(g, tr);
}

inline std::string dump_iterate(int it, const Controls& c) {
  std::ostringstream os;
  os << "non-finite objective at iteration " << it << "; acceleration norms:";
  for (std::size_t d = 0; d < c.size(); ++d) {
    double s = 0.0;
    for (const auto& a : c[d]) s += dot(a, a);
    os << " d" << d << "=" << std::sqrt(s);
  }
  return os.str();
}

}  // namespace detail

namespace detail {

inline double inner(const Controls& a, const Controls& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d)
    for (std::size_t k = 0; k < a[d].size(); ++k) s += dot(a[d][k], b[d][k]);
  return s;
}

inline Controls combine(const Controls& a, double alpha, const Controls& b) {
  Controls r = a;
  for (std::size_t d = 0; d < r.size(); ++d)
    for (std::size_t k = 0; k < r[d].size(); ++k) r[d][k] = r[d][k] + alpha * b[d][k];
  return r;
}

// Limited-memory quasi-Newton ascent direction from the stored pairs
// (s = step, y = gradient decrease).
inline Controls lbfgs_direction(const Controls& G, const std::vector<std::pair<Controls, Controls>>& mem) {
  Controls q = G;
  std::vector<double> al(mem.size());
  for (std::size_t i = mem.size(); i-- > 0;) {
    const auto& [s, y] = mem[i];
    al[i] = inner(s, q) / inner(y, s);
    q = combine(q, -al[i], y);
  }
  const auto& [s, y] = mem.back();
  const double gamma = inner(s, y) / inner(y, y);
  for (auto& row : q)
    for (auto& v : row) v = gamma * v;
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const auto& [s, y] = mem[i];
    const double b = inner(y, q) / inner(y, s);
    q = combine(q, al[i] - b, s);
  }
  return q;
}

}  // namespace detail

// Backtracking ascent with Armijo acceptance along a limited-memory
// quasi-Newton direction, falling back to the plain gradient when that
// direction fails. Only improving iterates are accepted. With kink sharpness
// k > 0 the piecewise predicates are smoothed, and the ascent runs in stages
// at k, 4k and 16k; each stage is a tighter lower bound of the previous one,
// so the recorded objective never decreases across stages either.
inline AscentResult ascend(const Problem& pb, const OptimizerConfig& cfg) {
  AscentResult r;
  r.controls = pb.initial;
  r.trace = pb.apply(r.controls);

  std::vector<double> stages{cfg.kink_sharpness};
  if (cfg.kink_sharpness > 0.0) stages = {cfg.kink_sharpness, 4.0 * cfg.kink_sharpness, 16.0 * cfg.kink_sharpness};

  // Callbacks always see the unsmoothed mission value.
  auto mission_value = [&](const Trace& tr, const detail::Evaluated& e, double kappa) {
    return kappa == 0.0 ? e.mission : detail::evaluate_objective(pb, tr, cfg.lambda, false).mission;
  };
  auto keep_best = [&](const Trace& tr, double ms) {
    if (!pb.score) return;
    const double s = pb.score(tr, ms);
    if (r.best_trace.samples() == 0 || s > r.best_score) {
      r.best_score = s;
      r.best_trace = tr;
    }
  };
  auto finished = [&](const Trace& tr, const detail::Evaluated& e, double kappa) {
    if (!pb.score && !pb.done) return false;
    const double ms = mission_value(tr, e, kappa);
    keep_best(tr, ms);
    return pb.done && pb.done(tr, ms);
  };

  int it = 0;
  for (std::size_t stage = 0; stage < stages.size(); ++stage) {
    const double kappa = stages[stage];
    auto cur = detail::evaluate_objective(pb, r.trace, cfg.lambda, true, kappa);
    if (!std::isfinite(cur.value)) throw NonFiniteObjective(detail::dump_iterate(it, r.controls));
    if (stage == 0) {
      r.history.push_back(cur.value);
      if (finished(r.trace, cur, kappa)) return r;
    }

    std::vector<std::pair<Controls, Controls>> mem;
    ControlGradient G = detail::objective_gradient(pb, r.trace, cfg.lambda, cur.signal, kappa);
    if (pb.direction) pb.direction(G);
    double alpha = cfg.step;
    int stale = 0;
    double anchor = cur.value;
    while (it < cfg.max_iters) {
      r.iterations = ++it;
      bool accepted = false;
      Controls cand;
      Trace tr;
      detail::Evaluated next;
      // Quasi-Newton step first, from unit length.
      for (int pass = 0; pass < 2 && !accepted; ++pass) {
        const bool qn = pass == 0;
        if (qn && (cfg.memory == 0 || mem.empty())) continue;
        Controls D = qn ? detail::lbfgs_direction(G, mem) : G;
        if (pb.direction) pb.direction(D);
        if (qn && detail::inner(D, G) <= 0.0) {
          mem.clear();
          continue;
        }
        double t = qn ? 1.0 : alpha;
        while (t >= cfg.min_step) {
          cand = detail::combine(r.controls, t, D);
          if (pb.admit && !pb.admit(cand)) {
            t *= cfg.shrink;
            continue;
          }
          double gain = 0.0;
          for (std::size_t d = 0; d < cand.size(); ++d)
            for (std::size_t k = 0; k < cand[d].size(); ++k)
              for (int j = 0; j < 3; ++j) gain += G[d][k][j] * (cand[d][k][j] - r.controls[d][k][j]);
          tr = pb.apply(cand);
          next = detail::evaluate_objective(pb, tr, cfg.lambda, true, kappa);
          if (!std::isfinite(next.value)) throw NonFiniteObjective(detail::dump_iterate(it, cand));
          if (next.value >= cur.value + cfg.armijo * gain && next.value >= cur.value && gain > 0.0) {
            accepted = true;
            if (!qn) alpha = t * cfg.grow;
            break;
          }
          t *= cfg.shrink;
          if (qn && t < 1e-6) break;
        }
        if (!accepted && qn) mem.clear();
      }
      if (!accepted) break;  // stalled at this stage

      ControlGradient Gn = detail::objective_gradient(pb, tr, cfg.lambda, next.signal, kappa);
      if (pb.direction) pb.direction(Gn);
      if (cfg.memory > 0) {
        Controls sv = detail::combine(cand, -1.0, r.controls);
        Controls yv = detail::combine(G, -1.0, Gn);
        if (detail::inner(sv, yv) > 1e-12 * std::sqrt(detail::inner(sv, sv) * detail::inner(yv, yv))) {
          mem.emplace_back(std::move(sv), std::move(yv));
          if (static_cast<int>(mem.size()) > cfg.memory) mem.erase(mem.begin());
        }
      }
      r.controls = std::move(cand);
      r.trace = std::move(tr);
      cur = std::move(next);
      G = std::move(Gn);
      r.history.push_back(std::max(cur.value, r.history.back()));
      if (finished(r.trace, cur, kappa)) return r;
      if (cur.value - anchor > cfg.tol * std::max(1.0, std::abs(anchor))) {
        anchor = cur.value;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        break;
      }
    }
  }
  r.capped = it >= cfg.max_iters;
  return r;
}

// ---------------------------------------------------------------------------
// Mission optimization
// ---------------------------------------------------------------------------

// Which controls may move, and their bounds.
struct ControlSpace {
  std::vector<bool> free;        // per drone; empty means all
  std::vector<Vec3> a_max;       // per drone
  std::vector<Vec3> v_max;       // per drone, for the velocity clauses
  long k_begin = 0;
  long k_end = -1;               // exclusive; -1 means the whole horizon
};

inline ControlSpace nominal_space(const Scenario& sc) {
  ControlSpace s;
  for (const auto& d : sc.fleet) {
    s.a_max.push_back(d.limits.a_max);
    s.v_max.push_back(d.limits.v_max);
  }
  return s;
}

inline double velocity_margin(const std::vector<Formula>& clauses, const Trace& tr) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& c : clauses) m = std::min(m, eval_exact(c, tr));
  return m;
}

inline PlanStatus classify(double smooth, double zeta, bool capped) {
  if (smooth >= zeta) return PlanStatus::SatisfiedWithMargin;
  if (smooth > 0.0) return PlanStatus::SatisfiedNoMargin;
  return capped ? PlanStatus::IterationCap : PlanStatus::Violated;
}

// Maximizes smooth robustness of `mission` (weighted-smooth when `weights` is
// given) starting from `seed`. Accelerations stay inside their boxes; velocity
// boxes enter the objective as extra always-clauses.
inline PlanResult optimize(const Formula& mission, const WeightMap* weights, const Trace& seed, const Scenario& sc,
                           const OptimizerConfig& cfg, const ControlSpace* space_in = nullptr) {
  cfg.validate();
  const ControlSpace space = space_in ? *space_in : nominal_space(sc);
  const long need = horizon_samples(mission, seed.Ts) + 1;
  if (static_cast<long>(seed.samples()) < need)
    throw SeedTooShort("seed has " + std::to_string(seed.samples()) + " samples, formula needs " + std::to_string(need));
  const std::size_t n = seed.drone_count();
  if (space.a_max.size() != n || space.v_max.size() != n) throw LengthMismatch("control space and seed differ in drone count");

  const double T = static_cast<double>(seed.steps()) * seed.Ts;
  const auto vclauses = velocity_clauses(space.v_max, T, cfg.velocity_sharpness);
  std::vector<Formula> parts{mission};
  parts.insert(parts.end(), vclauses.begin(), vclauses.end());
  const Formula objective = conj(parts, "objective");

  const auto init = initial_states(seed);
  const long k0 = space.k_begin;
  const long k1 = space.k_end < 0 ? static_cast<long>(seed.steps()) : space.k_end;
  auto is_free = [&](std::size_t d) { return space.free.empty() || space.free[d]; };

  Problem pb;
  pb.objective = objective;
  pb.weights = weights;
  pb.initial = extract_accelerations(seed);
  pb.apply = [&](const Controls& c) { return rollout(init, c, seed.Ts); };
  pb.direction = [&](ControlGradient& G) {
    for (std::size_t d = 0; d < G.size(); ++d)
      for (long k = 0; k < static_cast<long>(G[d].size()); ++k)
        if (!is_free(d) || k < k0 || k >= k1) G[d][k] = Vec3{};
  };
  pb.admit = [&](Controls& c) {
    for (std::size_t d = 0; d < c.size(); ++d)
      if (is_free(d))
        for (long k = k0; k < k1; ++k) c[d][k] = project_control(c[d][k], space.a_max[d]);
    return true;
  };
  if (cfg.stop_at_margin)
    pb.done = [&](const Trace& tr, double ms) {
      return ms >= cfg.zeta && eval_exact(mission, tr) > 0.0 && velocity_margin(vclauses, tr) > 0.0;
    };

  // Returned iterate: best exact robustness within the best status bucket.
  // Iterates at or beyond a velocity bound rank lowest.
  pb.score = [&](const Trace& tr, double ms) {
    const bool vel = velocity_margin(vclauses, tr) > 0.0;
    const double bucket = !vel ? 0.0 : ms >= cfg.zeta ? 2.0 : ms > 0.0 ? 1.0 : 0.0;
    return bucket * 1e6 + std::clamp(eval_exact(mission, tr), -1e5, 1e5);
  };

  // Seed controls may sit outside the box; start from their projection.
  pb.admit(pb.initial);

  auto finish = [&](const AscentResult& a) {
    PlanResult r;
    r.trace = a.best_trace.samples() ? a.best_trace : a.trace;
    r.report = make_report(mission, r.trace, cfg.lambda, weights);
    r.iterations = a.iterations;
    r.history = a.history;
    r.velocity_exact = velocity_margin(vclauses, r.trace);
    r.status = classify(r.report.smooth, cfg.zeta, a.capped);
    if (r.velocity_exact <= 0.0 && is_satisfied(r.status)) r.status = a.capped ? PlanStatus::IterationCap : PlanStatus::Violated;
    return r;
  };
  auto rank = [](const PlanResult& r) {
    return std::pair<int, double>{r.status == PlanStatus::SatisfiedWithMargin ? 1 : 0, r.report.exact};
  };

  PlanResult best = finish(ascend(pb, cfg));
  std::mt19937_64 rng(cfg.seed);
  for (int attempt = 0; attempt < cfg.restarts && best.status == PlanStatus::IterationCap; ++attempt) {
    Problem again = pb;
    again.initial = extract_accelerations(seed);
    for (std::size_t d = 0; d < n; ++d) {
      if (!is_free(d)) continue;
      for (long k = k0; k < k1; ++k)
        for (int j = 0; j < 3; ++j) {
          std::normal_distribution<double> noise(0.0, 0.05 * space.a_max[d][j]);
          again.initial[d][k][j] += noise(rng);
        }
    }
    again.admit(again.initial);
    PlanResult r = finish(ascend(again, cfg));
    r.restarted = true;
    r.iterations += best.iterations;
    if (rank(r) > rank(best)) best = std::move(r);
    else best.restarted = true;
    // A failed restart reports failure rather than the cap.
    if (best.status == PlanStatus::IterationCap) best.status = PlanStatus::Violated;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const PlanResult& r) {
  return {{"status", status_name(r.status)},
          {"iterations", r.iterations},
          {"restarted", r.restarted},
          {"velocity_exact", r.velocity_exact},
          {"history", r.history},
          {"report", to_json(r.report)}};
}

inline void write_history_csv(std::ostream& os, const std::vector<double>& h) {
  os << "iteration,objective\n";
  os.precision(17);
  for (std::size_t i = 0; i < h.size(); ++i) os << i << ',' << h[i] << '\n';
}

}  // namespace stlplan
