#pragma once

// Per-axis double-integrator motion primitives: state propagation, rollout,
// control projection and rest-to-rest time of flight.

#include <algorithm>
#include <cmath>
#include <vector>

#include "stlplan/error.hpp"
#include "stlplan/geometry.hpp"
#include "stlplan/trace.hpp"

namespace stlplan {

// Symmetric per-axis kinematic bounds. The relaxed pair is used when replanning.
struct DroneLimits {
  Vec3 v_max{1, 1, 1};
  Vec3 a_max{1, 1, 1};
  Vec3 v_relaxed{2, 2, 2};
  Vec3 a_relaxed{5, 5, 5};

  DroneLimits relaxed() const { return {v_relaxed, a_relaxed, v_relaxed, a_relaxed}; }

  void validate() const {
    for (int j = 0; j < 3; ++j) {
      if (!(v_max[j] > 0.0) || !(a_max[j] > 0.0)) throw Error("limits must be positive");
      if (v_relaxed[j] < v_max[j] || a_relaxed[j] < a_max[j]) throw Error("relaxed limits must not be tighter than nominal");
    }
  }
};

struct DroneState {
  Vec3 p{};
  Vec3 v{};
};

// p' = p + v Ts + a Ts^2 / 2, v' = v + a Ts, per axis.
inline DroneState step(const DroneState& s, const Vec3& a, double Ts) {
  DroneState n;
  for (int j = 0; j < 3; ++j) {
    n.p[j] = s.p[j] + s.v[j] * Ts + 0.5 * a[j] * Ts * Ts;
    n.v[j] = s.v[j] + a[j] * Ts;
  }
  return n;
}

inline DroneTrack rollout_drone(const DroneState& init, const std::vector<Vec3>& accels, double Ts) {
  DroneTrack t;
  t.a = accels;
  t.p.reserve(accels.size() + 1);
  t.v.reserve(accels.size() + 1);
  DroneState s = init;
  t.p.push_back(s.p);
  t.v.push_back(s.v);
  for (const Vec3& a : accels) {
    s = step(s, a, Ts);
    t.p.push_back(s.p);
    t.v.push_back(s.v);
  }
  return t;
}

// Integrates every drone from its initial state; all sequences must share one length.
inline Trace rollout(const std::vector<DroneState>& init, const std::vector<std::vector<Vec3>>& accels, double Ts) {
  if (init.size() != accels.size()) throw LengthMismatch("initial states and acceleration sequences differ in count");
  for (const auto& a : accels)
    if (a.size() != accels.front().size()) throw LengthMismatch("acceleration sequences differ in length");
  Trace tr;
  tr.Ts = Ts;
  for (std::size_t d = 0; d < init.size(); ++d) tr.drones.push_back(rollout_drone(init[d], accels[d], Ts));
  return tr;
}

inline std::vector<std::vector<Vec3>> extract_accelerations(const Trace& tr) {
  std::vector<std::vector<Vec3>> out;
  for (const auto& d : tr.drones) out.push_back(d.a);
  return out;
}

inline std::vector<DroneState> initial_states(const Trace& tr) {
  std::vector<DroneState> out;
  for (const auto& d : tr.drones) out.push_back({d.p.front(), d.v.front()});
  return out;
}

// Re-integrates drone d from sample k onward with its stored accelerations.
inline void reroll_from(Trace& tr, std::size_t d, std::size_t k) {
  auto& t = tr.drones[d];
  DroneState s{t.p[k], t.v[k]};
  for (std::size_t i = k; i < t.a.size(); ++i) {
    s = step(s, t.a[i], tr.Ts);
    t.p[i + 1] = s.p;
    t.v[i + 1] = s.v;
  }
}

// Checks that every (p, v) at k+1 equals step(state_k, a_k) within `tol`.
inline bool dynamics_consistent(const Trace& tr, double tol = 1e-9) {
  for (const auto& d : tr.drones) {
    if (d.p.size() != d.v.size() || d.a.size() + 1 != d.p.size()) return false;
    for (std::size_t k = 0; k < d.a.size(); ++k) {
      const DroneState n = step({d.p[k], d.v[k]}, d.a[k], tr.Ts);
      for (int j = 0; j < 3; ++j)
        if (std::abs(n.p[j] - d.p[k + 1][j]) > tol || std::abs(n.v[j] - d.v[k + 1][j]) > tol) return false;
    }
  }
  return true;
}

inline Vec3 project_control(const Vec3& a, const Vec3& a_max) {
  return {std::clamp(a[0], -a_max[0], a_max[0]), std::clamp(a[1], -a_max[1], a_max[1]),
          std::clamp(a[2], -a_max[2], a_max[2])};
}

// Clamps every component into [-a_max, a_max]. Idempotent.
inline std::vector<Vec3> project_controls(std::vector<Vec3> accels, const Vec3& a_max) {
  for (auto& a : accels) a = project_control(a, a_max);
  return accels;
}

inline bool within_bounds(const std::vector<Vec3>& accels, const Vec3& a_max, double tol = 0.0) {
  for (const auto& a : accels)
    for (int j = 0; j < 3; ++j)
      if (std::abs(a[j]) > a_max[j] + tol) return false;
  return true;
}

// Rest-to-rest minimum time along one axis under a trapezoidal profile.
inline double axis_time_of_flight(double delta, double v_max, double a_max) {
  const double d = std::abs(delta);
  if (d <= v_max * v_max / a_max) return 2.0 * std::sqrt(d / a_max);
  return d / v_max + v_max / a_max;
}

// Axes are decoupled, so the slowest axis sets the time.
inline double time_of_flight(const Vec3& from, const Vec3& to, const Vec3& v_max, const Vec3& a_max) {
  double t = 0.0;
  for (int j = 0; j < 3; ++j) t = std::max(t, axis_time_of_flight(to[j] - from[j], v_max[j], a_max[j]));
  return t;
}

inline double time_of_flight(const Vec3& from, const Vec3& to, const DroneLimits& lim) {
  return time_of_flight(from, to, lim.v_max, lim.a_max);
}

// ---------------------------------------------------------------------------
// Sampled rest-to-rest profiles
// ---------------------------------------------------------------------------
//
// A discrete profile of n steps accelerates for m steps, coasts n - 2m steps
// and brakes for m steps. From rest it covers a Ts^2 m (n - m), so the
// acceleration that lands exactly on delta is delta / (Ts^2 m (n - m)).

namespace detail {

// Best split m for n steps, or 0 if no split meets the bounds.
inline long profile_split(double delta, double v_max, double a_max, double Ts, long n) {
  const double d = std::abs(delta);
  if (n < 2) return 0;
  const double min_tail = d / (Ts * v_max);  // n - m must be at least this
  long m = std::min(n / 2, static_cast<long>(std::floor(static_cast<double>(n) - min_tail + 1e-9)));
  if (m < 1) return 0;
  const double a = d / (Ts * Ts * static_cast<double>(m) * static_cast<double>(n - m));
  return a <= a_max * (1.0 + 1e-12) ? m : 0;
}

}  // namespace detail

// Minimal step count of a sampled rest-to-rest profile along one axis.
inline long axis_profile_steps(double delta, double v_max, double a_max, double Ts) {
  if (delta == 0.0) return 0;
  long n = std::max<long>(2, static_cast<long>(std::floor(axis_time_of_flight(delta, v_max, a_max) / Ts)) - 1);
  while (detail::profile_split(delta, v_max, a_max, Ts, n) == 0) ++n;
  return n;
}

// Acceleration sequence moving from rest at `from` to rest at `to` in
// max(min_steps, fastest feasible) steps, all axes finishing together.
inline std::vector<Vec3> rest_to_rest_profile(const Vec3& from, const Vec3& to, const Vec3& v_max, const Vec3& a_max,
                                              double Ts, long min_steps = 0) {
  long n = min_steps;
  for (int j = 0; j < 3; ++j) n = std::max(n, axis_profile_steps(to[j] - from[j], v_max[j], a_max[j], Ts));
  std::vector<Vec3> acc(static_cast<std::size_t>(n), Vec3{});
  for (int j = 0; j < 3; ++j) {
    const double delta = to[j] - from[j];
    if (delta == 0.0) continue;
    const long m = detail::profile_split(delta, v_max[j], a_max[j], Ts, n);
    if (m == 0) throw Error("no sampled profile for the requested step count");
    const double a = delta / (Ts * Ts * static_cast<double>(m) * static_cast<double>(n - m));
    for (long k = 0; k < m; ++k) {
      acc[k][j] = a;
      acc[n - 1 - k][j] = -a;
    }
  }
  return acc;
}

}  // namespace stlplan
