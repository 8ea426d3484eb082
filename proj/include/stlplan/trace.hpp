#pragma once

#include <cstddef>
#include <vector>

#include "stlplan/geometry.hpp"

namespace stlplan {

// Sampled motion of one drone: positions and velocities at k = 0..N,
// accelerations at k = 0..N-1.
struct DroneTrack {
  std::vector<Vec3> p;
  std::vector<Vec3> v;
  std::vector<Vec3> a;
};

// Fleet trajectory on a uniform grid with period `Ts`.
struct Trace {
  double Ts = 0.05;
  std::vector<DroneTrack> drones;

  std::size_t drone_count() const { return drones.size(); }
  // Number of state samples (N + 1); zero for an empty fleet.
  std::size_t samples() const { return drones.empty() ? 0 : drones.front().p.size(); }
  std::size_t steps() const { return samples() == 0 ? 0 : samples() - 1; }
};

// d(objective)/d(state) for every drone, sample and axis.
struct StateGradient {
  std::vector<std::vector<Vec3>> dp;
  std::vector<std::vector<Vec3>> dv;

  StateGradient() = default;
  StateGradient(std::size_t drones, std::size_t samples)
      : dp(drones, std::vector<Vec3>(samples, Vec3{})), dv(drones, std::vector<Vec3>(samples, Vec3{})) {}
};

// d(objective)/d(acceleration) for every drone, step and axis.
using ControlGradient = std::vector<std::vector<Vec3>>;

}  // namespace stlplan
