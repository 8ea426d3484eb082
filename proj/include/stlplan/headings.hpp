#pragma once

// Yaw annotation for an optimized trace. Not part of the objective.

#include <algorithm>
#include <cmath>
#include <vector>

#include "stlplan/scenario.hpp"
#include "stlplan/trace.hpp"
#include "stlplan/warmstart.hpp"

namespace stlplan {

// Per drone, per sample yaw in radians. Inside an assigned target the target's
// yaw; inside a blade corridor and band, facing the closest blade point; in
// transit above 0.05 m/s, along the horizontal velocity; otherwise the last
// heading is held (starting from 0).
inline std::vector<std::vector<double>> assign_headings(const Trace& tr, const Scenario& sc, const RoutePlan& plan,
                                                        const InspectionGraph& g) {
  std::vector<std::vector<double>> out(tr.drone_count());
  for (std::size_t d = 0; d < tr.drone_count(); ++d) {
    std::vector<int> targets, blades;
    if (d < plan.routes.size())
      for (int v : plan.routes[d]) {
        if (v < 0 || g.is_depot(v)) continue;
        const auto& t = g.tasks[static_cast<std::size_t>(v)];
        (t.kind == TaskVertex::Kind::Target ? targets : blades).push_back(t.index);
      }
    double psi = 0.0;
    for (std::size_t k = 0; k < tr.samples(); ++k) {
      const Vec3& p = tr.drones[d].p[k];
      const Vec3& v = tr.drones[d].v[k];
      bool fixed = false;
      for (int q : targets)
        if (sc.targets[static_cast<std::size_t>(q)].box.contains(p)) {
          psi = sc.targets[static_cast<std::size_t>(q)].yaw;
          fixed = true;
          break;
        }
      if (!fixed)
        for (const auto& side : sc.blades) {
          if (std::find(blades.begin(), blades.end(), side.blade) == blades.end() || !side.box.contains(p)) continue;
          const Vec3 c = closest_point_on_segment(p, side.segment);
          if (band_robustness(norm(p - c), sc.thresholds.gamma_bla, sc.thresholds.epsilon) < 0.0) continue;
          psi = std::atan2(c[1] - p[1], c[0] - p[0]);
          fixed = true;
          break;
        }
      if (!fixed && std::hypot(v[0], v[1]) > 0.05) psi = std::atan2(v[1], v[0]);
      out[d].push_back(psi);
    }
  }
  return out;
}

}  // namespace stlplan
