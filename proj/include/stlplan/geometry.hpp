#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "stlplan/error.hpp"

namespace stlplan {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Axis-aligned box [lo, hi] in meters.
struct Box {
  Vec3 lo{};
  Vec3 hi{};

  Vec3 center() const { return 0.5 * (lo + hi); }
  bool degenerate() const {
    for (int j = 0; j < 3; ++j)
      if (!(lo[j] < hi[j])) return true;
    return false;
  }
  bool contains(const Vec3& p) const {
    for (int j = 0; j < 3; ++j)
      if (p[j] <= lo[j] || p[j] >= hi[j]) return false;
    return true;
  }
};

// Signed membership margin: min over the six face distances. Positive inside.
// `face` receives the index (2*axis + side) of the active face, lowest index on ties.
inline double box_inside_margin(const Box& b, const Vec3& p, int* face = nullptr) {
  double best = p[0] - b.lo[0];
  int arg = 0;
  for (int j = 0; j < 3; ++j) {
    const double m_lo = p[j] - b.lo[j];
    const double m_hi = b.hi[j] - p[j];
    if (m_lo < best) { best = m_lo; arg = 2 * j; }
    if (m_hi < best) { best = m_hi; arg = 2 * j + 1; }
  }
  if (face) *face = arg;
  return best;
}

struct Segment {
  Vec3 a{};
  Vec3 b{};
  Vec3 midpoint() const { return 0.5 * (a + b); }
  double length() const { return norm(b - a); }
};

// Closest point on the segment to p; `param` receives the clamped parameter in [0, 1].
inline Vec3 closest_point_on_segment(const Vec3& p, const Segment& s, double* param = nullptr) {
  const Vec3 d = s.b - s.a;
  const double len2 = dot(d, d);
  if (!(len2 > 0.0)) throw DegenerateSegment("segment endpoints coincide");
  double t = dot(p - s.a, d) / len2;
  t = std::clamp(t, 0.0, 1.0);
  if (param) *param = t;
  return s.a + t * d;
}

// Euclidean point-to-segment distance with the projection clamped to the segment.
inline double dist_to_segment(const Vec3& p, const Segment& s) {
  return norm(p - closest_point_on_segment(p, s));
}

// Margin of `dist` inside the open band (gamma - eps, gamma + eps); positive iff strictly inside.
inline double band_robustness(double dist, double gamma, double eps) {
  return std::min(dist - (gamma - eps), (gamma + eps) - dist);
}

}  // namespace stlplan
