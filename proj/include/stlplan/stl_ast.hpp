#pragma once

// Formula representation for STL and its weighted extension: predicate atoms,
// Boolean and bounded temporal operators, interval alignment and horizons.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stlplan/error.hpp"
#include "stlplan/geometry.hpp"
#include "stlplan/trace.hpp"

namespace stlplan {

// ---------------------------------------------------------------------------
// Intervals
// ---------------------------------------------------------------------------

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

enum class Alignment { Strict, Nearest };

// Interval expressed in whole samples.
struct SampleInterval {
  long lo = 0;
  long hi = 0;
  long width() const { return hi - lo + 1; }
};

inline void check_interval(const Interval& iv) {
  if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi))
    throw IntervalError("interval bounds must be finite");
  if (iv.lo < 0.0) throw IntervalError("interval lower bound is negative");
  if (iv.lo > iv.hi) throw IntervalError("interval lower bound exceeds upper bound");
}

// Converts seconds to sample indices. Strict mode rejects bounds that are not
// integer multiples of Ts (relative tolerance 1e-9).
inline SampleInterval align(const Interval& iv, double Ts, Alignment mode = Alignment::Strict) {
  if (!(Ts > 0.0)) throw IntervalError("sampling period must be positive");
  auto to_index = [&](double t) {
    const double x = t / Ts;
    const double r = std::round(x);
    if (mode == Alignment::Strict && std::abs(x - r) > 1e-9 * std::max(1.0, std::abs(x)))
      throw IntervalError("interval bound " + std::to_string(t) + " s is not a multiple of Ts");
    return static_cast<long>(r);
  };
  return {to_index(iv.lo), to_index(iv.hi)};
}

// ---------------------------------------------------------------------------
// Predicates
// ---------------------------------------------------------------------------

enum class PredicateKind {
  AxisBoxInside,
  AxisBoxOutside,
  MutualDistanceAtLeast,
  SegmentDistanceBand,
  VelocityBox,
  Linear,  // c_p . p + c_v . v + offset; used for scalar examples and random tests
};

// Real-valued function mu(x) of the fleet state at one sample; the atom holds iff mu > 0.
struct Predicate {
  PredicateKind kind = PredicateKind::Linear;
  std::string id;
  int drone = 0;
  int other = -1;       // second drone for MutualDistanceAtLeast
  Box box;              // box kinds
  Segment segment;      // SegmentDistanceBand
  double threshold = 0; // Gamma_dis or Gamma_bla
  double epsilon = 0;   // band half-width
  Vec3 limit{};         // VelocityBox per-axis bound
  double scale = 1.0;   // VelocityBox sharpness
  Vec3 cp{};            // Linear
  Vec3 cv{};
  double offset = 0;

  static Predicate inside(int drone, const Box& b, std::string id = "") {
    if (b.degenerate()) throw Error("predicate box is degenerate");
    Predicate p;
    p.kind = PredicateKind::AxisBoxInside;
    p.drone = drone;
    p.box = b;
    p.id = std::move(id);
    return p;
  }
  static Predicate outside(int drone, const Box& b, std::string id = "") {
    Predicate p = inside(drone, b, std::move(id));
    p.kind = PredicateKind::AxisBoxOutside;
    return p;
  }
  static Predicate mutual_distance(int drone, int other, double gamma, std::string id = "") {
    if (drone == other) throw Error("mutual distance needs two distinct drones");
    Predicate p;
    p.kind = PredicateKind::MutualDistanceAtLeast;
    p.drone = drone;
    p.other = other;
    p.threshold = gamma;
    p.id = std::move(id);
    return p;
  }
  static Predicate blade_band(int drone, const Segment& s, double gamma, double eps, std::string id = "") {
    if (!(s.length() > 0.0)) throw DegenerateSegment("blade segment is degenerate");
    if (!(gamma - eps > 0.0) || !(eps > 0.0)) throw Error("band requires 0 < gamma - eps < gamma + eps");
    Predicate p;
    p.kind = PredicateKind::SegmentDistanceBand;
    p.drone = drone;
    p.segment = s;
    p.threshold = gamma;
    p.epsilon = eps;
    p.id = std::move(id);
    return p;
  }
  static Predicate velocity_box(int drone, const Vec3& vmax, double scale = 1.0, std::string id = "") {
    for (double v : vmax)
      if (!(v > 0.0)) throw Error("velocity bound must be positive");
    Predicate p;
    p.kind = PredicateKind::VelocityBox;
    p.drone = drone;
    p.limit = vmax;
    p.scale = scale;
    p.id = std::move(id);
    return p;
  }
  static Predicate linear(int drone, const Vec3& cp, const Vec3& cv, double offset, std::string id = "") {
    Predicate p;
    p.kind = PredicateKind::Linear;
    p.drone = drone;
    p.cp = cp;
    p.cv = cv;
    p.offset = offset;
    p.id = std::move(id);
    return p;
  }

  // Drones whose state this predicate reads.
  bool depends_on(int d) const { return d == drone || (kind == PredicateKind::MutualDistanceAtLeast && d == other); }

  // With kappa > 0 the piecewise predicates are replaced by smooth lower
  // bounds: softmin over faces, softmax-weighted mean for the obstacle max.
  double value(const Trace& tr, std::size_t k, double kappa = 0.0) const {
    const Vec3& p = tr.drones[drone].p[k];
    if (kappa > 0.0) {
      std::array<double, 6> m{};
      if (pieces(tr, k, m)) {
        double v = 0.0;
        blend(m, kappa, kind == PredicateKind::AxisBoxOutside ? 1.0 : -1.0, &v);
        return kind == PredicateKind::VelocityBox ? scale * v : v;
      }
    }
    switch (kind) {
      case PredicateKind::AxisBoxInside: return box_inside_margin(box, p);
      case PredicateKind::AxisBoxOutside: return outside_margin(p, nullptr);
      case PredicateKind::MutualDistanceAtLeast:
        return norm(p - tr.drones[other].p[k]) - threshold;
      case PredicateKind::SegmentDistanceBand: {
        const double dist = dist_to_segment(p, segment);
        if (kappa <= 0.0) return band_robustness(dist, threshold, epsilon);
        const double lower = dist - (threshold - epsilon), upper = (threshold + epsilon) - dist;
        const double lo = std::min(lower, upper);
        return lo - std::log1p(std::exp(-kappa * std::abs(lower - upper))) / kappa;
      }
      case PredicateKind::VelocityBox: return scale * velocity_margin(tr.drones[drone].v[k], nullptr);
      case PredicateKind::Linear:
        return dot(cp, p) + dot(cv, tr.drones[drone].v[k]) + offset;
    }
    return 0.0;
  }

  // Adds w * d(mu)/d(state at k) into g. At kinks the lowest-index active piece
  // is used; with kappa > 0 this is the derivative of the smoothed value.
  void accumulate_gradient(const Trace& tr, std::size_t k, double w, StateGradient& g, double kappa = 0.0) const {
    const Vec3& p = tr.drones[drone].p[k];
    Vec3& gp = g.dp[drone][k];
    if (kappa > 0.0 && blend_gradient(tr, k, w, g, kappa)) return;
    switch (kind) {
      case PredicateKind::AxisBoxInside: {
        int face = 0;
        box_inside_margin(box, p, &face);
        gp[face / 2] += (face % 2 == 0) ? w : -w;
        break;
      }
      case PredicateKind::AxisBoxOutside: {
        int face = 0;
        outside_margin(p, &face);
        gp[face / 2] += (face % 2 == 0) ? -w : w;
        break;
      }
      case PredicateKind::MutualDistanceAtLeast: {
        const Vec3 diff = p - tr.drones[other].p[k];
        const double n = norm(diff);
        if (n > 0.0) {
          Vec3& go = g.dp[other][k];
          for (int j = 0; j < 3; ++j) {
            gp[j] += w * diff[j] / n;
            go[j] -= w * diff[j] / n;
          }
        }
        break;
      }
      case PredicateKind::SegmentDistanceBand: {
        const Vec3 c = closest_point_on_segment(p, segment);
        const Vec3 diff = p - c;
        const double dist = norm(diff);
        if (dist > 0.0) {
          const double lower = dist - (threshold - epsilon);
          const double upper = (threshold + epsilon) - dist;
          const double sgn = (lower <= upper) ? 1.0 : -1.0;
          for (int j = 0; j < 3; ++j) gp[j] += w * sgn * diff[j] / dist;
        }
        break;
      }
      case PredicateKind::VelocityBox: {
        int face = 0;
        velocity_margin(tr.drones[drone].v[k], &face);
        g.dv[drone][k][face / 2] += (face % 2 == 0) ? -w * scale : w * scale;
        break;
      }
      case PredicateKind::Linear: {
        Vec3& gv = g.dv[drone][k];
        for (int j = 0; j < 3; ++j) {
          gp[j] += w * cp[j];
          gv[j] += w * cv[j];
        }
        break;
      }
    }
  }

 private:
  // The six affine pieces of a box-like predicate.
  bool pieces(const Trace& tr, std::size_t k, std::array<double, 6>& m) const {
    const Vec3& p = tr.drones[drone].p[k];
    switch (kind) {
      case PredicateKind::AxisBoxInside:
        for (int j = 0; j < 3; ++j) {
          m[2 * j] = p[j] - box.lo[j];
          m[2 * j + 1] = box.hi[j] - p[j];
        }
        return true;
      case PredicateKind::AxisBoxOutside:
        for (int j = 0; j < 3; ++j) {
          m[2 * j] = box.lo[j] - p[j];
          m[2 * j + 1] = p[j] - box.hi[j];
        }
        return true;
      case PredicateKind::VelocityBox: {
        const Vec3& v = tr.drones[drone].v[k];
        for (int j = 0; j < 3; ++j) {
          m[2 * j] = limit[j] - v[j];
          m[2 * j + 1] = v[j] + limit[j];
        }
        return true;
      }
      default: return false;
    }
  }

  // Weights d(smooth)/d(m_f): softmin (sign -1, log-sum-exp) or softmax-weighted
  // mean (sign +1). The smooth value goes to *out.
  static std::array<double, 6> blend(const std::array<double, 6>& m, double kappa, double sign, double* out) {
    double ref = sign * m[0];
    for (double x : m) ref = std::max(ref, sign * x);
    std::array<double, 6> e{};
    double z = 0.0;
    for (int f = 0; f < 6; ++f) z += e[f] = std::exp(kappa * (sign * m[f] - ref));
    std::array<double, 6> wt{};
    if (sign < 0.0) {
      *out = -ref - std::log(z) / kappa;
      for (int f = 0; f < 6; ++f) wt[f] = e[f] / z;
    } else {
      double mean = 0.0;
      for (int f = 0; f < 6; ++f) mean += e[f] / z * m[f];
      *out = mean;
      for (int f = 0; f < 6; ++f) wt[f] = e[f] / z * (1.0 + kappa * (m[f] - mean));
    }
    return wt;
  }

  // Derivative of the kappa-smoothed value; false for predicates without kinks.
  bool blend_gradient(const Trace& tr, std::size_t k, double w, StateGradient& g, double kappa) const {
    const Vec3& p = tr.drones[drone].p[k];
    Vec3& gp = g.dp[drone][k];
    if (kind == PredicateKind::SegmentDistanceBand) {
      const Vec3 diff = p - closest_point_on_segment(p, segment);
      const double dist = norm(diff);
      if (dist <= 0.0) return true;
      const double lower = dist - (threshold - epsilon);
      const double upper = (threshold + epsilon) - dist;
      const double e = std::exp(-kappa * std::abs(lower - upper));
      const double wl = lower <= upper ? 1.0 / (1.0 + e) : e / (1.0 + e);
      const double sgn = wl - (1.0 - wl);
      for (int j = 0; j < 3; ++j) gp[j] += w * sgn * diff[j] / dist;
      return true;
    }
    std::array<double, 6> m{};
    if (!pieces(tr, k, m)) return false;
    double v = 0.0;
    const double sign = kind == PredicateKind::AxisBoxOutside ? 1.0 : -1.0;
    const auto wt = blend(m, kappa, sign, &v);
    switch (kind) {
      case PredicateKind::AxisBoxInside:
        for (int j = 0; j < 3; ++j) gp[j] += w * (wt[2 * j] - wt[2 * j + 1]);
        break;
      case PredicateKind::AxisBoxOutside:
        for (int j = 0; j < 3; ++j) gp[j] += w * (wt[2 * j + 1] - wt[2 * j]);
        break;
      default:
        for (int j = 0; j < 3; ++j) g.dv[drone][k][j] += w * scale * (wt[2 * j + 1] - wt[2 * j]);
    }
    return true;
  }

  // max over faces of the outward distance; face index 2*axis (below lo) or 2*axis+1 (above hi).
  double outside_margin(const Vec3& p, int* face) const {
    double best = box.lo[0] - p[0];
    int arg = 0;
    for (int j = 0; j < 3; ++j) {
      const double below = box.lo[j] - p[j];
      const double above = p[j] - box.hi[j];
      if (below > best) { best = below; arg = 2 * j; }
      if (above > best) { best = above; arg = 2 * j + 1; }
    }
    if (face) *face = arg;
    return best;
  }
  // min over axes of (limit - v) and (v + limit); face 2*axis is the upper bound.
  double velocity_margin(const Vec3& v, int* face) const {
    double best = limit[0] - v[0];
    int arg = 0;
    for (int j = 0; j < 3; ++j) {
      const double up = limit[j] - v[j];
      const double down = v[j] + limit[j];
      if (up < best) { best = up; arg = 2 * j; }
      if (down < best) { best = down; arg = 2 * j + 1; }
    }
    if (face) *face = arg;
    return best;
  }
};

// ---------------------------------------------------------------------------
// Formulas
// ---------------------------------------------------------------------------

enum class Op { True, Atom, Not, And, Or, Always, Eventually, Next, Until, Implies };

inline const char* op_name(Op op) {
  switch (op) {
    case Op::True: return "true";
    case Op::Atom: return "atom";
    case Op::Not: return "not";
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::Always: return "always";
    case Op::Eventually: return "eventually";
    case Op::Next: return "next";
    case Op::Until: return "until";
    case Op::Implies: return "implies";
  }
  return "?";
}

inline bool is_temporal(Op op) {
  return op == Op::Always || op == Op::Eventually || op == Op::Next || op == Op::Until;
}

struct Node;
using Formula = std::shared_ptr<const Node>;

// Immutable formula node. `id` is unique per process and keys weight maps and reports.
struct Node {
  Op op = Op::True;
  int id = 0;
  std::vector<Formula> children;
  Interval interval;
  std::optional<Predicate> predicate;
  std::string label;
};

namespace detail {
inline std::atomic<int>& node_counter() {
  static std::atomic<int> counter{1};
  return counter;
}
inline int fresh_id() { return node_counter().fetch_add(1); }
inline void reserve_id(int id) {
  int cur = node_counter().load();
  while (cur <= id && !node_counter().compare_exchange_weak(cur, id + 1)) {
  }
}
}  // namespace detail

// Builds a node of kind `op`. Arity: Not/Always/Eventually/Next take one child,
// Until/Implies two, And/Or at least one, True/Atom none.
inline Formula compose(Op op, std::vector<Formula> children, std::optional<Interval> interval = std::nullopt,
                       std::string label = "") {
  std::size_t lo = 0, hi = 0;
  switch (op) {
    case Op::True:
    case Op::Atom: lo = hi = 0; break;
    case Op::Not:
    case Op::Always:
    case Op::Eventually:
    case Op::Next: lo = hi = 1; break;
    case Op::Until:
    case Op::Implies: lo = hi = 2; break;
    case Op::And:
    case Op::Or: lo = 1; hi = static_cast<std::size_t>(-1); break;
  }
  if (children.size() < lo || children.size() > hi)
    throw ArityError(std::string(op_name(op)) + " received " + std::to_string(children.size()) + " operands");
  for (const auto& c : children)
    if (!c) throw ArityError("null operand");
  if (is_temporal(op) != interval.has_value())
    throw IntervalError(std::string(op_name(op)) + (is_temporal(op) ? " requires an interval" : " takes no interval"));
  auto n = std::make_shared<Node>();
  n->op = op;
  n->id = detail::fresh_id();
  n->children = std::move(children);
  if (interval) {
    check_interval(*interval);
    n->interval = *interval;
  }
  n->label = std::move(label);
  return n;
}

inline Formula top() { return compose(Op::True, {}); }
inline Formula atom(Predicate p, std::string label = "") {
  auto n = std::make_shared<Node>();
  n->op = Op::Atom;
  n->id = detail::fresh_id();
  n->predicate = std::move(p);
  n->label = std::move(label);
  return n;
}
inline Formula negate(Formula f) { return compose(Op::Not, {std::move(f)}); }
inline Formula conj(std::vector<Formula> fs, std::string label = "") { return compose(Op::And, std::move(fs), std::nullopt, std::move(label)); }
inline Formula disj(std::vector<Formula> fs, std::string label = "") { return compose(Op::Or, std::move(fs), std::nullopt, std::move(label)); }
inline Formula always(Interval iv, Formula f, std::string label = "") { return compose(Op::Always, {std::move(f)}, iv, std::move(label)); }
inline Formula eventually(Interval iv, Formula f, std::string label = "") { return compose(Op::Eventually, {std::move(f)}, iv, std::move(label)); }
inline Formula next(Interval iv, Formula f) { return compose(Op::Next, {std::move(f)}, iv); }
inline Formula until(Interval iv, Formula a, Formula b) { return compose(Op::Until, {std::move(a), std::move(b)}, iv); }
inline Formula implies(Formula a, Formula b) { return compose(Op::Implies, {std::move(a), std::move(b)}); }

// Minimal trace duration (seconds) needed to evaluate the formula at t = 0.
inline double horizon(const Formula& f) {
  switch (f->op) {
    case Op::True:
    case Op::Atom: return 0.0;
    case Op::Not: return horizon(f->children[0]);
    case Op::And:
    case Op::Or:
    case Op::Implies: {
      double h = 0.0;
      for (const auto& c : f->children) h = std::max(h, horizon(c));
      return h;
    }
    case Op::Always:
    case Op::Eventually:
    case Op::Next: return f->interval.hi + horizon(f->children[0]);
    case Op::Until:
      return f->interval.hi + std::max(horizon(f->children[0]), horizon(f->children[1]));
  }
  return 0.0;
}

// Sample index offset of the designated successor of Next: lo + 1 samples.
inline long next_offset(const SampleInterval& si) { return si.lo + 1; }

// Horizon in samples. Equals round(horizon / Ts) except for degenerate Next
// intervals, whose successor lies one sample past the interval.
inline long horizon_samples(const Formula& f, double Ts, Alignment mode = Alignment::Strict) {
  switch (f->op) {
    case Op::True:
    case Op::Atom: return 0;
    case Op::Not: return horizon_samples(f->children[0], Ts, mode);
    case Op::And:
    case Op::Or:
    case Op::Implies: {
      long h = 0;
      for (const auto& c : f->children) h = std::max(h, horizon_samples(c, Ts, mode));
      return h;
    }
    case Op::Always:
    case Op::Eventually: return align(f->interval, Ts, mode).hi + horizon_samples(f->children[0], Ts, mode);
    case Op::Next: {
      const auto si = align(f->interval, Ts, mode);
      return std::max(si.hi, next_offset(si)) + horizon_samples(f->children[0], Ts, mode);
    }
    case Op::Until:
      return align(f->interval, Ts, mode).hi +
             std::max(horizon_samples(f->children[0], Ts, mode), horizon_samples(f->children[1], Ts, mode));
  }
  return 0;
}

// Visits every node once in pre-order.
template <typename Fn>
void for_each_node(const Formula& f, Fn&& fn) {
  fn(f);
  for (const auto& c : f->children) for_each_node(c, fn);
}

inline Formula find_by_label(const Formula& f, const std::string& label) {
  Formula found;
  for_each_node(f, [&](const Formula& n) {
    if (!found && n->label == label) found = n;
  });
  return found;
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

// Per-node weights: one entry per operand for Boolean nodes, one per window
// sample for Always/Eventually, two (operands) for Until. Missing entries mean 1.
class WeightMap {
 public:
  void set(int node_id, std::vector<double> weights) {
    for (double w : weights)
      if (!(w > 0.0) || !std::isfinite(w)) throw NonPositiveWeight("weight of node " + std::to_string(node_id) + " is not positive");
    weights_[node_id] = std::move(weights);
  }
  const std::vector<double>* find(int node_id) const {
    auto it = weights_.find(node_id);
    return it == weights_.end() ? nullptr : &it->second;
  }
  bool empty() const { return weights_.empty(); }
  const std::unordered_map<int, std::vector<double>>& entries() const { return weights_; }

 private:
  std::unordered_map<int, std::vector<double>> weights_;
};

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {
inline nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v[0], v[1], v[2]}); }
inline Vec3 json_vec(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

inline const char* kind_name(PredicateKind k) {
  switch (k) {
    case PredicateKind::AxisBoxInside: return "box_inside";
    case PredicateKind::AxisBoxOutside: return "box_outside";
    case PredicateKind::MutualDistanceAtLeast: return "mutual_distance";
    case PredicateKind::SegmentDistanceBand: return "segment_band";
    case PredicateKind::VelocityBox: return "velocity_box";
    case PredicateKind::Linear: return "linear";
  }
  return "?";
}
}  // namespace detail

inline nlohmann::json to_json(const Predicate& p) {
  using detail::vec_json;
  nlohmann::json j{{"kind", detail::kind_name(p.kind)}, {"id", p.id}, {"drone", p.drone}};
  switch (p.kind) {
    case PredicateKind::AxisBoxInside:
    case PredicateKind::AxisBoxOutside: j["min"] = vec_json(p.box.lo); j["max"] = vec_json(p.box.hi); break;
    case PredicateKind::MutualDistanceAtLeast: j["other"] = p.other; j["threshold"] = p.threshold; break;
    case PredicateKind::SegmentDistanceBand:
      j["a"] = vec_json(p.segment.a);
      j["b"] = vec_json(p.segment.b);
      j["threshold"] = p.threshold;
      j["epsilon"] = p.epsilon;
      break;
    case PredicateKind::VelocityBox: j["limit"] = vec_json(p.limit); j["scale"] = p.scale; break;
    case PredicateKind::Linear: j["cp"] = vec_json(p.cp); j["cv"] = vec_json(p.cv); j["offset"] = p.offset; break;
  }
  return j;
}

inline Predicate predicate_from_json(const nlohmann::json& j) {
  using detail::json_vec;
  const std::string kind = j.at("kind").get<std::string>();
  const int d = j.at("drone").get<int>();
  const std::string id = j.value("id", "");
  if (kind == "box_inside") return Predicate::inside(d, {json_vec(j.at("min")), json_vec(j.at("max"))}, id);
  if (kind == "box_outside") return Predicate::outside(d, {json_vec(j.at("min")), json_vec(j.at("max"))}, id);
  if (kind == "mutual_distance") return Predicate::mutual_distance(d, j.at("other").get<int>(), j.at("threshold").get<double>(), id);
  if (kind == "segment_band")
    return Predicate::blade_band(d, {json_vec(j.at("a")), json_vec(j.at("b"))}, j.at("threshold").get<double>(),
                                 j.at("epsilon").get<double>(), id);
  if (kind == "velocity_box") return Predicate::velocity_box(d, json_vec(j.at("limit")), j.at("scale").get<double>(), id);
  if (kind == "linear")
    return Predicate::linear(d, json_vec(j.at("cp")), json_vec(j.at("cv")), j.at("offset").get<double>(), id);
  throw ParseError("unknown predicate kind '" + kind + "'");
}

inline nlohmann::json to_json(const Formula& f) {
  nlohmann::json j{{"kind", op_name(f->op)}, {"id", f->id}};
  if (!f->label.empty()) j["label"] = f->label;
  if (is_temporal(f->op)) j["interval"] = {f->interval.lo, f->interval.hi};
  if (f->predicate) j["predicate"] = to_json(*f->predicate);
  if (!f->children.empty()) {
    j["children"] = nlohmann::json::array();
    for (const auto& c : f->children) j["children"].push_back(to_json(c));
  }
  return j;
}

// Rebuilds a formula, keeping the stored node ids.
inline Formula formula_from_json(const nlohmann::json& j) {
  static const std::pair<const char*, Op> table[] = {
      {"true", Op::True},     {"atom", Op::Atom},       {"not", Op::Not},   {"and", Op::And},
      {"or", Op::Or},         {"always", Op::Always},   {"eventually", Op::Eventually},
      {"next", Op::Next},     {"until", Op::Until},     {"implies", Op::Implies}};
  const std::string kind = j.at("kind").get<std::string>();
  std::optional<Op> op;
  for (const auto& [name, o] : table)
    if (kind == name) op = o;
  if (!op) throw ParseError("unknown formula kind '" + kind + "'");

  std::vector<Formula> children;
  if (j.contains("children"))
    for (const auto& c : j.at("children")) children.push_back(formula_from_json(c));

  Formula built;
  if (*op == Op::Atom) {
    built = atom(predicate_from_json(j.at("predicate")), j.value("label", ""));
  } else {
    std::optional<Interval> iv;
    if (j.contains("interval")) iv = Interval{j.at("interval").at(0).get<double>(), j.at("interval").at(1).get<double>()};
    built = compose(*op, std::move(children), iv, j.value("label", ""));
  }
  if (j.contains("id")) {
    const int id = j.at("id").get<int>();
    auto mutable_node = std::const_pointer_cast<Node>(built);
    mutable_node->id = id;
    detail::reserve_id(id);
  }
  return built;
}

}  // namespace stlplan
