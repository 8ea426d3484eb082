#pragma once

// Exact, smooth, weighted and weighted-smooth robustness of formulas over
// sampled traces, plus reverse-mode gradients of the smooth variants.
//
// Evaluation is signal based: every node is evaluated over a contiguous range
// of sample indices, so shared windows of temporal operators are not
// recomputed per parent sample. The result tree mirrors the formula tree and
// doubles as the tape for the reverse sweep.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "stlplan/error.hpp"
#include "stlplan/stl_ast.hpp"
#include "stlplan/trace.hpp"

namespace stlplan {

// ---------------------------------------------------------------------------
// Smooth min / max
// ---------------------------------------------------------------------------

// -(1/lambda) ln sum exp(-lambda v_i), evaluated with a max shift.
inline double smooth_min(std::span<const double> v, double lambda) {
  if (v.empty()) throw EmptyInput("smooth_min of an empty set");
  if (!(lambda > 0.0)) throw Error("lambda must be positive");
  const double m = *std::min_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(-lambda * (x - m));
  return m - std::log(s) / lambda;
}

// sum v_i exp(lambda v_i) / sum exp(lambda v_i): a convex combination of the inputs.
inline double smooth_max(std::span<const double> v, double lambda) {
  if (v.empty()) throw EmptyInput("smooth_max of an empty set");
  if (!(lambda > 0.0)) throw Error("lambda must be positive");
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double num = 0.0, den = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) continue;  // -inf contributes zero weight
    const double w = std::exp(lambda * (x - m));
    num += x * w;
    den += w;
  }
  return num / den;
}

inline double smooth_min(std::initializer_list<double> v, double lambda) {
  return smooth_min(std::span<const double>(v.begin(), v.size()), lambda);
}
inline double smooth_max(std::initializer_list<double> v, double lambda) {
  return smooth_max(std::span<const double>(v.begin(), v.size()), lambda);
}

// ---------------------------------------------------------------------------
// Evaluation options
// ---------------------------------------------------------------------------

enum class Semantics { Exact, Smooth, Weighted, WeightedSmooth };

// How the weighted-smooth transform of operands is combined: smooth for the
// optimizer, exact min/max for reports.
enum class Combine { Smooth, Exact };

struct EvalOptions {
  Semantics semantics = Semantics::Exact;
  double lambda = 10.0;
  const WeightMap* weights = nullptr;
  Combine combine = Combine::Smooth;
  Alignment alignment = Alignment::Strict;
  double kink_sharpness = 0.0;  // > 0 smooths piecewise predicates in the smooth semantics
};

// Result of evaluating one node over samples [t0, t0 + values.size()).
struct NodeSignal {
  const Node* node = nullptr;
  long t0 = 0;
  std::vector<double> values;
  std::vector<NodeSignal> children;
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-operand factor of the weighted-smooth transform:
// ((1/2 - wbar) sign(v) + 1/2), with sign(0) = +1.
inline double wstl_factor(double wbar, double v) { return (0.5 - wbar) * (v >= 0.0 ? 1.0 : -1.0) + 0.5; }

// Combines `v` into one value. `w` is empty (unweighted) or has one weight per
// operand. `dv`, when non-null, receives d(result)/d(v_i).
inline double combine(std::span<const double> v, std::span<const double> w, bool is_min, const EvalOptions& opt,
                      std::vector<double>* dv) {
  const std::size_t n = v.size();
  if (dv) dv->assign(n, 0.0);

  // Operand transform.
  std::vector<double> t(v.begin(), v.end());
  std::vector<double> dt(n, 1.0);
  bool smooth = false;
  switch (opt.semantics) {
    case Semantics::Exact: break;
    case Semantics::Smooth: smooth = true; break;
    case Semantics::Weighted:
      if (!w.empty())
        for (std::size_t i = 0; i < n; ++i) {
          t[i] = w[i] * v[i];
          dt[i] = w[i];
        }
      break;
    case Semantics::WeightedSmooth:
      smooth = opt.combine == Combine::Smooth;
      if (!w.empty()) {
        double sum = 0.0;
        for (double x : w) sum += x;
        for (std::size_t i = 0; i < n; ++i) {
          const double f = wstl_factor(w[i] / sum, v[i]);
          t[i] = f * v[i];
          dt[i] = f;
        }
      }
      break;
  }

  if (!smooth) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (is_min ? t[i] < t[arg] : t[i] > t[arg]) arg = i;
    if (dv) (*dv)[arg] = dt[arg];
    return t[arg];
  }

  const double lambda = opt.lambda;
  if (is_min) {
    const double m = *std::min_element(t.begin(), t.end());
    if (!std::isfinite(m)) {
      if (dv)
        for (std::size_t i = 0; i < n; ++i)
          if (t[i] == m) { (*dv)[i] = dt[i]; break; }
      return m;
    }
    double s = 0.0;
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) s += (e[i] = std::exp(-lambda * (t[i] - m)));
    if (dv)
      for (std::size_t i = 0; i < n; ++i) (*dv)[i] = dt[i] * e[i] / s;
    return m - std::log(s) / lambda;
  }

  const double m = *std::max_element(t.begin(), t.end());
  if (!std::isfinite(m)) {
    if (dv)
      for (std::size_t i = 0; i < n; ++i)
        if (t[i] == m) { (*dv)[i] = dt[i]; break; }
    return m;
  }
  double num = 0.0, den = 0.0;
  std::vector<double> e(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(t[i])) continue;
    e[i] = std::exp(lambda * (t[i] - m));
    num += t[i] * e[i];
    den += e[i];
  }
  const double sm = num / den;
  if (dv)
    for (std::size_t i = 0; i < n; ++i)
      if (std::isfinite(t[i])) (*dv)[i] = dt[i] * (e[i] / den) * (1.0 + lambda * (t[i] - sm));
  return sm;
}

inline std::span<const double> node_weights(const Node* n, const EvalOptions& opt, std::size_t expected) {
  if (!opt.weights || opt.semantics == Semantics::Exact || opt.semantics == Semantics::Smooth) return {};
  const auto* w = opt.weights->find(n->id);
  if (!w) return {};
  if (w->size() != expected)
    throw NonPositiveWeight("node " + std::to_string(n->id) + " has " + std::to_string(w->size()) +
                            " weights, expected " + std::to_string(expected));
  return {w->data(), w->size()};
}

class Evaluator {
 public:
  Evaluator(const Trace& tr, const EvalOptions& opt) : tr_(tr), opt_(opt) {}

  double kappa() const {
    const bool smooth = opt_.semantics == Semantics::Smooth || opt_.semantics == Semantics::WeightedSmooth;
    return smooth ? opt_.kink_sharpness : 0.0;
  }

  NodeSignal forward(const Node* n, long t0, long count) const {
    NodeSignal out;
    out.node = n;
    out.t0 = t0;
    out.values.assign(static_cast<std::size_t>(count), 0.0);
    auto& val = out.values;

    switch (n->op) {
      case Op::True:
        std::fill(val.begin(), val.end(), kInf);
        break;
      case Op::Atom:
        for (long i = 0; i < count; ++i) val[i] = n->predicate->value(tr_, static_cast<std::size_t>(t0 + i), kappa());
        break;
      case Op::Not: {
        out.children.push_back(forward(n->children[0].get(), t0, count));
        for (long i = 0; i < count; ++i) val[i] = -out.children[0].values[i];
        break;
      }
      case Op::And:
      case Op::Or:
      case Op::Implies: {
        for (const auto& c : n->children) out.children.push_back(forward(c.get(), t0, count));
        const bool is_min = n->op == Op::And;
        const double sgn0 = n->op == Op::Implies ? -1.0 : 1.0;
        const auto w = node_weights(n, opt_, n->children.size());
        std::vector<double> buf(n->children.size());
        for (long i = 0; i < count; ++i) {
          for (std::size_t c = 0; c < buf.size(); ++c) buf[c] = out.children[c].values[i];
          buf[0] *= sgn0;
          val[i] = combine(buf, w, is_min, opt_, nullptr);
        }
        break;
      }
      case Op::Always:
      case Op::Eventually: {
        const auto si = align(n->interval, tr_.Ts, opt_.alignment);
        const long width = si.width();
        out.children.push_back(forward(n->children[0].get(), t0 + si.lo, count + width - 1));
        const auto& cv = out.children[0].values;
        const auto w = node_weights(n, opt_, static_cast<std::size_t>(width));
        const bool is_min = n->op == Op::Always;
        for (long i = 0; i < count; ++i)
          val[i] = combine(std::span<const double>(cv.data() + i, width), w, is_min, opt_, nullptr);
        break;
      }
      case Op::Next: {
        const auto si = align(n->interval, tr_.Ts, opt_.alignment);
        out.children.push_back(forward(n->children[0].get(), t0 + next_offset(si), count));
        val = out.children[0].values;
        break;
      }
      case Op::Until: {
        const auto si = align(n->interval, tr_.Ts, opt_.alignment);
        out.children.push_back(forward(n->children[0].get(), t0, count + si.hi));
        out.children.push_back(forward(n->children[1].get(), t0, count + si.hi));
        for (long i = 0; i < count; ++i) val[i] = until_at(out, si, i, nullptr);
        break;
      }
    }
    return out;
  }

  // Reverse sweep: `adj` holds d(objective)/d(node value) per sample.
  void backward(const NodeSignal& s, const std::vector<double>& adj, StateGradient& g) const {
    const Node* n = s.node;
    const long count = static_cast<long>(s.values.size());
    switch (n->op) {
      case Op::True: break;
      case Op::Atom:
        for (long i = 0; i < count; ++i)
          if (adj[i] != 0.0) n->predicate->accumulate_gradient(tr_, static_cast<std::size_t>(s.t0 + i), adj[i], g, kappa());
        break;
      case Op::Not: {
        std::vector<double> ca(adj.size());
        for (std::size_t i = 0; i < adj.size(); ++i) ca[i] = -adj[i];
        backward(s.children[0], ca, g);
        break;
      }
      case Op::And:
      case Op::Or:
      case Op::Implies: {
        const std::size_t m = n->children.size();
        std::vector<std::vector<double>> ca(m, std::vector<double>(count, 0.0));
        const bool is_min = n->op == Op::And;
        const double sgn0 = n->op == Op::Implies ? -1.0 : 1.0;
        const auto w = node_weights(n, opt_, m);
        std::vector<double> buf(m), dv;
        for (long i = 0; i < count; ++i) {
          if (adj[i] == 0.0) continue;
          for (std::size_t c = 0; c < m; ++c) buf[c] = s.children[c].values[i];
          buf[0] *= sgn0;
          combine(buf, w, is_min, opt_, &dv);
          for (std::size_t c = 0; c < m; ++c) ca[c][i] = adj[i] * dv[c];
          ca[0][i] *= sgn0;
        }
        for (std::size_t c = 0; c < m; ++c) backward(s.children[c], ca[c], g);
        break;
      }
      case Op::Always:
      case Op::Eventually: {
        const auto si = align(n->interval, tr_.Ts, opt_.alignment);
        const long width = si.width();
        const auto& cv = s.children[0].values;
        std::vector<double> ca(cv.size(), 0.0), dv;
        const auto w = node_weights(n, opt_, static_cast<std::size_t>(width));
        const bool is_min = n->op == Op::Always;
        for (long i = 0; i < count; ++i) {
          if (adj[i] == 0.0) continue;
          combine(std::span<const double>(cv.data() + i, width), w, is_min, opt_, &dv);
          for (long j = 0; j < width; ++j) ca[i + j] += adj[i] * dv[j];
        }
        backward(s.children[0], ca, g);
        break;
      }
      case Op::Next: backward(s.children[0], adj, g); break;
      case Op::Until: {
        const auto si = align(n->interval, tr_.Ts, opt_.alignment);
        std::vector<double> a1(s.children[0].values.size(), 0.0), a2(s.children[1].values.size(), 0.0);
        UntilAdjoint acc{&a1, &a2, 0.0};
        for (long i = 0; i < count; ++i) {
          if (adj[i] == 0.0) continue;
          acc.scale = adj[i];
          until_at(s, si, i, &acc);
        }
        backward(s.children[0], a1, g);
        backward(s.children[1], a2, g);
        break;
      }
    }
  }

 private:
  struct UntilAdjoint {
    std::vector<double>* a1;
    std::vector<double>* a2;
    double scale;
  };

  // max over t' in [i+lo, i+hi] of min(rho2(t'), min over t'' in [i, t'] rho1(t'')).
  // Child signals start at the node's own t0, so local index i addresses both.
  double until_at(const NodeSignal& s, const SampleInterval& si, long i, UntilAdjoint* acc) const {
    const auto& r1 = s.children[0].values;
    const auto& r2 = s.children[1].values;
    std::span<const double> w;
    if (opt_.weights && (opt_.semantics == Semantics::Weighted || opt_.semantics == Semantics::WeightedSmooth))
      w = node_weights(s.node, opt_, 2);

    const long width = si.width();
    std::vector<double> outer(width);
    std::vector<std::vector<double>> inner_dv(acc ? width : 0);
    for (long j = 0; j < width; ++j) {
      const long tp = i + si.lo + j;
      // inner operands: rho2(t'), rho1(i..t')
      std::vector<double> inner;
      std::vector<double> iw;
      inner.reserve(tp - i + 2);
      inner.push_back(r2[tp]);
      for (long k = i; k <= tp; ++k) inner.push_back(r1[k]);
      if (!w.empty()) {
        iw.assign(inner.size(), w[0]);
        iw[0] = w[1];
      }
      outer[j] = combine(inner, iw, true, opt_, acc ? &inner_dv[j] : nullptr);
    }
    if (!acc) return combine(outer, {}, false, opt_, nullptr);
    std::vector<double> odv;
    const double r = combine(outer, {}, false, opt_, &odv);
    for (long j = 0; j < width; ++j) {
      if (odv[j] == 0.0) continue;
      const long tp = i + si.lo + j;
      const double g = acc->scale * odv[j];
      (*acc->a2)[tp] += g * inner_dv[j][0];
      for (long k = i; k <= tp; ++k) (*acc->a1)[k] += g * inner_dv[j][1 + (k - i)];
    }
    return r;
  }

  const Trace& tr_;
  const EvalOptions& opt_;
};

inline void check_length(const Formula& f, const Trace& tr, long t_index, long count, Alignment mode) {
  const long need = t_index + count - 1 + horizon_samples(f, tr.Ts, mode);
  if (t_index < 0 || need >= static_cast<long>(tr.samples()))
    throw TraceTooShort("formula needs sample " + std::to_string(need) + " but the trace has " +
                        std::to_string(tr.samples()) + " samples");
}

}  // namespace detail

// Evaluates `f` over samples [t_index, t_index + count) and returns the full result tree.
inline NodeSignal evaluate_signal(const Formula& f, const Trace& tr, const EvalOptions& opt, long t_index = 0,
                                  long count = 1) {
  detail::check_length(f, tr, t_index, count, opt.alignment);
  return detail::Evaluator(tr, opt).forward(f.get(), t_index, count);
}

inline double eval_exact(const Formula& f, const Trace& tr, long t_index = 0, Alignment mode = Alignment::Strict) {
  EvalOptions opt;
  opt.alignment = mode;
  return evaluate_signal(f, tr, opt, t_index).values[0];
}

inline double eval_smooth(const Formula& f, const Trace& tr, long t_index, double lambda) {
  if (!(lambda > 0.0)) throw Error("lambda must be positive");
  EvalOptions opt;
  opt.semantics = Semantics::Smooth;
  opt.lambda = lambda;
  return evaluate_signal(f, tr, opt, t_index).values[0];
}

inline double eval_weighted(const Formula& f, const WeightMap& w, const Trace& tr, long t_index = 0) {
  EvalOptions opt;
  opt.semantics = Semantics::Weighted;
  opt.weights = &w;
  return evaluate_signal(f, tr, opt, t_index).values[0];
}

inline double eval_weighted_smooth(const Formula& f, const WeightMap& w, const Trace& tr, long t_index, double lambda,
                                   Combine combine = Combine::Smooth) {
  if (!(lambda > 0.0)) throw Error("lambda must be positive");
  EvalOptions opt;
  opt.semantics = Semantics::WeightedSmooth;
  opt.weights = &w;
  opt.lambda = lambda;
  opt.combine = combine;
  return evaluate_signal(f, tr, opt, t_index).values[0];
}

// Gradient of the smooth (or weighted-smooth, when `weights` is given) robustness
// at t = 0 with respect to every position and velocity sample.
inline StateGradient gradient_smooth(const Formula& f, const Trace& tr, double lambda,
                                     const WeightMap* weights = nullptr, double* value = nullptr) {
  if (!(lambda > 0.0)) throw Error("lambda must be positive");
  EvalOptions opt;
  opt.semantics = weights ? Semantics::WeightedSmooth : Semantics::Smooth;
  opt.weights = weights;
  opt.lambda = lambda;
  const detail::Evaluator ev(tr, opt);
  detail::check_length(f, tr, 0, 1, opt.alignment);
  const NodeSignal sig = ev.forward(f.get(), 0, 1);
  if (value) *value = sig.values[0];
  StateGradient g(tr.drone_count(), tr.samples());
  ev.backward(sig, {1.0}, g);
  return g;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct NodeRobustness {
  long t = 0;  // first sample the node is evaluated on
  double exact = 0;
  double smooth = 0;
  std::string label;
};

struct RobustnessReport {
  double exact = 0;
  double smooth = 0;
  std::map<int, NodeRobustness> per_node;
  bool satisfied = false;
  double lambda = 0;
};

// Exact and smooth robustness at t = 0 with a per-node breakdown. With weights,
// `smooth` is the weighted-smooth value and per-node values are the weighted
// transforms combined by exact min/max.
inline RobustnessReport make_report(const Formula& f, const Trace& tr, double lambda, const WeightMap* weights = nullptr) {
  EvalOptions ex;
  EvalOptions sm;
  sm.semantics = weights ? Semantics::WeightedSmooth : Semantics::Smooth;
  sm.weights = weights;
  sm.lambda = lambda;
  const NodeSignal se = evaluate_signal(f, tr, ex);
  const NodeSignal ss = evaluate_signal(f, tr, sm);

  RobustnessReport r;
  r.exact = se.values[0];
  r.smooth = ss.values[0];
  r.satisfied = r.exact > 0.0;
  r.lambda = lambda;
  auto walk = [&](auto&& self, const NodeSignal& a, const NodeSignal& b) -> void {
    auto [it, fresh] = r.per_node.try_emplace(a.node->id);
    if (fresh) it->second = {a.t0, a.values[0], b.values[0], a.node->label};
    for (std::size_t i = 0; i < a.children.size(); ++i) self(self, a.children[i], b.children[i]);
  };
  walk(walk, se, ss);
  return r;
}

inline nlohmann::json to_json(const RobustnessReport& r) {
  nlohmann::json nodes = nlohmann::json::object();
  for (const auto& [id, n] : r.per_node) {
    nlohmann::json e{{"t", n.t}, {"exact", n.exact}, {"smooth", n.smooth}};
    if (!n.label.empty()) e["label"] = n.label;
    nodes[std::to_string(id)] = e;
  }
  return {{"exact", r.exact}, {"smooth", r.smooth}, {"satisfied", r.satisfied}, {"lambda", r.lambda}, {"per_node", nodes}};
}

inline RobustnessReport report_from_json(const nlohmann::json& j) {
  RobustnessReport r;
  r.exact = j.at("exact").get<double>();
  r.smooth = j.at("smooth").get<double>();
  r.satisfied = j.at("satisfied").get<bool>();
  r.lambda = j.at("lambda").get<double>();
  for (const auto& [key, e] : j.at("per_node").items())
    r.per_node[std::stoi(key)] = {e.at("t").get<long>(), e.at("exact").get<double>(), e.at("smooth").get<double>(),
                                  e.value("label", "")};
  return r;
}

}  // namespace stlplan
