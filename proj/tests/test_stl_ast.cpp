#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"

using namespace stlplan;
using oracle::scalar_trace;
using oracle::x_minus;

TEST(Compose, DoubleNegationIsIdentity) {
  std::mt19937_64 rng(7);
  const Formula p = x_minus(2.0);
  const Formula nn = negate(negate(p));
  for (int i = 0; i < 20; ++i) {
    const Trace tr = oracle::random_trace(rng, 1, 5);
    for (long k = 0; k < 5; ++k) EXPECT_EQ(eval_exact(nn, tr, k), eval_exact(p, tr, k));
  }
}

TEST(Compose, EmptyConjunctionRejected) { EXPECT_THROW(compose(Op::And, {}), ArityError); }

TEST(Compose, ArityAndIntervalChecks) {
  const Formula p = x_minus(0.0);
  EXPECT_THROW(compose(Op::Not, {p, p}), ArityError);
  EXPECT_THROW(compose(Op::Until, {p}), ArityError);
  EXPECT_THROW(compose(Op::Always, {p}), IntervalError);
  EXPECT_THROW(compose(Op::And, {p}, Interval{0, 1}), IntervalError);
  EXPECT_THROW(always({2.0, 1.0}, p), IntervalError);
  EXPECT_THROW(always({-1.0, 1.0}, p), IntervalError);
  EXPECT_THROW(always({0.0, std::numeric_limits<double>::infinity()}, p), IntervalError);
}

TEST(Compose, MissionWindowAlignsToSamples) {
  const Formula f = always({0.0, 13.0}, x_minus(0.0));
  const SampleInterval si = align(f->interval, 0.05);
  EXPECT_EQ(si.lo, 0);
  EXPECT_EQ(si.hi, 260);
  EXPECT_EQ(si.width(), 261);
}

TEST(Compose, StrictAlignmentRejectsOffGrid) {
  EXPECT_THROW(align({0.0, 0.07}, 0.05), IntervalError);
  const SampleInterval si = align({0.0, 0.07}, 0.05, Alignment::Nearest);
  EXPECT_EQ(si.hi, 1);
}

TEST(Compose, NodeIdsUnique) {
  std::set<int> ids;
  const Formula f = until({0, 1}, conj({x_minus(1), x_minus(2)}), eventually({0, 2}, x_minus(3)));
  int n = 0;
  for_each_node(f, [&](const Formula& x) {
    ids.insert(x->id);
    ++n;
  });
  EXPECT_EQ(static_cast<int>(ids.size()), n);
}

TEST(Compose, ImpliesMatchesDisjunctionOfNegation) {
  std::mt19937_64 rng(11);
  const Formula a = x_minus(0.5), b = x_minus(-0.5);
  const Formula i = implies(a, b), o = disj({negate(a), b});
  for (int r = 0; r < 50; ++r) {
    const Trace tr = oracle::random_trace(rng, 1, 2);
    EXPECT_EQ(eval_exact(i, tr), eval_exact(o, tr));
  }
}

TEST(Horizon, AtomHasNone) { EXPECT_EQ(horizon(x_minus(0)), 0.0); }

TEST(Horizon, NestedBladeWindow) {
  EXPECT_DOUBLE_EQ(horizon(eventually({0, 11.5}, always({0, 1.5}, x_minus(0)))), 13.0);
}

TEST(Horizon, UntilTakesLongerOperand) {
  EXPECT_DOUBLE_EQ(horizon(until({2, 5}, x_minus(0), always({0, 3}, x_minus(1)))), 8.0);
}

TEST(Horizon, SamplesMatchSeconds) {
  const Formula f = until({0.1, 0.25}, x_minus(0), always({0, 0.15}, x_minus(1)));
  EXPECT_EQ(horizon_samples(f, 0.05), 8);
}

TEST(Horizon, NextReachesOnePastLowerBound) {
  EXPECT_EQ(horizon_samples(next({0.0, 0.0}, x_minus(0)), 0.05), 1);
  EXPECT_EQ(horizon_samples(next({0.0, 0.05}, x_minus(0)), 0.05), 1);
  const Trace tr = scalar_trace({0.0, 4.0});
  EXPECT_EQ(eval_exact(next({0.0, 0.05}, x_minus(1.0)), tr), 3.0);
}

TEST(Predicates, RejectDegenerateGeometry) {
  EXPECT_THROW(Predicate::inside(0, Box{{0, 0, 0}, {1, 0, 1}}), Error);
  EXPECT_THROW(Predicate::blade_band(0, {{1, 1, 1}, {1, 1, 1}}, 2.5, 1.0), DegenerateSegment);
  EXPECT_THROW(Predicate::blade_band(0, {{0, 0, 0}, {1, 0, 0}}, 1.0, 1.0), Error);
  EXPECT_THROW(Predicate::mutual_distance(1, 1, 1.0), Error);
  EXPECT_THROW(Predicate::velocity_box(0, {1, 0, 1}), Error);
}

TEST(Predicates, ValuesAreFinite) {
  std::mt19937_64 rng(3);
  oracle::FormulaGen gen{rng};
  gen.drones = 2;
  for (int i = 0; i < 200; ++i) {
    const Predicate p = gen.predicate();
    const Trace tr = oracle::random_trace(rng, 2, 1);
    EXPECT_TRUE(std::isfinite(p.value(tr, 0)));
  }
}

TEST(Predicates, BoxAndBandValues) {
  const Trace tr = scalar_trace({0.25});
  EXPECT_DOUBLE_EQ(Predicate::inside(0, Box{{0, -1, -1}, {1, 1, 1}}).value(tr, 0), 0.25);
  EXPECT_DOUBLE_EQ(Predicate::outside(0, Box{{0.5, -1, -1}, {1, 1, 1}}).value(tr, 0), 0.25);
  const Predicate band = Predicate::blade_band(0, {{0, 2.5, 0}, {7, 2.5, 0}}, 2.5, 1.0);
  EXPECT_NEAR(band.value(scalar_trace({3.0}), 0), 1.0, 1e-12);
}

TEST(Weights, RejectNonPositive) {
  WeightMap w;
  EXPECT_THROW(w.set(1, {1.0, 0.0}), NonPositiveWeight);
  EXPECT_THROW(w.set(1, {-2.0}), NonPositiveWeight);
  w.set(1, {1.0, 3.0});
  ASSERT_NE(w.find(1), nullptr);
  EXPECT_EQ(w.find(2), nullptr);
}

TEST(Json, FormulaRoundTrip) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 50; ++i) {
    oracle::FormulaGen gen{rng};
    gen.drones = 2;
    const Formula f = gen.make(3);
    const Formula g = formula_from_json(to_json(f));
    EXPECT_EQ(to_json(g).dump(), to_json(f).dump());
    const Trace tr = oracle::random_trace(rng, 2, horizon_samples(f, 0.05) + 1);
    EXPECT_EQ(eval_exact(f, tr), eval_exact(g, tr));
  }
}

TEST(Labels, FindByLabel) {
  const Formula inner = x_minus(1);
  const Formula f = conj({always({0, 1}, inner, "keep"), x_minus(2)}, "root");
  ASSERT_TRUE(find_by_label(f, "keep"));
  EXPECT_EQ(find_by_label(f, "keep")->op, Op::Always);
  EXPECT_FALSE(find_by_label(f, "absent"));
}
