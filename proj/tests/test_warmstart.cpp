#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace stlplan;

static Scenario fig3_like() {
  Scenario sc;
  sc.workspace = {{0, 0, 0}, {20, 20, 10}};
  for (int q = 0; q < 3; ++q) sc.targets.push_back({{{2.0 + 3 * q, 10, 2}, {3.0 + 3 * q, 11, 3}}, 0.0});
  sc.blades.push_back({{{5, 15, 5}, {12, 15, 5}}, {{5, 16, 4}, {12, 18, 6}}, 0});
  sc.blades.push_back({{{5, 15, 5}, {12, 15, 5}}, {{5, 12, 4}, {12, 14, 6}}, 0});
  for (int d = 0; d < 2; ++d) {
    DroneSpec s;
    s.depot = {2.0 + 10 * d, 2, 1};
    s.home = {{1.0 + 10 * d, 1, 0.5}, {3.0 + 10 * d, 3, 1.5}};
    sc.fleet.push_back(s);
  }
  sc.validate();
  return sc;
}

TEST(Graph, TaskAndDepotCounts) {
  const InspectionGraph g = build_graph(fig3_like());
  EXPECT_EQ(g.task_count(), 4u);
  EXPECT_EQ(g.drone_count(), 2u);
  EXPECT_EQ(g.edge_count(0), 10u);
  for (std::size_t d = 0; d < 2; ++d)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) EXPECT_EQ(g.weight(d, i, j), g.weight(d, j, i));
  EXPECT_EQ(g.weight(0, g.depot_vertex(1), 0), std::numeric_limits<double>::infinity());
  // Blade node sits at the midpoint of its sides' segments.
  EXPECT_EQ(g.tasks[3].position, (Vec3{8.5, 15, 5}));
}

TEST(Graph, IdenticalLimitsGiveIdenticalTaskWeights) {
  const InspectionGraph g = build_graph(fig3_like());
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(g.weight(0, i, j), g.weight(1, i, j));
}

TEST(Graph, TimeOfFlightWeights) {
  Scenario sc = fig3_like();
  sc.targets.resize(2);
  sc.targets[1].box = {{3, 10, 2}, {4, 11, 3}};  // centre 1 m from target 0
  sc.blades.clear();
  const InspectionGraph g = build_graph(sc);
  EXPECT_DOUBLE_EQ(g.weight(0, 0, 1), 2.0);
}

TEST(Graph, CapabilityUsesSentinel) {
  Scenario sc = fig3_like();
  sc.fleet[0].targets = std::vector<int>{0, 1};
  const InspectionGraph g = build_graph(sc);
  EXPECT_FALSE(g.capable(0, 2));
  EXPECT_TRUE(g.capable(1, 2));
  EXPECT_EQ(g.weight(0, 0, 2), kUnservable);
}

TEST(Solve, SingleDroneTwoTasks) {
  // Vertices: A=0, B=1, O=2.
  const auto g = InspectionGraph::from_weights({{{0, 1, 1}, {1, 0, 2}, {1, 2, 0}}});
  const RoutePlan p = solve_assignment(g);
  EXPECT_EQ(p.objective, 4.0);
  EXPECT_EQ(p.routes[0], (Route{2, 0, 1, 2}));
  EXPECT_EQ(oracle::enumerate_routes(g), 4.0);
}

TEST(Solve, EachDroneTakesNearTask) {
  // Local matrices: rows/cols A, B, own depot.
  const auto g = InspectionGraph::from_weights({{{0, 10, 1}, {10, 0, 10}, {1, 10, 0}}, {{0, 10, 10}, {10, 0, 1}, {10, 1, 0}}});
  const RoutePlan p = solve_assignment(g);
  EXPECT_EQ(p.objective, 4.0);
  EXPECT_EQ(p.routes[0], (Route{2, 0, 2}));
  EXPECT_EQ(p.routes[1], (Route{3, 1, 3}));
}

TEST(Solve, NoTasks) {
  const auto g = InspectionGraph::from_weights({{{0}}, {{0}}});
  const RoutePlan p = solve_assignment(g);
  EXPECT_EQ(p.objective, 0.0);
  EXPECT_EQ(p.routes[0], (Route{0, 0}));
  EXPECT_EQ(p.routes[1], (Route{1, 1}));
}

TEST(Solve, MatchesEnumeration) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    const InspectionGraph g = oracle::random_graph(rng, 1 + i % 5, 1 + i % 2);
    const RoutePlan p = solve_assignment(g);
    EXPECT_EQ(p.objective, oracle::enumerate_routes(g));
    EXPECT_TRUE(verify_plan(p, g).valid);
  }
}

TEST(Solve, AddingTaskNeverLowersObjective) {
  std::mt19937_64 rng(32);
  for (int i = 0; i < 50; ++i) {
    const InspectionGraph big = oracle::random_graph(rng, 5, 2);
    auto w = big.local;
    for (auto& m : w) {
      m.erase(m.begin() + 4);
      for (auto& row : m) row.erase(row.begin() + 4);
    }
    const auto small = InspectionGraph::from_weights(w);
    bool coverable = true;
    for (int t = 0; t < 4; ++t) coverable = coverable && (small.capable(0, t) || small.capable(1, t));
    if (!coverable) continue;
    EXPECT_LE(solve_assignment(small).objective, solve_assignment(big).objective);
  }
}

TEST(Solve, UncoverableTask) {
  const auto g = InspectionGraph::from_weights({{{0, kUnservable}, {kUnservable, 0}}});
  EXPECT_THROW(solve_assignment(g), Uncoverable);
}

TEST(Verify, ViolationClasses) {
  std::mt19937_64 rng(33);
  const InspectionGraph g = oracle::random_graph(rng, 3, 2);
  const int o0 = g.depot_vertex(0), o1 = g.depot_vertex(1);
  EXPECT_TRUE(verify_plan(solve_assignment(g), g).valid);

  const PlanCheck missing = verify_plan(RoutePlan{{{o0, 0, 1, o0}, {o1, o1}}, {}, 0}, g);
  ASSERT_TRUE(missing.has(Violation::Kind::Coverage));
  EXPECT_EQ(missing.violations.front().vertex, 2);

  const PlanCheck twice = verify_plan(RoutePlan{{{o0, 0, o0, 1, 2, o0}, {o1, o1}}, {}, 0}, g);
  EXPECT_TRUE(twice.has(Violation::Kind::DepotDegree));
  EXPECT_FALSE(twice.has(Violation::Kind::Flow));

  const PlanCheck open = verify_plan(RoutePlan{{{2, o0, 0, 1}, {o1, o1}}, {}, 0}, g);
  EXPECT_TRUE(open.has(Violation::Kind::Flow));
}

TEST(Verify, SubtoursCountTowardCoverage) {
  std::mt19937_64 rng(34);
  const InspectionGraph g = oracle::random_graph(rng, 4, 1);
  const int o = g.depot_vertex(0);
  const RoutePlan p{{{o, 0, 1, o}}, {{{2, 3}}}, 0};
  EXPECT_TRUE(verify_plan(p, g).valid);
}

TEST(Stitch, ConnectedPlanUnchanged) {
  std::mt19937_64 rng(35);
  const InspectionGraph g = oracle::random_graph(rng, 4, 2);
  const RoutePlan p = solve_assignment(g);
  const RoutePlan s = stitch_subtours(p, g);
  EXPECT_EQ(s.routes, p.routes);
  EXPECT_EQ(s.objective, p.objective);
}

TEST(Stitch, TwoCyclesMergeAtCheapestSplice) {
  std::mt19937_64 rng(36);
  for (int i = 0; i < 30; ++i) {
    const InspectionGraph g = oracle::random_graph(rng, 3, 1);
    const int o = g.depot_vertex(0);
    const RoutePlan p{{{o, 0, o}}, {{{1, 2}}}, 0};
    const RoutePlan s = stitch_subtours(p, g);
    ASSERT_TRUE(s.subtours.empty());
    ASSERT_EQ(s.routes[0].size(), 5u);
    EXPECT_TRUE(verify_plan(s, g).valid);
    // Every closed tour over {0, 1, 2} that keeps 1 and 2 adjacent.
    double best = std::numeric_limits<double>::infinity();
    const std::vector<Route> options{{o, 0, 1, 2, o}, {o, 0, 2, 1, o}, {o, 1, 2, 0, o}, {o, 2, 1, 0, o}};
    for (const auto& r : options) best = std::min(best, route_cost(g, 0, r));
    EXPECT_EQ(s.objective, best);
  }
}

TEST(Stitch, EmptyRouteUnchanged) {
  const auto g = InspectionGraph::from_weights({{{0}}});
  const RoutePlan s = stitch_subtours(RoutePlan{{{0, 0}}, {}, 0}, g);
  EXPECT_EQ(s.routes[0], (Route{0, 0}));
}

TEST(Json, RoutePlanRoundTrip) {
  const InspectionGraph g = build_graph(fig3_like());
  const RoutePlan p = solve_assignment(g);
  const RoutePlan q = route_plan_from_json(nlohmann::json::parse(to_json(p).dump()));
  EXPECT_EQ(q.routes, p.routes);
  EXPECT_EQ(q.objective, p.objective);
}

static Scenario one_target() {
  Scenario sc;
  sc.workspace = {{-5, -5, -5}, {5, 5, 5}};
  sc.targets.push_back({{{0.5, -0.5, -0.5}, {1.5, 0.5, 0.5}}, 0.0});
  DroneSpec s;
  s.depot = {0, 0, 0};
  s.home = {{-0.4, -0.4, -0.4}, {0.4, 0.4, 0.4}};
  sc.fleet.push_back(s);
  sc.validate();
  return sc;
}

TEST(Seed, EmptyRouteHovers) {
  Scenario sc = one_target();
  const InspectionGraph g = build_graph(sc);
  const SeedResult s = seed_trajectories(RoutePlan{{{1, 1}}, {}, 0}, g, sc);
  ASSERT_EQ(s.trace.samples(), static_cast<std::size_t>(sc.steps() + 1));
  for (const auto& p : s.trace.drones[0].p) EXPECT_EQ(p, (Vec3{0, 0, 0}));
}

TEST(Seed, SingleTargetTimeline) {
  const Scenario sc = one_target();
  const InspectionGraph g = build_graph(sc);
  const SeedResult s = seed_trajectories(solve_assignment(g), g, sc);
  const auto& p = s.trace.drones[0].p;
  ASSERT_EQ(p.size(), 261u);
  EXPECT_FALSE(s.horizon_overflow);
  // Arrive at 2 s, dwell to 3 s, home by 5 s, hover to 13 s.
  EXPECT_NEAR(p[40][0], 1.0, 1e-9);
  EXPECT_NEAR(p[60][0], 1.0, 1e-9);
  EXPECT_LT(p[39][0], 1.0 - 1e-6);
  EXPECT_GT(p[61][0], -1e-9);
  EXPECT_LT(p[61][0], 1.0 - 1e-9);
  for (std::size_t k = 100; k < p.size(); ++k) EXPECT_NEAR(p[k][0], 0.0, 1e-9);
  ASSERT_EQ(s.visits[0].size(), 1u);
  EXPECT_EQ(s.visits[0][0].start, 40);
  EXPECT_EQ(s.visits[0][0].end, 60);
}

TEST(Seed, ConsistentAndFeasible) {
  for (const char* f : {"windturbine_mock.json", "two_drone_swap.json"}) {
    const Scenario sc = load_scenario(oracle::fixture(f));
    const InspectionGraph g = build_graph(sc);
    const SeedResult s = seed_trajectories(stitch_subtours(solve_assignment(g), g), g, sc);
    EXPECT_TRUE(dynamics_consistent(s.trace));
    for (std::size_t d = 0; d < sc.drone_count(); ++d) EXPECT_TRUE(within_bounds(s.trace.drones[d].a, sc.fleet[d].limits.a_max));
  }
}

TEST(Seed, OverflowReported) {
  Scenario sc = one_target();
  sc.targets[0].box = {{3.5, -0.5, -0.5}, {4.5, 0.5, 0.5}};
  sc.timing.T_N = 4.0;
  sc.timing.T_ins = 1.0;
  sc.timing.T_bla = 1.0;
  const InspectionGraph g = build_graph(sc);
  const SeedResult s = seed_trajectories(solve_assignment(g), g, sc);
  EXPECT_TRUE(s.horizon_overflow);
  EXPECT_GT(s.trace.samples(), static_cast<std::size_t>(sc.steps() + 1));
}
