#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace stlplan;

static Scenario tiny(int drones, int targets, bool obstacle) {
  Scenario sc;
  sc.workspace = {{0, 0, 0}, {10, 10, 5}};
  if (obstacle) sc.obstacles.push_back({{4, 4, 0}, {5, 5, 3}});
  for (int q = 0; q < targets; ++q) sc.targets.push_back({{{1.0 + q, 7, 1}, {2.0 + q, 8, 2}}, 0.0});
  for (int d = 0; d < drones; ++d) {
    DroneSpec s;
    s.depot = {1.0 + 2 * d, 1, 1};
    s.home = {{0.5 + 2 * d, 0.5, 0.5}, {1.5 + 2 * d, 1.5, 1.5}};
    sc.fleet.push_back(s);
  }
  sc.validate();
  return sc;
}

TEST(Compile, WindTurbineHasTwentyConjuncts) {
  const Scenario sc = load_scenario(oracle::fixture("windturbine_mock.json"));
  const Mission m = compile_mission(sc);
  EXPECT_EQ(m.conjuncts.size(), 20u);
  EXPECT_EQ(m.formula->children.size(), 20u);
  int safety = 0, target = 0, blade = 0, home = 0, stay = 0;
  for (const auto& c : m.conjuncts) {
    const std::string l = c->label;
    safety += l.rfind("safety[", 0) == 0;
    target += l.rfind("target[", 0) == 0;
    blade += l.rfind("blade[", 0) == 0;
    home += l.rfind("home[", 0) == 0;
    stay += l.rfind("stay_home[", 0) == 0;
  }
  EXPECT_EQ(safety, 3);
  EXPECT_EQ(target, 9);
  EXPECT_EQ(blade, 2);
  EXPECT_EQ(home, 3);
  EXPECT_EQ(stay, 3);
  EXPECT_DOUBLE_EQ(horizon(m.formula), sc.timing.T_N);
}

TEST(Compile, NoObstaclesPrunesClause) {
  const Mission m = compile_mission(tiny(2, 1, false));
  EXPECT_FALSE(find_by_label(m.formula, "obs[0]"));
  ASSERT_TRUE(find_by_label(m.formula, "safe[0]"));
  EXPECT_EQ(find_by_label(m.formula, "safe[0]")->children.size(), 2u);  // workspace, distance
  const Mission w = compile_mission(tiny(2, 1, true));
  EXPECT_TRUE(find_by_label(w.formula, "obs[0]"));
  EXPECT_EQ(find_by_label(w.formula, "safe[0]")->children.size(), 3u);
}

TEST(Compile, SingleCapableDroneGivesUnaryDisjunction) {
  const Mission m = compile_mission(tiny(1, 1, false));
  const Formula t = find_by_label(m.formula, "target[0]");
  ASSERT_TRUE(t);
  ASSERT_EQ(t->op, Op::Eventually);
  EXPECT_EQ(t->children[0]->op, Op::Or);
  EXPECT_EQ(t->children[0]->children.size(), 1u);
}

TEST(Compile, CapabilityMaskRestrictsDisjunction) {
  Scenario sc = tiny(2, 2, false);
  sc.fleet[0].targets = std::vector<int>{0};
  sc.fleet[1].targets = std::vector<int>{0, 1};
  const Mission m = compile_mission(sc);
  EXPECT_EQ(find_by_label(m.formula, "target[0]")->children[0]->children.size(), 2u);
  EXPECT_EQ(find_by_label(m.formula, "target[1]")->children[0]->children.size(), 1u);
  sc.fleet[1].targets = std::vector<int>{0};
  EXPECT_THROW(compile_mission(sc), NoCapableDrone);
}

TEST(Compile, WindowErrors) {
  Scenario sc = tiny(1, 1, false);
  sc.timing.T_ins = 20;
  EXPECT_THROW(compile_mission(sc), InfeasibleWindow);
  sc.timing.T_ins = 1;
  sc.timing.T_bla = 14;
  EXPECT_THROW(compile_mission(sc), InfeasibleWindow);
}

TEST(Compile, ClassWeightsAttached) {
  const Scenario sc = load_scenario(oracle::fixture("windturbine_mock.json"));
  const Mission m = compile_mission(sc);
  const Formula safe = find_by_label(m.formula, "safe[1]");
  ASSERT_TRUE(safe);
  const auto* w = m.weights.find(safe->id);
  ASSERT_NE(w, nullptr);
  EXPECT_EQ(*w, (std::vector<double>{2, 4, 3}));
  ASSERT_NE(m.weights.find(m.formula->id), nullptr);
  EXPECT_EQ(m.weights.find(m.formula->id)->size(), 20u);
}

TEST(Geometry, DistanceToBlade) {
  const BladeSide side{{{0, 0, 0}, {7, 0, 0}}, {{0, -1, -1}, {7, 1, 1}}, 0};
  EXPECT_DOUBLE_EQ(dist_to_blade({3, 2.5, 0}, side), 2.5);
  EXPECT_DOUBLE_EQ(dist_to_blade({4, 0, 0}, side), 0.0);
  EXPECT_NEAR(dist_to_blade({8, 0, 1}, side), std::sqrt(2.0), 1e-15);
  EXPECT_THROW(dist_to_segment({0, 0, 0}, {{1, 1, 1}, {1, 1, 1}}), DegenerateSegment);
}

TEST(Geometry, BandRobustness) {
  EXPECT_DOUBLE_EQ(band_robustness(2.5, 2.5, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(band_robustness(1.5, 2.5, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(band_robustness(4.0, 2.5, 1.0), -0.5);
}

TEST(Headings, AxisMotionAndTargets) {
  Scenario sc = tiny(1, 1, false);
  sc.targets[0].yaw = M_PI / 2;
  const InspectionGraph g = build_graph(sc);
  const RoutePlan plan = solve_assignment(g);
  const SeedResult seed = seed_trajectories(plan, g, sc);
  const auto h = assign_headings(seed.trace, sc, plan, g);
  ASSERT_EQ(h[0].size(), seed.trace.samples());
  const auto& v = seed.visits[0][0];
  for (long k = v.start; k <= v.end; ++k) EXPECT_DOUBLE_EQ(h[0][k], M_PI / 2);

  Trace line = rollout({{{1, 1, 1}, {0.5, 0, 0}}}, {std::vector<Vec3>(10)}, 0.05);
  EXPECT_DOUBLE_EQ(assign_headings(line, sc, RoutePlan{}, g)[0][5], 0.0);
}

TEST(Headings, FacesBlade) {
  Scenario sc = tiny(1, 0, false);
  sc.blades.push_back({{{0, 0, 1}, {7, 0, 1}}, {{0, 0.5, 0}, {8, 4, 3}}, 0});
  sc.workspace = {{-1, -1, 0}, {10, 10, 5}};
  const InspectionGraph g = build_graph(sc);
  RoutePlan plan;
  plan.routes = {{g.depot_vertex(0), 0, g.depot_vertex(0)}};
  const Trace at = rollout({{{3, 2.5, 1}, {}}}, {std::vector<Vec3>(2)}, 0.05);
  EXPECT_NEAR(assign_headings(at, sc, plan, g)[0][0], -M_PI / 2, 1e-12);
}
