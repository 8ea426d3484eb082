#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace stlplan;

struct Case {
  const char* file;
  Mode mode;
};

class FixturePipeline : public ::testing::TestWithParam<Case> {};

TEST_P(FixturePipeline, PlansSatisfyMission) {
  const Scenario sc = load_scenario(oracle::fixture(GetParam().file));
  const PipelineOutput out = run_pipeline(sc, GetParam().mode, default_config(sc));
  const PlanResult& r = out.result;
  EXPECT_TRUE(verify_plan(out.plan, out.graph).valid);
  EXPECT_TRUE(is_satisfied(r.status)) << status_name(r.status) << " exact " << r.report.exact;
  EXPECT_GT(eval_exact(out.mission.formula, r.trace), 0.0);
  EXPECT_GT(r.velocity_exact, 0.0);
  EXPECT_TRUE(dynamics_consistent(r.trace));
  for (std::size_t d = 0; d < sc.drone_count(); ++d) {
    EXPECT_TRUE(within_bounds(r.trace.drones[d].a, sc.fleet[d].limits.a_max));
    for (const auto& v : r.trace.drones[d].v)
      for (int j = 0; j < 3; ++j) EXPECT_LT(std::abs(v[j]), sc.fleet[d].limits.v_max[j]);
  }
  for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_GE(r.history[i], r.history[i - 1]);
  EXPECT_EQ(out.headings.size(), sc.drone_count());
  EXPECT_EQ(out.headings[0].size(), r.trace.samples());
}

INSTANTIATE_TEST_SUITE_P(All, FixturePipeline,
                         ::testing::Values(Case{"windturbine_mock.json", Mode::Basic},
                                           Case{"windturbine_mock.json", Mode::Attrition},
                                           Case{"two_drone_swap.json", Mode::Basic},
                                           Case{"two_drone_swap.json", Mode::Attrition}),
                         [](const auto& info) {
                           return std::string(info.param.file[0] == 'w' ? "windturbine" : "swap") + "_" +
                                  mode_name(info.param.mode);
                         });

TEST(Fixtures, WindTurbineReachesMargin) {
  const Scenario sc = load_scenario(oracle::fixture("windturbine_mock.json"));
  const PipelineOutput out = run_pipeline(sc, Mode::Basic, default_config(sc));
  EXPECT_EQ(out.result.status, PlanStatus::SatisfiedWithMargin);
  EXPECT_GE(out.result.report.smooth, sc.thresholds.zeta);
}

TEST(Fixtures, SwapRoutesAreCheapest) {
  const Scenario sc = load_scenario(oracle::fixture("two_drone_swap.json"));
  const InspectionGraph g = build_graph(sc);
  const RoutePlan p = solve_assignment(g);
  EXPECT_NEAR(p.objective, oracle::enumerate_routes(g), 1e-9);
}

TEST(Fixtures, SwapSeedViolatesAndPlanSatisfies) {
  const Scenario sc = load_scenario(oracle::fixture("two_drone_swap.json"));
  const PipelineOutput out = run_pipeline(sc, Mode::Basic, default_config(sc));
  EXPECT_LT(eval_exact(out.mission.formula, out.seed.trace), 0.0);
  EXPECT_GT(eval_exact(out.mission.formula, out.result.trace), 0.0);
}
