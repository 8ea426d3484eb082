#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace stlplan;

TEST(Step, UnitAcceleration) {
  const DroneState s = step({}, {1, 0, 0}, 0.05);
  EXPECT_DOUBLE_EQ(s.p[0], 0.00125);
  EXPECT_DOUBLE_EQ(s.v[0], 0.05);
}

TEST(Step, Coasting) {
  const DroneState s = step({{1, 2, 3}, {0.5, -1, 0}}, {}, 0.05);
  EXPECT_DOUBLE_EQ(s.p[0], 1.025);
  EXPECT_DOUBLE_EQ(s.p[1], 1.95);
  EXPECT_EQ(s.v, (Vec3{0.5, -1, 0}));
}

TEST(Rollout, BangBang) {
  std::vector<Vec3> a(20, Vec3{});
  for (int k = 0; k < 10; ++k) a[k][0] = 1.0;
  for (int k = 10; k < 20; ++k) a[k][0] = -1.0;
  const Trace tr = rollout({{}}, {a}, 0.05);
  // Independent sum: ten steps up then ten down.
  double p = 0, v = 0;
  for (int k = 0; k < 20; ++k) {
    p += v * 0.05 + 0.5 * a[k][0] * 0.0025;
    v += a[k][0] * 0.05;
  }
  EXPECT_NEAR(tr.drones[0].p.back()[0], 0.25, 1e-12);
  EXPECT_NEAR(tr.drones[0].p.back()[0], p, 1e-15);
  EXPECT_NEAR(tr.drones[0].v.back()[0], 0.0, 1e-12);
  EXPECT_TRUE(dynamics_consistent(tr));
}

TEST(Rollout, RestStaysPut) {
  const Trace tr = rollout({{{1, 2, 3}, {}}}, {std::vector<Vec3>(30, Vec3{})}, 0.05);
  for (const auto& p : tr.drones[0].p) EXPECT_EQ(p, (Vec3{1, 2, 3}));
}

TEST(Rollout, LengthMismatch) {
  EXPECT_THROW(rollout({{}, {}}, {std::vector<Vec3>(3), std::vector<Vec3>(4)}, 0.05), LengthMismatch);
  EXPECT_THROW(rollout({{}}, {std::vector<Vec3>(3), std::vector<Vec3>(3)}, 0.05), LengthMismatch);
}

TEST(Project, Clamp) {
  EXPECT_EQ(project_control({1.5, -0.5, -3}, {1, 1, 1}), (Vec3{1, -0.5, -1}));
  EXPECT_EQ(project_control({-5, 0, 0}, {5, 5, 5}), (Vec3{-5, 0, 0}));
}

TEST(Project, IdempotentOnFeasible) {
  std::vector<Vec3> a{{0.1, -0.9, 1}, {0, 0, -1}};
  EXPECT_EQ(project_controls(a, {1, 1, 1}), a);
  EXPECT_TRUE(within_bounds(a, {1, 1, 1}));
}

// Numeric bang-bang (or trapezoid) simulation with a fine step.
static double simulated_time(double d, double vmax, double amax) {
  const double dt = 1e-5;
  double p = 0, v = 0, t = 0;
  while (true) {
    const double brake = v * v / (2 * amax);
    if (p + brake >= d - 1e-12) break;
    v = std::min(vmax, v + amax * dt);
    p += v * dt;
    t += dt;
  }
  return t + v / amax;
}

TEST(TimeOfFlight, Triangular) {
  EXPECT_DOUBLE_EQ(time_of_flight({0, 0, 0}, {1, 0, 0}, {1, 1, 1}, {1, 1, 1}), 2.0);
  EXPECT_NEAR(simulated_time(1, 1, 1), 2.0, 1e-3);
}

TEST(TimeOfFlight, Trapezoid) {
  EXPECT_DOUBLE_EQ(time_of_flight({0, 0, 0}, {4, 0, 0}, {1, 1, 1}, {1, 1, 1}), 5.0);
  EXPECT_NEAR(simulated_time(4, 1, 1), 5.0, 1e-3);
}

TEST(TimeOfFlight, ZeroDisplacement) { EXPECT_EQ(time_of_flight({1, 2, 3}, {1, 2, 3}, {1, 1, 1}, {1, 1, 1}), 0.0); }

TEST(TimeOfFlight, SymmetricAndTriangle) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-10, 10), lim(0.3, 3);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)}, c{u(rng), u(rng), u(rng)};
    const Vec3 vm{lim(rng), lim(rng), lim(rng)}, am{lim(rng), lim(rng), lim(rng)};
    const double ab = time_of_flight(a, b, vm, am);
    EXPECT_EQ(ab, time_of_flight(b, a, vm, am));
    EXPECT_LE(time_of_flight(a, c, vm, am), ab + time_of_flight(b, c, vm, am) + 1e-12);
  }
}

TEST(Profile, LandsAtRestOnTarget) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-6, 6);
  for (int i = 0; i < 100; ++i) {
    const Vec3 from{u(rng), u(rng), u(rng)}, to{u(rng), u(rng), u(rng)};
    const Vec3 vm{1, 0.7, 1}, am{1, 0.7, 1};
    const auto a = rest_to_rest_profile(from, to, vm, am, 0.05);
    EXPECT_TRUE(within_bounds(a, am, 1e-12));
    const Trace tr = rollout({{from, {}}}, {a}, 0.05);
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(tr.drones[0].p.back()[j], to[j], 1e-9);
      EXPECT_NEAR(tr.drones[0].v.back()[j], 0.0, 1e-9);
    }
    for (const auto& v : tr.drones[0].v)
      for (int j = 0; j < 3; ++j) EXPECT_LE(std::abs(v[j]), vm[j] + 1e-9);
    // Never faster than the continuous minimum, and within a few samples of it.
    const double t = static_cast<double>(a.size()) * 0.05;
    const double tmin = time_of_flight(from, to, vm, am);
    EXPECT_GE(t, tmin - 0.1 - 1e-9);
    EXPECT_LE(t, tmin + 0.5);
  }
}

TEST(Pullback, TerminalPositionObjective) {
  const std::size_t N = 30;
  const double Ts = 0.05;
  const Trace tr = rollout({{}}, {std::vector<Vec3>(N, Vec3{0.3, -0.2, 0.1})}, Ts);
  StateGradient g(1, N + 1);
  g.dp[0][N] = {1.0, -2.0, 0.5};
  const ControlGradient c = pullback_gradient(g, tr);
  for (std::size_t k = 0; k < N; ++k)
    for (int j = 0; j < 3; ++j)
      EXPECT_NEAR(c[0][k][j], (static_cast<double>(N - k) - 0.5) * Ts * Ts * g.dp[0][N][j], 1e-14);
}

TEST(Pullback, ShapeMismatch) {
  const Trace tr = rollout({{}}, {std::vector<Vec3>(3)}, 0.05);
  EXPECT_THROW(pullback_gradient(StateGradient(1, 3), tr), LengthMismatch);
}

TEST(Reroll, MatchesRollout) {
  std::mt19937_64 rng(15);
  Trace tr = oracle::random_trace(rng, 2, 40);
  tr.drones[1].a[10] = {2, 2, 2};
  reroll_from(tr, 1, 10);
  EXPECT_TRUE(dynamics_consistent(tr));
}
