#include "leaf/env.hpp"

#include <gtest/gtest.h>

using namespace leaf;
using namespace leaf::env;

namespace {

Vec act(double vx, double vy) { return Vec{{vx, vy}}; }

// Independent geometric oracle: distance from the disc centre to the nearest wall point
// minus the radius, computed by dense sampling of each wall's boundary.
double sampled_clearance(const EnvConfig& cfg, const EnvState& s) {
  double best = 1e9;
  for (const auto& w : cfg.u_wall) {
    for (int i = 0; i <= 400; ++i) {
      const double t = i / 400.0;
      const double xs[] = {w.x0 + t * (w.x1 - w.x0), w.x0 + t * (w.x1 - w.x0), w.x0, w.x1};
      const double ys[] = {w.y0, w.y1, w.y0 + t * (w.y1 - w.y0), w.y0 + t * (w.y1 - w.y0)};
      for (int k = 0; k < 4; ++k) best = std::min(best, std::hypot(s.x - xs[k], s.y - ys[k]));
    }
    if (w.interior_contains(s.x, s.y)) return -1.0;
  }
  return best - cfg.agent_radius();
}

}  // namespace

TEST(EnvStep, FreeMotion) {
  EnvConfig cfg;
  const auto s = env_step(cfg, {4, 1}, act(1, 0));
  EXPECT_DOUBLE_EQ(s.x, 5.0);
  EXPECT_DOUBLE_EQ(s.y, 1.0);
}

TEST(EnvStep, ActionIsClampedToMaxSpeed) {
  EnvConfig cfg;
  const auto s = env_step(cfg, {4, 1}, act(10, 0));
  EXPECT_DOUBLE_EQ(s.x, 5.0);
  EXPECT_DOUBLE_EQ(s.y, 1.0);
  const auto d = env_step(cfg, {4, 5.5}, act(3, 4));
  EXPECT_NEAR(std::hypot(d.x - 4, d.y - 5.5), 1.0, 1e-12);
}

TEST(EnvStep, WallContactIsFlush) {
  EnvConfig cfg;
  // Moving +x toward the left arm's outer face (x = 1.5) at y = 3.
  const auto s = env_step(cfg, {0.7, 3.0}, act(1, 0));
  EXPECT_NEAR(s.x, cfg.u_wall[0].x0 - cfg.agent_radius(), 1e-12);
  EXPECT_NEAR(point_rect_distance(s.x, s.y, cfg.u_wall[0]), cfg.agent_radius(), 1e-12);
  EXPECT_GE(sampled_clearance(cfg, s), -1e-9);
  // Moving -y onto the base from inside the cavity.
  const auto c = env_step(cfg, {4.0, 3.3}, act(0, -1));
  EXPECT_NEAR(c.y, cfg.u_wall[2].y1 + cfg.agent_radius(), 1e-12);
}

TEST(EnvStep, ArenaBoundary) {
  EnvConfig cfg;
  const auto s = env_step(cfg, {0.8, 7.2}, act(-1, 1));
  EXPECT_GE(s.x, cfg.agent_radius());
  EXPECT_LE(s.y, cfg.arena_size - cfg.agent_radius());
}

TEST(EnvStep, RejectsNonFiniteAction) {
  EnvConfig cfg;
  EXPECT_THROW((void)env_step(cfg, {4, 1}, act(std::nan(""), 0)), InvalidArgument);
}

TEST(EnvProperties, NoPenetrationUnderRandomRollouts) {
  EnvConfig cfg;
  Rng rng(21);
  for (int ep = 0; ep < 200; ++ep) {
    EnvState s = sample_free(cfg, rng);
    for (int t = 0; t < 100; ++t) {
      const Vec a = 1.5 * rng.normal_vec(2);
      const EnvState n = env_step(cfg, s, a);
      ASSERT_LE(std::hypot(n.x - s.x, n.y - s.y), cfg.max_speed + 1e-12);
      ASSERT_TRUE(disc_is_free(cfg, n)) << "(" << n.x << "," << n.y << ")";
      ASSERT_GE(sampled_clearance(cfg, n), -1e-9);
      s = n;
    }
  }
}

TEST(EnvProperties, DeterministicTrajectories) {
  EnvConfig cfg;
  auto roll = [&](std::uint64_t seed) {
    Rng rng(seed);
    EnvState s = env_reset(cfg, ResetMode::Train, rng).start;
    std::vector<EnvState> traj{s};
    for (int t = 0; t < 50; ++t) traj.push_back(s = env_step(cfg, s, rng.normal_vec(2)));
    return traj;
  };
  EXPECT_EQ(roll(4), roll(4));
  EXPECT_NE(roll(4), roll(5));
}

TEST(EnvReset, EvalStartsInCavityGoalsOutsideU) {
  EnvConfig cfg;
  Rng rng(3);
  const Rect bbox = cfg.u_bounds();
  for (int i = 0; i < 1000; ++i) {
    const auto r = env_reset(cfg, ResetMode::Eval, rng);
    // Cavity: between the arms and above the base, inside the U's bounding box.
    EXPECT_GT(r.start.x, cfg.u_wall[0].x1);
    EXPECT_LT(r.start.x, cfg.u_wall[1].x0);
    EXPECT_GT(r.start.y, cfg.u_wall[2].y1);
    EXPECT_LE(r.start.y, bbox.y1);
    EXPECT_TRUE(disc_is_free(cfg, r.start));
    EXPECT_FALSE(bbox.contains(r.goal.x, r.goal.y));
    EXPECT_TRUE(disc_is_free(cfg, r.goal));
  }
}

TEST(EnvReset, TrainStartsInFreeSpace) {
  EnvConfig cfg;
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const auto s = env_reset(cfg, ResetMode::Train, rng).start;
    EXPECT_GE(sampled_clearance(cfg, s), -1e-9);
    EXPECT_TRUE(disc_is_free(cfg, s));
  }
}

TEST(EnvReset, FixedSeedRepeats) {
  EnvConfig cfg;
  Rng a(8), b(8);
  const auto x = env_reset(cfg, ResetMode::Eval, a);
  const auto y = env_reset(cfg, ResetMode::Eval, b);
  EXPECT_EQ(x.start, y.start);
  EXPECT_EQ(x.goal, y.goal);
}

TEST(EvalDistance, Values) {
  EXPECT_EQ(eval_distance({1, 1}, {1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(eval_distance({0, 0}, {3, 4}), 5.0);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    EnvState a{rng.uniform(0, 8), rng.uniform(0, 8)}, b{rng.uniform(0, 8), rng.uniform(0, 8)};
    EXPECT_EQ(eval_distance(a, b), eval_distance(b, a));
  }
}

TEST(EnvConfig, GeometryIsValid) {
  EnvConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  for (const auto& r : cfg.u_wall) {
    EXPECT_GE(r.x0, 0.0);
    EXPECT_LE(r.x1, cfg.arena_size);
    EXPECT_DOUBLE_EQ(std::min(r.x1 - r.x0, r.y1 - r.y0), cfg.wall_thickness);
  }
  EnvConfig narrow;
  narrow.u_wall[0] = {2.5, 3.5, 2.5, 5.5};
  narrow.u_wall[1] = {3.8, 4.8, 2.5, 5.5};
  EXPECT_THROW(narrow.validate(), InvalidArgument);
}
