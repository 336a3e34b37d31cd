// Pointmass navigation: an 8x8 cm arena with a U-shaped wall, unit-timestep velocity control.
#pragma once

#include "leaf/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

namespace leaf::env {

struct Rect {
  double x0, x1, y0, y1;

  [[nodiscard]] Rect inflated(double r) const { return {x0 - r, x1 + r, y0 - r, y1 + r}; }
  /// Strict interior membership; boundary points are outside.
  [[nodiscard]] bool interior_contains(double x, double y) const {
    return x > x0 && x < x1 && y > y0 && y < y1;
  }
  [[nodiscard]] bool contains(double x, double y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
};

/// Euclidean distance from a point to a closed rectangle (0 inside).
inline double point_rect_distance(double x, double y, const Rect& r) {
  const double dx = std::max({r.x0 - x, 0.0, x - r.x1});
  const double dy = std::max({r.y0 - y, 0.0, y - r.y1});
  return std::hypot(dx, dy);
}

struct EnvConfig {
  double arena_size = 8.0;
  double wall_thickness = 1.0;
  double agent_diameter = 1.0;
  // Opening faces +y.
  std::array<Rect, 3> u_wall = {{
      {1.5, 2.5, 1.5, 5.5},  // left arm
      {5.5, 6.5, 1.5, 5.5},  // right arm
      {1.5, 6.5, 1.5, 2.5},  // base
  }};
  double max_speed = 1.0;
  double eval_success_radius = 0.5;

  [[nodiscard]] double agent_radius() const { return 0.5 * agent_diameter; }

  /// Bounding box of the U (walls plus cavity).
  [[nodiscard]] Rect u_bounds() const {
    Rect b = u_wall[0];
    for (const auto& r : u_wall) {
      b.x0 = std::min(b.x0, r.x0);
      b.x1 = std::max(b.x1, r.x1);
      b.y0 = std::min(b.y0, r.y0);
      b.y1 = std::max(b.y1, r.y1);
    }
    return b;
  }

  /// Region available to the agent centre inside the U: between the arms, above the base,
  /// below the opening line.
  [[nodiscard]] Rect cavity_centres() const {
    const double r = agent_radius();
    return {u_wall[0].x1 + r, u_wall[1].x0 - r, u_wall[2].y1 + r, u_wall[0].y1};
  }

  void validate() const {
    require(arena_size > 0 && agent_diameter > 0 && max_speed > 0, "EnvConfig: sizes must be positive");
    for (const auto& r : u_wall)
      require(r.x0 >= 0 && r.y0 >= 0 && r.x1 <= arena_size && r.y1 <= arena_size && r.x0 < r.x1 &&
                  r.y0 < r.y1,
              "EnvConfig: wall rectangles must lie inside the arena");
    const Rect c = cavity_centres();
    require(c.x0 < c.x1 && c.y0 < c.y1, "EnvConfig: U cavity too narrow for the agent");
  }
};

/// True when the agent disc lies inside the arena and does not overlap any wall.
inline bool disc_is_free(const EnvConfig& cfg, const EnvState& s) {
  const double r = cfg.agent_radius();
  if (s.x < r || s.x > cfg.arena_size - r || s.y < r || s.y > cfg.arena_size - r) return false;
  for (const auto& w : cfg.u_wall)
    if (point_rect_distance(s.x, s.y, w) < r) return false;
  return true;
}

namespace detail {

// Walls inflated by the agent radius as boxes; a centre outside every box is collision free.
inline double clip_axis(const EnvConfig& cfg, double from, double to, double other, bool along_x) {
  const double r = cfg.agent_radius();
  double lo = r, hi = cfg.arena_size - r;
  double target = std::clamp(to, lo, hi);
  for (const auto& w : cfg.u_wall) {
    const Rect b = w.inflated(r);
    const double o0 = along_x ? b.y0 : b.x0;
    const double o1 = along_x ? b.y1 : b.x1;
    if (!(other > o0 && other < o1)) continue;
    const double a0 = along_x ? b.x0 : b.y0;
    const double a1 = along_x ? b.x1 : b.y1;
    if (target > from && from <= a0 && target > a0) target = a0;
    if (target < from && from >= a1 && target < a1) target = a1;
  }
  return target;
}

}  // namespace detail

/// Clamps the action to max_speed, then moves along x and then y, each axis stopping
/// at first contact.
inline EnvState env_step(const EnvConfig& cfg, const EnvState& s, const Vec& action) {
  require(action.size() == 2, "env_step: action must be 2-dimensional");
  require(action.allFinite(), "env_step: action must be finite");
  Vec a = action;
  const double n = a.norm();
  if (n > cfg.max_speed) a *= cfg.max_speed / n;
  EnvState out = s;
  out.x = detail::clip_axis(cfg, s.x, s.x + a[0], s.y, true);
  out.y = detail::clip_axis(cfg, s.y, s.y + a[1], out.x, false);
  return out;
}

inline bool centre_is_free(const EnvConfig& cfg, double x, double y) {
  const double r = cfg.agent_radius();
  if (x < r || x > cfg.arena_size - r || y < r || y > cfg.arena_size - r) return false;
  for (const auto& w : cfg.u_wall)
    if (w.inflated(r).interior_contains(x, y)) return false;
  return true;
}

inline EnvState sample_free(const EnvConfig& cfg, Rng& rng) {
  const double r = cfg.agent_radius();
  for (;;) {
    EnvState s{rng.uniform(r, cfg.arena_size - r), rng.uniform(r, cfg.arena_size - r)};
    if (centre_is_free(cfg, s.x, s.y)) return s;
  }
}

inline bool in_cavity(const EnvConfig& cfg, const EnvState& s) {
  return cfg.cavity_centres().contains(s.x, s.y);
}

inline bool outside_u(const EnvConfig& cfg, const EnvState& s) {
  return !cfg.u_bounds().contains(s.x, s.y);
}

enum class ResetMode { Train, Eval };

struct ResetResult {
  EnvState start;
  EnvState goal;  // meaningful in eval mode only; train-mode goals come from the agent
};

inline ResetResult env_reset(const EnvConfig& cfg, ResetMode mode, Rng& rng) {
  if (mode == ResetMode::Train) return {sample_free(cfg, rng), EnvState{}};
  const Rect c = cfg.cavity_centres();
  EnvState start{rng.uniform(c.x0, c.x1), rng.uniform(c.y0, c.y1)};
  EnvState goal;
  do {
    goal = sample_free(cfg, rng);
  } while (!outside_u(cfg, goal));
  return {start, goal};
}

inline double eval_distance(const EnvState& a, const EnvState& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace leaf::env
