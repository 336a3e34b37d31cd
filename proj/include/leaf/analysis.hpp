// Random-walk analysis of the three exploration schemes: the RMS law, the R1/R2/R3 distance
// bounds, the closed-form R2 and Monte-Carlo simulations of each scheme.
#pragma once

#include "leaf/core.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace leaf::analysis {

struct Displacement {
  double x = 0.0;
  double y = 0.0;
  [[nodiscard]] double norm() const { return std::hypot(x, y); }
};

/// t unit steps in uniformly random directions.
inline Displacement random_walk(int t, Rng& rng) {
  Displacement d;
  for (int i = 0; i < t; ++i) {
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    d.x += std::cos(theta);
    d.y += std::sin(theta);
  }
  return d;
}

/// Root-mean-square end distance of n_walks independent 2D unit-step walks.
/// Walk i uses the stream rng.fork(i), so results do not depend on evaluation order.
inline double random_walk_rms(int t, int n_walks, const Rng& rng) {
  require(t >= 1, "random_walk_rms: t must be >= 1");
  require(n_walks >= 1, "random_walk_rms: n_walks must be >= 1");
  double acc = 0.0;
  for (int i = 0; i < n_walks; ++i) {
    Rng w = rng.fork(static_cast<std::uint64_t>(i));
    const auto d = random_walk(t, w);
    acc += d.x * d.x + d.y * d.y;
  }
  return std::sqrt(acc / n_walks);
}

inline void check_domain(int T, int k_star, const char* who) {
  require(T >= 2, std::string(who) + ": T must be >= 2");
  require(k_star >= 1 && k_star < T, std::string(who) + ": k_star must satisfy 1 <= k_star < T");
}

/// Stochastic-only scheme: sqrt(T).
inline double r1(int T) {
  require(T >= 1, "r1: T must be >= 1");
  return std::sqrt(static_cast<double>(T));
}

/// Frontier-then-explore scheme: k* + sqrt(T - k*).
inline double r3(int T, int k_star) {
  check_domain(T, k_star, "r3");
  return k_star + std::sqrt(static_cast<double>(T - k_star));
}

/// Random intermediate state: (1/k*) * sum_{k=0}^{k*} (k + sqrt(T - k)), as printed
/// (k*+1 terms over a k* denominator).
inline double r2_sum(int T, int k_star) {
  check_domain(T, k_star, "r2_sum");
  double s = 0.0;
  for (int k = 0; k <= k_star; ++k) s += k + std::sqrt(static_cast<double>(T - k));
  return s / k_star;
}

/// Same sum averaged over its k*+1 terms.
inline double r2_mean(int T, int k_star) {
  check_domain(T, k_star, "r2_mean");
  return r2_sum(T, k_star) * k_star / (k_star + 1.0);
}

/// 1/(6k*) [4T sqrt(T) - 4T sqrt(T-k*) - k* sqrt(T-k*) - 2k*]
inline double r2_closed_form(int T, int k_star) {
  check_domain(T, k_star, "r2_closed_form");
  const double t = T, k = k_star;
  const double st = std::sqrt(t), sr = std::sqrt(t - k);
  return (4.0 * t * st - 4.0 * t * sr - k * sr - 2.0 * k) / (6.0 * k);
}

/// f(k*) = 6k*(R3 - R2) as written for the closed form, on real-valued k* in [0, T].
inline double f_gap(double T, double k) {
  return 6.0 * k * k + (7.0 * k + 4.0 * T) * std::sqrt(T - k) - 4.0 * T * std::sqrt(T) + 2.0 * k;
}

struct TheoremRow {
  int T = 0;
  int k_star = 0;
  double r1 = 0, r2_sum = 0, r2_closed = 0, r3 = 0;
  double r2_mean = 0;
  [[nodiscard]] double r3_minus_r2() const { return r3 - r2_sum; }
  [[nodiscard]] double r3_minus_r1() const { return r3 - r1; }
  [[nodiscard]] bool r3_gt_r2() const { return r3 > r2_sum; }
  [[nodiscard]] bool r3_gt_r1() const { return r3 > r1; }
};

/// Sign of df/dk* by forward differences over a grid of real k* in (0, T).
struct DerivativeCheck {
  int T = 0;
  double min_derivative = 0.0;
  double argmin_k = 0.0;
  bool positive_everywhere = false;
};

inline DerivativeCheck check_f_derivative(int T, double h = 1e-3, int grid = 2000) {
  DerivativeCheck c;
  c.T = T;
  bool first = true;
  for (int i = 1; i < grid; ++i) {
    const double k = static_cast<double>(T) * i / grid;
    if (k + h > T) break;
    const double d = (f_gap(T, k + h) - f_gap(T, k)) / h;
    if (first || d < c.min_derivative) {
      c.min_derivative = d;
      c.argmin_k = k;
      first = false;
    }
  }
  c.positive_everywhere = c.min_derivative > 0.0;
  return c;
}

struct TheoremReport {
  std::vector<TheoremRow> rows;
  std::vector<TheoremRow> violations;  // rows with r3 <= r2_sum or r3 <= r1
  std::vector<DerivativeCheck> derivative;

  [[nodiscard]] bool ok() const { return violations.empty(); }
};

/// Every T and integer k* in [2, T-1]: checks r3 > r2_sum and r3 > r1.
inline TheoremReport verify_theorem(const std::vector<int>& T_list) {
  TheoremReport rep;
  for (int T : T_list) {
    require(T >= 3, "verify_theorem: each T must be >= 3");
    for (int k = 2; k <= T - 1; ++k) {
      TheoremRow row{T, k, r1(T), r2_sum(T, k), r2_closed_form(T, k), r3(T, k), r2_mean(T, k)};
      if (!row.r3_gt_r2() || !row.r3_gt_r1()) rep.violations.push_back(row);
      rep.rows.push_back(row);
    }
    rep.derivative.push_back(check_f_derivative(T));
  }
  return rep;
}

struct ClosedFormComparison {
  int T = 0;
  int k_star = 0;
  double summed = 0.0;
  double closed = 0.0;
  [[nodiscard]] double rel_error() const { return std::abs(closed - summed) / std::abs(summed); }
};

inline ClosedFormComparison compare_closed_form(int T, int k_star) {
  return {T, k_star, r2_sum(T, k_star), r2_closed_form(T, k_star)};
}

struct SchemeSimulation {
  int T = 0, k_star = 0, n_walks = 0;
  double leaf_rms_origin = 0.0;
  double leaf_rms_from_intermediate = 0.0;
  double goexplore_rms_origin = 0.0;
  double goexplore_rms_from_intermediate = 0.0;
  double skewfit_rms_origin = 0.0;
  int triangle_checked = 0;
  int triangle_violations = 0;
};

/// Monte-Carlo model of each scheme from the origin:
///  LEAF      - deterministic k* steps along +x, then a T-k* step random walk;
///  GoExplore - k uniform in [1, k*] along +x, then a T-k step walk;
///  SkewFit   - a T step walk.
/// Also checks |end| <= offset + |walk| for every LEAF and GoExplore walk.
inline SchemeSimulation simulate_schemes(int T, int k_star, int n_walks, const Rng& rng) {
  check_domain(T, k_star, "simulate_schemes");
  require(n_walks >= 1, "simulate_schemes: n_walks must be >= 1");
  SchemeSimulation s{T, k_star, n_walks};
  constexpr double slack = 1e-9;  // floating-point rounding only
  double lo = 0, li = 0, go = 0, gi = 0, so = 0;
  auto check = [&](double offset, const Displacement& w) {
    const double end = std::hypot(offset + w.x, w.y);
    ++s.triangle_checked;
    if (end > offset + w.norm() + slack) ++s.triangle_violations;
    return end;
  };
  for (int i = 0; i < n_walks; ++i) {
    Rng r = rng.fork(static_cast<std::uint64_t>(i));
    const auto wl = random_walk(T - k_star, r);
    const double el = check(k_star, wl);
    lo += el * el;
    li += wl.x * wl.x + wl.y * wl.y;

    const int k = r.uniform_int(1, k_star);
    const auto wg = random_walk(T - k, r);
    const double eg = check(k, wg);
    go += eg * eg;
    gi += wg.x * wg.x + wg.y * wg.y;

    const auto ws = random_walk(T, r);
    so += ws.x * ws.x + ws.y * ws.y;
  }
  s.leaf_rms_origin = std::sqrt(lo / n_walks);
  s.leaf_rms_from_intermediate = std::sqrt(li / n_walks);
  s.goexplore_rms_origin = std::sqrt(go / n_walks);
  s.goexplore_rms_from_intermediate = std::sqrt(gi / n_walks);
  s.skewfit_rms_origin = std::sqrt(so / n_walks);
  return s;
}

struct WalkRow {
  int t = 0;
  int n_walks = 0;
  double rms = 0.0;
  [[nodiscard]] double expected() const { return std::sqrt(static_cast<double>(t)); }
  [[nodiscard]] double rel_err() const { return std::abs(rms - expected()) / expected(); }
};

}  // namespace leaf::analysis
