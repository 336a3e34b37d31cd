// Frontier of the reachable set: per-horizon reachability predicates, k*, the minimal-k
// partition of sampled latents and the goal-nearest frontier state.
#pragma once

#include "leaf/core.hpp"

#include <concepts>
#include <optional>
#include <vector>

namespace leaf::frontier {

/// Anything that scores (z0, sample, k) pairs with a reachability probability.
template <typename T>
concept ReachScorer = requires(const T& s, const LatentState& z0, const std::vector<LatentState>& zs, int k) {
  { s.scores(z0, zs, k) } -> std::convertible_to<Vec>;
};

/// M x k_max matrix of scores; uses the scorer's batched grid when it has one.
template <ReachScorer S>
Mat score_grid(const S& scorer, const LatentState& z0, const std::vector<LatentState>& samples, int k_max) {
  if constexpr (requires { { scorer.score_grid(z0, samples, k_max) } -> std::convertible_to<Mat>; }) {
    return scorer.score_grid(z0, samples, k_max);
  } else {
    Mat grid(static_cast<Eigen::Index>(samples.size()), k_max);
    for (int k = 1; k <= k_max; ++k) grid.col(k - 1) = scorer.scores(z0, samples, k);
    return grid;
  }
}

struct Reachability {
  bool reachable = false;
  double fraction = 0.0;
};

inline Reachability reachability_from_scores(const Vec& scores, double delta) {
  require(scores.size() > 0, "is_reachable: samples must be non-empty");
  const double frac = static_cast<double>((scores.array() >= 0.5).count()) / static_cast<double>(scores.size());
  return {frac >= 1.0 - delta, frac};
}

/// Fraction of samples classified reachable within k steps; reachable iff fraction >= 1 - delta.
template <ReachScorer S>
Reachability is_reachable(const S& net, const LatentState& z0, const std::vector<LatentState>& samples, int k,
                          double delta = 0.2) {
  require(!samples.empty(), "is_reachable: samples must be non-empty");
  require(k >= 1, "is_reachable: k must be >= 1");
  return reachability_from_scores(net.scores(z0, samples, k), delta);
}

struct KStar {
  std::optional<int> k_star;
  std::vector<bool> predicates;  // predicates[k-1]
  std::vector<double> fractions;
};

inline KStar kstar_from_grid(const Mat& grid, double delta) {
  KStar out;
  for (Eigen::Index k = 0; k < grid.cols(); ++k) {
    const auto r = reachability_from_scores(grid.col(k), delta);
    out.predicates.push_back(r.reachable);
    out.fractions.push_back(r.fraction);
    if (r.reachable) out.k_star = static_cast<int>(k + 1);
  }
  return out;
}

/// Largest k in [1, K] whose predicate holds; none when every predicate is false.
template <ReachScorer S>
KStar compute_kstar(const S& net, const LatentState& z0, const std::vector<LatentState>& samples, int K,
                    double delta = 0.2) {
  require(K >= 1, "compute_kstar: K must be >= 1");
  require(!samples.empty(), "compute_kstar: samples must be non-empty");
  return kstar_from_grid(score_grid(net, z0, samples, K), delta);
}

/// Per-sample smallest k at which it is classified reachable (none if never).
using Partition = std::vector<std::optional<int>>;

inline Partition partition_from_grid(const Mat& grid) {
  Partition out(static_cast<std::size_t>(grid.rows()));
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (Eigen::Index k = 0; k < grid.cols(); ++k) {
      if (grid(i, k) >= 0.5) {
        out[static_cast<std::size_t>(i)] = static_cast<int>(k + 1);
        break;
      }
    }
  }
  return out;
}

template <ReachScorer S>
Partition partition_pk(const S& net, const LatentState& z0, const std::vector<LatentState>& samples, int K) {
  require(K >= 1, "partition_pk: K must be >= 1");
  require(!samples.empty(), "partition_pk: samples must be non-empty");
  return partition_from_grid(score_grid(net, z0, samples, K));
}

/// Index of the sample in bucket k* closest to the goal (lowest index on ties).
inline std::optional<std::size_t> select_frontier_index(const Partition& partition,
                                                        const std::vector<LatentState>& samples, int k_star,
                                                        const LatentState& goal) {
  require(partition.size() == samples.size(), "select_frontier_state: partition/sample size mismatch");
  std::optional<std::size_t> best;
  double best_d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (partition[i] != k_star) continue;
    const double d = latent_distance(samples[i], goal);
    if (!best || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

inline std::optional<LatentState> select_frontier_state(const Partition& partition,
                                                        const std::vector<LatentState>& samples, int k_star,
                                                        const LatentState& goal) {
  const auto i = select_frontier_index(partition, samples, k_star, goal);
  if (!i) return std::nullopt;
  return samples[*i];
}

struct FrontierReport {
  std::vector<bool> predicates;
  std::vector<double> fractions;
  std::optional<int> k_star;
  Partition partition;
  std::optional<LatentState> chosen;
  std::size_t sample_count = 0;
  double delta = 0.2;

  [[nodiscard]] double fraction_at_kstar() const { return k_star ? fractions[*k_star - 1] : 0.0; }

  [[nodiscard]] std::size_t bucket_size() const {
    std::size_t n = 0;
    if (!k_star) return 0;
    for (const auto& p : partition) n += p == k_star;
    return n;
  }

  [[nodiscard]] bool fallback() const { return !k_star || !chosen; }

  /// True when z lies in some p_k with k <= k*, judged by its own minimal reachable k.
  template <ReachScorer S>
  [[nodiscard]] bool inside(const S& net, const LatentState& z0, const LatentState& z) const {
    if (!k_star) return false;
    const Mat g = score_grid(net, z0, std::vector<LatentState>{z}, *k_star);
    return (g.row(0).array() >= 0.5).any();
  }
};

/// Scores the sample grid once and derives predicates, k*, the partition and (when a goal is
/// given) the chosen frontier state.
template <ReachScorer S>
FrontierReport compute_frontier(const S& net, const LatentState& z0, const std::vector<LatentState>& samples,
                                int K, double delta, const LatentState* goal = nullptr) {
  require(K >= 1, "compute_frontier: K must be >= 1");
  require(!samples.empty(), "compute_frontier: samples must be non-empty");
  const Mat grid = score_grid(net, z0, samples, K);
  FrontierReport r;
  auto ks = kstar_from_grid(grid, delta);
  r.predicates = std::move(ks.predicates);
  r.fractions = std::move(ks.fractions);
  r.k_star = ks.k_star;
  r.partition = partition_from_grid(grid);
  r.sample_count = samples.size();
  r.delta = delta;
  if (goal != nullptr && r.k_star) r.chosen = select_frontier_state(r.partition, samples, *r.k_star, *goal);
  return r;
}

}  // namespace leaf::frontier
