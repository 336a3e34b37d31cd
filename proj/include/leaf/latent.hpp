// Latent encoding of simulator states, a kernel density model over visited latents and
// density-skewed goal sampling.
#pragma once

#include "leaf/core.hpp"
#include "leaf/env.hpp"
#include "leaf/nn.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

namespace leaf::latent {

enum class EncoderKind { IdentityNormalized, LearnedMlp };

/// z = (s - mean) / scale, optionally followed by a tanh MLP (extension hook, off by default).
struct Encoder {
  EncoderKind kind = EncoderKind::IdentityNormalized;
  Vec mean = Vec::Constant(2, 4.0);
  Vec scale = Vec::Constant(2, 4.0);
  nn::Mlp mlp;  // used only by LearnedMlp

  /// Normalisation that maps the arena onto [-1, 1]^2.
  static Encoder for_arena(const env::EnvConfig& cfg) {
    Encoder e;
    e.mean = Vec::Constant(2, 0.5 * cfg.arena_size);
    e.scale = Vec::Constant(2, 0.5 * cfg.arena_size);
    return e;
  }

  [[nodiscard]] Eigen::Index latent_dim() const {
    return kind == EncoderKind::LearnedMlp ? mlp.output_size() : mean.size();
  }

  [[nodiscard]] LatentState encode(const EnvState& s) const {
    Vec x(2);
    x << s.x, s.y;
    Vec z = (x - mean).cwiseQuotient(scale);
    if (kind == EncoderKind::LearnedMlp) z = mlp.forward(z);
    return LatentState(std::move(z));
  }

  /// Refits mean and per-dimension standard deviation on the given states.
  void fit_normalization(const std::vector<EnvState>& states) {
    require(!states.empty(), "Encoder::fit_normalization: no states");
    Vec m = Vec::Zero(2), sq = Vec::Zero(2);
    for (const auto& s : states) {
      m[0] += s.x;
      m[1] += s.y;
    }
    m /= static_cast<double>(states.size());
    for (const auto& s : states) {
      sq[0] += (s.x - m[0]) * (s.x - m[0]);
      sq[1] += (s.y - m[1]) * (s.y - m[1]);
    }
    sq /= static_cast<double>(states.size());
    mean = m;
    scale = sq.cwiseSqrt().cwiseMax(1e-6);
  }
};

/// Isotropic Gaussian kernel density estimate over support latents.
class DensityModel {
 public:
  DensityModel() = default;
  DensityModel(std::vector<LatentState> support, double bandwidth) { fit(std::move(support), bandwidth); }

  void fit(std::vector<LatentState> support, double bandwidth) {
    require(!support.empty(), "DensityModel::fit: need at least one support point");
    require(bandwidth >= 0.0, "DensityModel::fit: bandwidth must be non-negative");
    const auto d = support.front().dim();
    for (const auto& s : support) {
      require(s.dim() == d, "DensityModel::fit: inconsistent support dimensions");
      require(s.finite(), "DensityModel::fit: non-finite support point");
    }
    support_ = std::move(support);
    h_ = bandwidth;
  }

  [[nodiscard]] bool fitted() const { return !support_.empty(); }
  [[nodiscard]] double bandwidth() const { return h_; }
  [[nodiscard]] const std::vector<LatentState>& support() const { return support_; }
  [[nodiscard]] Eigen::Index dim() const { return fitted() ? support_.front().dim() : 0; }

  [[nodiscard]] double estimate(const LatentState& z) const {
    if (!fitted()) throw NotReady("DensityModel::estimate: model is not fitted");
    require(z.dim() == dim(), "DensityModel::estimate: dimension mismatch");
    require(h_ > 0.0, "DensityModel::estimate: zero bandwidth has no density");
    const double d = static_cast<double>(dim());
    const double norm = std::pow(2.0 * std::numbers::pi * h_ * h_, -0.5 * d);
    double acc = 0.0;
    for (const auto& s : support_) acc += std::exp(-(z.z - s.z).squaredNorm() / (2.0 * h_ * h_));
    // Floor keeps the estimate strictly positive far from every support point.
    return std::max(norm * acc / static_cast<double>(support_.size()), std::numeric_limits<double>::min());
  }

  /// Kernel resampling: a uniformly chosen support point plus N(0, h^2) noise.
  [[nodiscard]] std::vector<LatentState> sample(std::size_t n, Rng& rng) const {
    if (!fitted()) throw NotReady("DensityModel::sample: model is not fitted");
    std::vector<LatentState> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& base = support_[rng.index(support_.size())];
      out.emplace_back(Vec(base.z + h_ * rng.normal_vec(base.dim())));
    }
    return out;
  }

 private:
  std::vector<LatentState> support_;
  double h_ = 0.3;
};

/// w_i proportional to densities_i^alpha_skew, normalised to sum 1.
inline std::vector<double> skew_weights(const std::vector<double>& densities, double alpha_skew) {
  require(!densities.empty(), "skew_weights: no densities");
  require(alpha_skew >= -1.0 && alpha_skew <= 0.0, "skew_weights: alpha_skew must lie in [-1, 0]");
  std::vector<double> w;
  w.reserve(densities.size());
  for (double p : densities) {
    if (!(p > 0.0) || !std::isfinite(p)) throw InvalidArgument("skew_weights: densities must be positive and finite");
    w.push_back(std::pow(p, alpha_skew));
  }
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return w;
}

/// Categorical draw from normalised weights.
inline std::size_t sample_index(const std::vector<double>& weights, Rng& rng) {
  require(!weights.empty(), "sample_index: no weights");
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return weights.size() - 1;
}

/// Candidate goals (ground-truth states) with skewed sampling weights.
struct SkewedSampler {
  std::vector<EnvState> candidates;
  std::vector<double> weights;

  static SkewedSampler build(std::vector<EnvState> candidates, const Encoder& enc,
                             const DensityModel& dm, double alpha_skew) {
    require(!candidates.empty(), "SkewedSampler::build: no candidates");
    std::vector<double> dens;
    dens.reserve(candidates.size());
    for (const auto& s : candidates) dens.push_back(dm.estimate(enc.encode(s)));
    return {std::move(candidates), skew_weights(dens, alpha_skew)};
  }

  [[nodiscard]] bool empty() const { return candidates.empty(); }
};

struct GoalDraw {
  LatentState z;
  EnvState source;
  bool fallback = false;  // retry cap exhausted; z is the last draw
  int tries = 0;
};

/// Returns true when a candidate goal lies inside the current frontier (any p_k with k <= k*).
using FrontierFilter = std::function<bool(const LatentState&)>;

/// Draws a goal from the skewed weights. Goals are re-encoded from their ground-truth
/// state at draw time. With a filter, rejects goals inside the frontier up to `retry_cap` draws.
inline GoalDraw sample_goal(const SkewedSampler& sampler, const Encoder& enc,
                            const FrontierFilter* frontier_filter, Rng& rng, int retry_cap = 64) {
  if (sampler.empty()) throw NotReady("sample_goal: no candidate goals");
  require(retry_cap >= 1, "sample_goal: retry cap must be >= 1");
  GoalDraw d;
  for (int attempt = 1; attempt <= retry_cap; ++attempt) {
    d.source = sampler.candidates[sample_index(sampler.weights, rng)];
    d.z = enc.encode(d.source);
    d.tries = attempt;
    if (frontier_filter == nullptr || !(*frontier_filter)(d.z)) return d;
  }
  d.fallback = true;
  return d;
}

}  // namespace leaf::latent
