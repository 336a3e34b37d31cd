// k-conditioned reachability classifier with a tied (Siamese) state encoder, its
// pair dataset built from episode rollouts, and the training loop.
#pragma once

#include "leaf/core.hpp"
#include "leaf/nn.hpp"

#include <cmath>
#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace leaf::reach {

enum class LabelConvention { Semantic, PaperLiteral };

enum class Label { Unreachable = 0, Reachable = 1, Skip = 2 };

/// Margin heuristic turning an observed gap into a label for horizon k.
///
/// Semantic: reachable when gap <= k, unreachable when gap >= alpha*k, skipped in between.
/// PaperLiteral: 1 when gap > alpha*k, 0 when gap < k, skipped otherwise.
inline Label label_pair(int gap, int k, double alpha = 1.3,
                        LabelConvention convention = LabelConvention::Semantic) {
  require(gap >= 1, "label_pair: gap must be >= 1");
  require(k >= 1, "label_pair: k must be >= 1");
  require(alpha > 1.0, "label_pair: alpha must be > 1");
  const double g = gap;
  if (convention == LabelConvention::PaperLiteral) {
    if (g > alpha * k) return Label::Reachable;
    if (gap < k) return Label::Unreachable;
    return Label::Skip;
  }
  if (gap <= k) return Label::Reachable;
  if (g >= alpha * k) return Label::Unreachable;
  return Label::Skip;
}

/// Raw forward-in-time pairs from rollouts, FIFO-bounded.
class ReachDataset {
 public:
  explicit ReachDataset(std::size_t capacity = 500'000) : capacity_(capacity) {
    require(capacity > 0, "ReachDataset: capacity must be positive");
  }

  void add(ReachSample s) {
    require(s.gap >= 1, "ReachDataset::add: gap must be >= 1");
    require(s.z_i.dim() == s.z_j.dim(), "ReachDataset::add: latent dimension mismatch");
    if (samples_.size() == capacity_) samples_.pop_front();
    samples_.push_back(std::move(s));
  }

  [[nodiscard]] std::size_t size() const { return samples_.size(); }
  [[nodiscard]] bool empty() const { return samples_.empty(); }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] const ReachSample& operator[](std::size_t i) const { return samples_[i]; }

 private:
  std::size_t capacity_;
  std::deque<ReachSample> samples_;
};

/// Appends every ordered pair t1 < t2 of the episode with gap t2 - t1.
inline void append_episode_pairs(ReachDataset& dataset, const std::vector<LatentState>& episode_latents) {
  const std::size_t h = episode_latents.size();
  for (std::size_t t1 = 0; t1 < h; ++t1)
    for (std::size_t t2 = t1 + 1; t2 < h; ++t2)
      dataset.add({episode_latents[t1], episode_latents[t2], static_cast<int>(t2 - t1)});
}

struct LabeledPair {
  LatentState z_i;
  LatentState z_j;
  int k = 1;
  int label = 0;
  int gap = 1;  // source gap, kept for audit
};

struct TrainingBatch {
  std::vector<LabeledPair> records;
  bool balance_cap_reached = false;

  [[nodiscard]] std::size_t positives() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.label == 1;
    return n;
  }
};

struct BatchOptions {
  std::size_t batch_size = 128;
  int k_max = 100;  // k drawn uniformly in [1, k_max]
  double alpha = 1.3;
  LabelConvention convention = LabelConvention::Semantic;
};

/// Draws raw pairs and horizons, labels them, drops margin-band draws and keeps each class
/// at most ceil(0.6 * batch_size). Stops after 10 * batch_size draws.
inline TrainingBatch make_training_batch(const ReachDataset& dataset, const BatchOptions& opt, Rng& rng) {
  if (dataset.empty()) throw NotReady("make_training_batch: reachability dataset is empty");
  require(opt.batch_size >= 1 && opt.k_max >= 1, "make_training_batch: bad options");
  const std::size_t quota = (opt.batch_size * 6 + 9) / 10;
  const std::size_t max_draws = 10 * opt.batch_size;
  TrainingBatch batch;
  batch.records.reserve(opt.batch_size);
  std::size_t count[2] = {0, 0};
  std::size_t draws = 0;
  while (batch.records.size() < opt.batch_size) {
    if (draws++ >= max_draws) {
      batch.balance_cap_reached = true;
      break;
    }
    const auto& s = dataset[rng.index(dataset.size())];
    const int k = rng.uniform_int(1, opt.k_max);
    const Label l = label_pair(s.gap, k, opt.alpha, opt.convention);
    if (l == Label::Skip) continue;
    const int y = l == Label::Reachable ? 1 : 0;
    if (count[y] >= quota) continue;
    ++count[y];
    batch.records.push_back({s.z_i, s.z_j, k, y, s.gap});
  }
  return batch;
}

struct ReachNetShape {
  std::vector<int> encoder_hidden = {16, 102, 90};
  int encoder_out = 100;
  std::vector<int> decoder_hidden = {80, 70};
};

/// ReachNet(z_i, z_j; k): a shared state encoder applied to both latents, an encoder over the
/// replicated horizon vector, and a decoder over the concatenated encodings with a sigmoid head.
class ReachNet {
 public:
  ReachNet() = default;

  /// `k_scale` normalises k before replication (inputs become k / k_scale).
  ReachNet(int latent_dim, int k_scale, Rng& rng, const ReachNetShape& shape = {})
      : latent_dim_(latent_dim), k_scale_(k_scale) {
    require(latent_dim >= 1 && k_scale >= 1, "ReachNet: bad dimensions");
    std::vector<int> enc{latent_dim};
    enc.insert(enc.end(), shape.encoder_hidden.begin(), shape.encoder_hidden.end());
    enc.push_back(shape.encoder_out);
    state_enc_ = nn::Mlp(enc, nn::Activation::Identity, rng);
    k_enc_ = nn::Mlp(enc, nn::Activation::Identity, rng);
    std::vector<int> dec{3 * shape.encoder_out};
    dec.insert(dec.end(), shape.decoder_hidden.begin(), shape.decoder_hidden.end());
    dec.push_back(1);
    decoder_ = nn::Mlp(dec, nn::Activation::Sigmoid, rng);
  }

  ReachNet(nn::Mlp state_enc, nn::Mlp k_enc, nn::Mlp decoder, int k_scale)
      : state_enc_(std::move(state_enc)),
        k_enc_(std::move(k_enc)),
        decoder_(std::move(decoder)),
        latent_dim_(state_enc_.input_size()),
        k_scale_(k_scale) {
    require(k_enc_.input_size() == latent_dim_, "ReachNet: k encoder input must match latent dim");
    require(decoder_.input_size() == state_enc_.output_size() * 2 + k_enc_.output_size(),
            "ReachNet: decoder input must match concatenated encodings");
    require(decoder_.output_size() == 1, "ReachNet: decoder must have one output");
  }

  [[nodiscard]] int latent_dim() const { return latent_dim_; }
  [[nodiscard]] int k_scale() const { return k_scale_; }
  nn::Mlp& state_encoder() { return state_enc_; }
  nn::Mlp& k_encoder() { return k_enc_; }
  nn::Mlp& decoder() { return decoder_; }
  [[nodiscard]] const nn::Mlp& state_encoder() const { return state_enc_; }
  [[nodiscard]] const nn::Mlp& k_encoder() const { return k_enc_; }
  [[nodiscard]] const nn::Mlp& decoder() const { return decoder_; }

  [[nodiscard]] Vec k_vector(int k) const {
    return Vec::Constant(latent_dim_, static_cast<double>(k) / k_scale_);
  }

  /// Probability that z_j is reachable from z_i within k steps.
  [[nodiscard]] double reach_forward(const LatentState& z_i, const LatentState& z_j, int k) const {
    require(k >= 1, "reach_forward: k must be >= 1");
    require(z_i.dim() == latent_dim_ && z_j.dim() == latent_dim_,
            "reach_forward: latent dimension mismatch (expected " + std::to_string(latent_dim_) + ")");
    Vec in(decoder_.input_size());
    in << state_enc_.forward(z_i.z), state_enc_.forward(z_j.z), k_enc_.forward(k_vector(k));
    return decoder_.forward(in)[0];
  }

  /// Column `k-1` holds the scores of every sample against z0 at horizon k, k = 1..k_max.
  /// Shares the encoder passes across horizons and splits the decoder's first layer.
  [[nodiscard]] Mat score_grid(const LatentState& z0, const std::vector<LatentState>& samples, int k_max) const {
    require(k_max >= 1, "score_grid: k_max must be >= 1");
    require(z0.dim() == latent_dim_, "score_grid: latent dimension mismatch");
    const auto m = static_cast<Eigen::Index>(samples.size());
    Mat zs(latent_dim_, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      require(samples[i].dim() == latent_dim_, "score_grid: latent dimension mismatch");
      zs.col(i) = samples[i].z;
    }
    Mat ks(latent_dim_, k_max);
    for (int k = 1; k <= k_max; ++k) ks.col(k - 1) = k_vector(k);

    const Vec e0 = state_enc_.forward(z0.z);
    const Mat es = state_enc_.forward_batch(zs);
    const Mat ek = k_enc_.forward_batch(ks);
    const auto de = state_enc_.output_size();
    const auto dk = k_enc_.output_size();
    const Mat& w0 = decoder_.weight(0);
    const Vec base = w0.leftCols(de) * e0 + decoder_.bias(0);
    const Mat from_samples = w0.middleCols(de, de) * es;
    const Mat from_k = w0.rightCols(dk) * ek;

    Mat grid(m, k_max);
    for (int k = 0; k < k_max; ++k) {
      Mat h = from_samples;
      h.colwise() += base + from_k.col(k);
      h = nn::apply(decoder_.activation(0), h);
      for (std::size_t l = 1; l < decoder_.num_layers(); ++l) {
        Mat pre = decoder_.weight(l) * h;
        pre.colwise() += decoder_.bias(l);
        h = nn::apply(decoder_.activation(l), pre);
      }
      grid.col(k) = h.row(0).transpose();
    }
    return grid;
  }

  [[nodiscard]] Vec scores(const LatentState& z0, const std::vector<LatentState>& samples, int k) const {
    return score_grid(z0, samples, k).col(k - 1);
  }

  struct Gradients {
    nn::MlpGrads state_enc, k_enc, decoder;
  };

  /// Mean binary cross-entropy over the records and its gradients for all three sub-networks.
  double loss_and_gradients(const std::vector<LabeledPair>& records, Gradients* grads) const {
    require(!records.empty(), "ReachNet::loss_and_gradients: empty batch");
    const auto b = static_cast<Eigen::Index>(records.size());
    Mat zi(latent_dim_, b), zj(latent_dim_, b), kv(latent_dim_, b), y(1, b);
    for (Eigen::Index c = 0; c < b; ++c) {
      const auto& r = records[c];
      require(r.z_i.dim() == latent_dim_ && r.z_j.dim() == latent_dim_ && r.k >= 1,
              "ReachNet: malformed training record");
      zi.col(c) = r.z_i.z;
      zj.col(c) = r.z_j.z;
      kv.col(c) = k_vector(r.k);
      y(0, c) = r.label;
    }
    nn::ForwardCache ci, cj, ck, cd;
    const Mat ei = state_enc_.forward_cached(zi, ci);
    const Mat ej = state_enc_.forward_cached(zj, cj);
    const Mat ek = k_enc_.forward_cached(kv, ck);
    Mat cat(decoder_.input_size(), b);
    cat << ei, ej, ek;
    decoder_.forward_cached(cat, cd);
    // Recover the logit from the cached pre-activation for a stable BCE.
    const auto loss = nn::bce_with_logits(cd.pre.back(), y);
    if (!std::isfinite(loss.loss)) throw DivergenceError("ReachNet: non-finite loss");
    if (grads != nullptr) {
      grads->decoder = decoder_.backward(cd, loss.grad, nn::GradWrt::OutputPreActivation);
      const auto de = state_enc_.output_size();
      const Mat& gin = grads->decoder.input;
      grads->state_enc = state_enc_.backward(ci, gin.topRows(de));
      // Tied weights: contributions of both latent paths add up.
      nn::accumulate(grads->state_enc, state_enc_.backward(cj, gin.middleRows(de, de)));
      grads->k_enc = k_enc_.backward(ck, gin.bottomRows(k_enc_.output_size()));
    }
    return loss.loss;
  }

 private:
  nn::Mlp state_enc_;
  nn::Mlp k_enc_;
  nn::Mlp decoder_;
  int latent_dim_ = 0;
  int k_scale_ = 1;
};

/// Adam state for each ReachNet sub-network.
struct ReachOptimizer {
  nn::AdamState state_enc, k_enc, decoder;

  explicit ReachOptimizer(nn::AdamConfig c = {}) : state_enc(c), k_enc(c), decoder(c) {}
};

inline double train_on_batch(ReachNet& net, const std::vector<LabeledPair>& records, ReachOptimizer& opt) {
  ReachNet::Gradients g;
  const double loss = net.loss_and_gradients(records, &g);
  nn::adam_step(net.state_encoder(), g.state_enc, opt.state_enc);
  nn::adam_step(net.k_encoder(), g.k_enc, opt.k_enc);
  nn::adam_step(net.decoder(), g.decoder, opt.decoder);
  return loss;
}

/// Runs `steps` Adam updates on freshly drawn balanced batches; returns the loss trace.
inline std::vector<double> train_reachnet(ReachNet& net, const ReachDataset& dataset, int steps,
                                          const BatchOptions& batch, ReachOptimizer& opt, Rng& rng) {
  require(steps >= 0, "train_reachnet: steps must be >= 0");
  if (dataset.empty()) throw NotReady("train_reachnet: reachability dataset is empty");
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(steps));
  for (int s = 0; s < steps; ++s) {
    const auto b = make_training_batch(dataset, batch, rng);
    if (b.records.empty()) continue;
    trace.push_back(train_on_batch(net, b.records, opt));
  }
  return trace;
}

/// Fraction of records classified correctly at threshold 0.5.
inline double accuracy(const ReachNet& net, const std::vector<LabeledPair>& records) {
  if (records.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& r : records) ok += (net.reach_forward(r.z_i, r.z_j, r.k) >= 0.5) == (r.label == 1);
  return static_cast<double>(ok) / static_cast<double>(records.size());
}

}  // namespace leaf::reach
