// Shared domain types, the replay buffer and the seeded counter-based RNG.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace leaf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised for contract violations on inputs (wrong dimensions, bad ranges).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when training produces non-finite values.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an operation needs data that does not exist yet
/// (empty buffer, unfitted model).
class NotReady : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

/// Ground-truth simulator state: agent centre in centimetres.
struct EnvState {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

/// A point in latent space.
struct LatentState {
  Vec z;

  LatentState() = default;
  explicit LatentState(Vec v) : z(std::move(v)) {}
  LatentState(std::initializer_list<double> vals) : z(static_cast<Eigen::Index>(vals.size())) {
    Eigen::Index i = 0;
    for (double v : vals) z[i++] = v;
  }

  [[nodiscard]] Eigen::Index dim() const { return z.size(); }
  [[nodiscard]] bool finite() const { return z.allFinite(); }

  friend bool operator==(const LatentState& a, const LatentState& b) {
    return a.z.size() == b.z.size() && a.z == b.z;
  }
};

inline double latent_distance(const LatentState& a, const LatentState& b) {
  require(a.dim() == b.dim(), "latent dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                                  std::to_string(b.dim()));
  return (a.z - b.z).norm();
}

/// One environment step. `step_index` is the t+1 slot of the stored tuple.
struct Transition {
  EnvState s;
  Vec a;
  EnvState s_next;
  LatentState goal;
  int step_index = 1;
  // Ground-truth state the goal was encoded from; when set, goals are re-encoded at training time.
  std::optional<EnvState> goal_source;
};

/// Latent pair with the observed time separation inside one episode.
struct ReachSample {
  LatentState z_i;
  LatentState z_j;
  int gap = 1;
};

// ---------------------------------------------------------------------------
// Rng

/// Counter-based 64-bit generator (SplitMix64 finaliser over seed and counter).
/// The integer and uniform streams are bit-identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    std::uint64_t x = seed_ * 0xD1B54A32D192ED03ULL + (++counter_) * 0x9E3779B97F4A7C15ULL;
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n).
  std::size_t index(std::size_t n) {
    require(n > 0, "Rng::index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r = 0;
    do {
      r = next_u64();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
  }

  /// Uniform integer on [lo, hi].
  int uniform_int(int lo, int hi) {
    require(hi >= lo, "Rng::uniform_int: empty range");
    return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo) + 1));
  }

  /// Standard normal via Box-Muller (one draw per call; the pair partner is discarded
  /// so the stream position depends only on the number of calls).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vec normal_vec(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  /// Independent stream derived from this generator's seed and a stream id.
  [[nodiscard]] Rng fork(std::uint64_t stream) const {
    Rng mixer(seed_ ^ (stream * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL));
    return Rng(mixer.next_u64());
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// ReplayBuffer

/// Bounded FIFO of transitions; oldest records are evicted first.
/// Externally synchronised: do not interleave push and sample across threads.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, Eigen::Index action_dim, Eigen::Index latent_dim)
      : capacity_(capacity), action_dim_(action_dim), latent_dim_(latent_dim) {
    require(capacity > 0, "ReplayBuffer: capacity must be positive");
  }

  void push(Transition t) {
    require(t.a.size() == action_dim_, "ReplayBuffer::push: action dimension " +
                                           std::to_string(t.a.size()) + ", expected " +
                                           std::to_string(action_dim_));
    require(t.goal.dim() == latent_dim_, "ReplayBuffer::push: goal dimension " +
                                             std::to_string(t.goal.dim()) + ", expected " +
                                             std::to_string(latent_dim_));
    require(t.step_index >= 1, "ReplayBuffer::push: step_index must be >= 1");
    if (records_.size() < capacity_) {
      records_.push_back(std::move(t));
    } else {
      records_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  [[nodiscard]] std::vector<Transition> sample(std::size_t n, Rng& rng) const {
    if (records_.empty()) throw NotReady("ReplayBuffer::sample: buffer is empty, cannot train yet");
    require(n >= 1, "ReplayBuffer::sample: n must be >= 1");
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(records_[rng.index(records_.size())]);
    return out;
  }

  [[nodiscard]] std::size_t size() const { return records_.size(); }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] bool empty() const { return records_.empty(); }
  [[nodiscard]] Eigen::Index action_dim() const { return action_dim_; }
  [[nodiscard]] Eigen::Index latent_dim() const { return latent_dim_; }

  /// i-th record in insertion order (0 = oldest).
  [[nodiscard]] const Transition& at(std::size_t i) const {
    require(i < records_.size(), "ReplayBuffer::at: index out of range");
    return records_[(head_ + i) % records_.size()];
  }

 private:
  std::size_t capacity_;
  Eigen::Index action_dim_;
  Eigen::Index latent_dim_;
  std::vector<Transition> records_;
  std::size_t head_ = 0;  // oldest record once full
};

}  // namespace leaf
