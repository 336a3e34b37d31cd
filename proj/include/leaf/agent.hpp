// Goal-conditioned actor-critic (deterministic mean plus Gaussian exploration noise),
// hindsight relabeling, and the committed-exploration episode loop with its baselines.
#pragma once

#include "leaf/config.hpp"
#include "leaf/core.hpp"
#include "leaf/env.hpp"
#include "leaf/frontier.hpp"
#include "leaf/latent.hpp"
#include "leaf/nn.hpp"
#include "leaf/reachnet.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace leaf::agent {

// ---------------------------------------------------------------------------
// Policy

struct PolicyParams {
  nn::Mlp actor;          // [z_t, z_g] -> tanh output, scaled to the action bound
  nn::Mlp critic;         // [z_t, a, z_g] -> Q
  nn::Mlp target_critic;
  Vec sigma;              // exploration scale per action dimension
  double gamma = 0.98;
  double tau = 0.005;
  double max_speed = 1.0;

  static PolicyParams make(int latent_dim, int action_dim, const std::vector<int>& hidden, double max_speed,
                           double sigma_fraction, Rng& rng) {
    PolicyParams p;
    std::vector<int> a{2 * latent_dim};
    a.insert(a.end(), hidden.begin(), hidden.end());
    a.push_back(action_dim);
    std::vector<int> c{2 * latent_dim + action_dim};
    c.insert(c.end(), hidden.begin(), hidden.end());
    c.push_back(1);
    p.actor = nn::Mlp(a, nn::Activation::Tanh, rng);
    p.critic = nn::Mlp(c, nn::Activation::Identity, rng);
    p.target_critic = p.critic;
    p.max_speed = max_speed;
    p.sigma = Vec::Constant(action_dim, sigma_fraction * max_speed);
    return p;
  }

  [[nodiscard]] int latent_dim() const { return actor.input_size() / 2; }
  [[nodiscard]] int action_dim() const { return actor.output_size(); }

  /// Per-component bound on the tanh output so that every action norm is <= max_speed.
  [[nodiscard]] double action_scale() const { return max_speed / std::sqrt(static_cast<double>(action_dim())); }
};

inline Vec actor_input(const LatentState& z, const LatentState& g) {
  Vec x(z.dim() + g.dim());
  x << z.z, g.z;
  return x;
}

inline Vec act_deterministic(const PolicyParams& p, const LatentState& z_t, const LatentState& z_g) {
  require(z_t.dim() == p.latent_dim() && z_g.dim() == p.latent_dim(),
          "act_deterministic: latent dimension mismatch (expected " + std::to_string(p.latent_dim()) + ")");
  return p.action_scale() * p.actor.forward(actor_input(z_t, z_g));
}

/// Radial clamp to the action bound.
inline Vec clamp_action(Vec a, double max_speed) {
  const double n = a.norm();
  if (n > max_speed) a *= max_speed / n;
  return a;
}

inline Vec act_stochastic(const PolicyParams& p, const LatentState& z_t, const LatentState& z_g, Rng& rng) {
  Vec mu = act_deterministic(p, z_t, z_g);
  return clamp_action(mu + p.sigma.cwiseProduct(rng.normal_vec(mu.size())), p.max_speed);
}

/// r = -||z' - z_g||
inline double latent_reward(const LatentState& z_next, const LatentState& z_goal) {
  return -latent_distance(z_next, z_goal);
}

/// Future-state relabels: for step t, goals from states s_h with h uniform in [t+1, L-1]
/// (L transitions, s_h = episode[h].s); step_index becomes h+1. The originals are not returned.
inline std::vector<Transition> relabel_future(const std::vector<Transition>& episode, int k_relabel,
                                              const latent::Encoder& enc, Rng& rng) {
  require(k_relabel >= 0, "relabel_future: k_relabel must be >= 0");
  std::vector<Transition> out;
  const int len = static_cast<int>(episode.size());
  for (int t = 0; t + 1 < len; ++t) {
    for (int i = 0; i < k_relabel; ++i) {
      const int h = rng.uniform_int(t + 1, len - 1);
      Transition r = episode[static_cast<std::size_t>(t)];
      const EnvState& future = episode[static_cast<std::size_t>(h)].s;
      r.goal = enc.encode(future);
      r.goal_source = future;
      r.step_index = h + 1;
      out.push_back(std::move(r));
    }
  }
  return out;
}

struct PolicyOptimizer {
  nn::AdamState actor, critic;
  explicit PolicyOptimizer(nn::AdamConfig c = {}) : actor(c), critic(c) {}
};

struct TrainLosses {
  double critic = 0.0;
  double actor = 0.0;
};

/// One critic regression step toward r + gamma * Q_target(z', mu(z', g), g), one actor ascent
/// step on Q(z, mu(z, g), g), then a soft target update.
inline TrainLosses train_step(PolicyParams& p, const std::vector<Transition>& batch, const latent::Encoder& enc,
                              PolicyOptimizer& opt) {
  require(!batch.empty(), "train_step: empty batch");
  const auto d = static_cast<Eigen::Index>(p.latent_dim());
  const auto ad = static_cast<Eigen::Index>(p.action_dim());
  const auto b = static_cast<Eigen::Index>(batch.size());
  Mat z(d, b), zn(d, b), g(d, b), a(ad, b), r(1, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const auto& t = batch[static_cast<std::size_t>(c)];
    const LatentState zc = enc.encode(t.s), znc = enc.encode(t.s_next);
    const LatentState gc = t.goal_source ? enc.encode(*t.goal_source) : t.goal;
    require(t.a.size() == ad && gc.dim() == d, "train_step: transition dimension mismatch");
    z.col(c) = zc.z;
    zn.col(c) = znc.z;
    g.col(c) = gc.z;
    a.col(c) = t.a;
    r(0, c) = latent_reward(znc, gc);
  }
  const double scale = p.action_scale();

  // critic
  Mat next_in(2 * d, b);
  next_in << zn, g;
  const Mat next_a = scale * p.actor.forward_batch(next_in);
  Mat tq_in(2 * d + ad, b);
  tq_in << zn, next_a, g;
  const Mat target = r + p.gamma * p.target_critic.forward_batch(tq_in);
  Mat q_in(2 * d + ad, b);
  q_in << z, a, g;
  nn::ForwardCache qc;
  const Mat q = p.critic.forward_cached(q_in, qc);
  const auto closs = nn::mse_loss(q, target);
  if (!std::isfinite(closs.loss)) throw DivergenceError("train_step: non-finite critic loss");
  auto cgrad = p.critic.backward(qc, closs.grad);
  nn::adam_step(p.critic, cgrad, opt.critic);

  // actor: maximise Q(z, mu(z, g), g)
  Mat pi_in(2 * d, b);
  pi_in << z, g;
  nn::ForwardCache ac;
  const Mat mu = scale * p.actor.forward_cached(pi_in, ac);
  Mat qa_in(2 * d + ad, b);
  qa_in << z, mu, g;
  nn::ForwardCache qac;
  const Mat qa = p.critic.forward_cached(qa_in, qac);
  const double aloss = -qa.mean();
  if (!std::isfinite(aloss)) throw DivergenceError("train_step: non-finite actor loss");
  const Mat dq = Mat::Constant(1, b, -1.0 / static_cast<double>(b));
  const auto qgrad = p.critic.backward(qac, dq);
  const Mat dmu = qgrad.input.middleRows(d, ad) * scale;
  auto agrad = p.actor.backward(ac, dmu);
  nn::adam_step(p.actor, agrad, opt.actor);

  p.target_critic.soft_update_from(p.critic, p.tau);
  return {closs.loss, aloss};
}

// ---------------------------------------------------------------------------
// Curriculum

struct Curriculum {
  int H0 = 10;
  int Hmax = 100;
  int n_episodes = 400;
  double warmup_fraction = 0.25;

  /// H(e) = min(H0 * e, Hmax), e >= 1.
  [[nodiscard]] int horizon(int episode) const {
    const long h = static_cast<long>(H0) * std::max(episode, 1);
    return static_cast<int>(std::min<long>(h, Hmax));
  }

  /// Episodes before N * warmup_fraction run fully stochastic.
  [[nodiscard]] bool warmup(int episode) const {
    return static_cast<double>(episode) < warmup_fraction * static_cast<double>(n_episodes);
  }
};

// ---------------------------------------------------------------------------
// Episodes

struct EpisodeRecord {
  int episode = 0;
  Scheme scheme = Scheme::Leaf;
  int H = 0;
  std::optional<int> k_star;
  int frontier_steps = 0;  // pre-loop steps (algorithm_literal convention only)
  int det_steps = 0;
  int stoch_steps = 0;
  double final_eval_distance = 0.0;
  bool success = false;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  std::optional<double> reach_acc;
  // frontier summary
  double fraction_at_kstar = 0.0;
  std::size_t bucket_size = 0;
  bool fallback = true;
  bool goal_fallback = false;
  std::vector<EnvState> trajectory;
  EnvState goal;
};

/// Independent random streams so that one consumer never shifts another's sequence.
struct Streams {
  Rng reset, goal, policy, replay, relabel, frontier, reach, density;

  explicit Streams(std::uint64_t seed) {
    const Rng master(seed);
    reset = master.fork(1);
    goal = master.fork(2);
    policy = master.fork(3);
    replay = master.fork(4);
    relabel = master.fork(5);
    frontier = master.fork(6);
    reach = master.fork(7);
    density = master.fork(8);
  }
};

/// Holds every learned and collected component of one training run.
class Trainer {
 public:
  explicit Trainer(RunConfig cfg)
      : cfg_(std::move(cfg)),
        env_cfg_(make_env_config(cfg_)),
        enc_(latent::Encoder::for_arena(env_cfg_)),
        streams_(cfg_.seed),
        buffer_(static_cast<std::size_t>(cfg_.buffer_capacity), 2, cfg_.latent_dim),
        reach_data_(static_cast<std::size_t>(cfg_.reach_capacity)),
        curriculum_{cfg_.H0, cfg_.Hmax, cfg_.n_episodes, cfg_.warmup_fraction},
        popt_(nn::AdamConfig{cfg_.learning_rate}),
        ropt_(nn::AdamConfig{cfg_.learning_rate}) {
    validate(cfg_);
    env_cfg_.validate();
    Rng init = Rng(cfg_.seed).fork(100);
    policy_ = PolicyParams::make(cfg_.latent_dim, 2, cfg_.policy_hidden, cfg_.max_speed, cfg_.sigma, init);
    policy_.gamma = cfg_.gamma;
    policy_.tau = cfg_.tau;
    Rng rinit = Rng(cfg_.seed).fork(101);
    reachnet_ = reach::ReachNet(cfg_.latent_dim, cfg_.Hmax, rinit);
  }

  static env::EnvConfig make_env_config(const RunConfig& c) {
    env::EnvConfig e;
    e.max_speed = c.max_speed;
    e.eval_success_radius = c.eval_success_radius;
    return e;
  }

  [[nodiscard]] const RunConfig& config() const { return cfg_; }
  [[nodiscard]] const env::EnvConfig& env_config() const { return env_cfg_; }
  [[nodiscard]] const latent::Encoder& encoder() const { return enc_; }
  [[nodiscard]] const PolicyParams& policy() const { return policy_; }
  PolicyParams& policy() { return policy_; }
  [[nodiscard]] const reach::ReachNet& reachnet() const { return reachnet_; }
  reach::ReachNet& reachnet() { return reachnet_; }
  [[nodiscard]] const latent::DensityModel& density() const { return density_; }
  [[nodiscard]] const ReplayBuffer& buffer() const { return buffer_; }
  [[nodiscard]] const reach::ReachDataset& reach_dataset() const { return reach_data_; }
  [[nodiscard]] const Curriculum& curriculum() const { return curriculum_; }
  [[nodiscard]] int episodes_done() const { return episode_; }

  [[nodiscard]] reach::BatchOptions reach_batch_options() const {
    return {static_cast<std::size_t>(cfg_.reach_batch_size), cfg_.Hmax, cfg_.alpha,
            cfg_.label_paper_literal ? reach::LabelConvention::PaperLiteral : reach::LabelConvention::Semantic};
  }

  /// Density bandwidth expressed in latent units.
  [[nodiscard]] double latent_bandwidth() const { return cfg_.density_bandwidth / enc_.scale.mean(); }

  /// Runs the next episode (Algorithm 1 body) and all per-episode model updates.
  EpisodeRecord run_episode() {
    const int e = ++episode_;
    try {
      return run_episode_impl(e);
    } catch (const DivergenceError& ex) {
      throw DivergenceError("episode " + std::to_string(e) + ": " + ex.what());
    } catch (const NotReady& ex) {
      throw NotReady("episode " + std::to_string(e) + ": " + ex.what());
    } catch (const InvalidArgument& ex) {
      throw InvalidArgument("episode " + std::to_string(e) + ": " + ex.what());
    }
  }

 private:
  struct Phase {
    const LatentState* goal;
    bool deterministic;
    int budget;
    bool stop_on_arrival;
  };

  EnvState step_and_learn(const EnvState& s, const Vec& action, const LatentState& z_g, const EnvState& g_src,
                          int t, std::vector<Transition>& episode, EpisodeRecord& rec) {
    const EnvState next = env::env_step(env_cfg_, s, action);
    Transition tr{s, action, next, z_g, t + 1, g_src};
    buffer_.push(tr);
    episode.push_back(std::move(tr));
    const auto batch = buffer_.sample(static_cast<std::size_t>(cfg_.batch_size), streams_.replay);
    const auto losses = train_step(policy_, batch, enc_, popt_);
    rec.critic_loss = losses.critic;
    rec.actor_loss = losses.actor;
    return next;
  }

  EpisodeRecord run_episode_impl(int e) {
    EpisodeRecord rec;
    rec.episode = e;
    rec.scheme = cfg_.scheme;
    rec.H = curriculum_.horizon(e);
    const bool warm = curriculum_.warmup(e);

    const EnvState start = env::env_reset(env_cfg_, env::ResetMode::Train, streams_.reset).start;
    const LatentState z0 = enc_.encode(start);

    // Frontier (LEAF past warmup, once the models exist).
    frontier::FrontierReport report;
    std::vector<LatentState> fsamples;
    const bool use_frontier = cfg_.scheme == Scheme::Leaf && !warm && density_.fitted() && !reach_data_.empty();
    if (use_frontier) {
      fsamples = density_.sample(static_cast<std::size_t>(cfg_.M), streams_.frontier);
      report = frontier::compute_frontier(reachnet_, z0, fsamples, std::min(cfg_.Hmax, rec.H), cfg_.delta);
    }

    // Goal.
    latent::GoalDraw goal;
    if (!sampler_.empty()) {
      latent::FrontierFilter filter = [&](const LatentState& z) { return report.inside(reachnet_, z0, z); };
      goal = latent::sample_goal(sampler_, enc_, report.k_star ? &filter : nullptr, streams_.goal,
                                 cfg_.goal_retry_cap);
    } else {
      goal.source = env::sample_free(env_cfg_, streams_.goal);
      goal.z = enc_.encode(goal.source);
    }
    rec.goal = goal.source;
    rec.goal_fallback = goal.fallback;

    std::optional<LatentState> intermediate;
    int intermediate_budget = 0;
    if (use_frontier && report.k_star) {
      report.chosen = frontier::select_frontier_state(report.partition, fsamples, *report.k_star, goal.z);
      if (report.chosen) {
        intermediate = report.chosen;
        intermediate_budget = *report.k_star;
      }
    }
    if (cfg_.scheme == Scheme::GoExploreVariant && !warm && !archive_.empty()) {
      intermediate = enc_.encode(archive_[streams_.goal.index(archive_.size())]);
      intermediate_budget = rec.H / 2;
    }
    rec.k_star = report.k_star;
    rec.fraction_at_kstar = report.fraction_at_kstar();
    rec.bucket_size = report.bucket_size();
    rec.fallback = !intermediate.has_value();

    // Rollout.
    std::vector<Transition> episode;
    episode.reserve(static_cast<std::size_t>(rec.H) + static_cast<std::size_t>(intermediate_budget));
    rec.trajectory.push_back(start);
    EnvState s = start;
    int t = 0;
    auto run_phase = [&](const Phase& ph, int& counter) {
      for (int i = 0; i < ph.budget; ++i) {
        const LatentState zt = enc_.encode(s);
        const Vec a = ph.deterministic ? act_deterministic(policy_, zt, *ph.goal)
                                       : act_stochastic(policy_, zt, *ph.goal, streams_.policy);
        s = step_and_learn(s, a, goal.z, goal.source, t++, episode, rec);
        rec.trajectory.push_back(s);
        ++counter;
        if (ph.stop_on_arrival && latent_distance(enc_.encode(s), *ph.goal) < cfg_.eps_reach) break;
      }
    };

    const bool literal = cfg_.phase_convention == PhaseConvention::AlgorithmLiteral;
    if (intermediate && literal && cfg_.scheme == Scheme::Leaf) {
      // Stochastic approach to the frontier state, then mu toward the goal for t < k*, then pi.
      run_phase({&*intermediate, false, intermediate_budget, true}, rec.frontier_steps);
      const int det = std::min(intermediate_budget, rec.H);
      run_phase({&goal.z, true, det, false}, rec.det_steps);
      run_phase({&goal.z, false, rec.H - det, false}, rec.stoch_steps);
    } else if (intermediate) {
      run_phase({&*intermediate, true, std::min(intermediate_budget, rec.H), true}, rec.det_steps);
      run_phase({&goal.z, false, rec.H - rec.det_steps, false}, rec.stoch_steps);
    } else {
      run_phase({&goal.z, false, rec.H, false}, rec.stoch_steps);
    }

    rec.final_eval_distance = env::eval_distance(s, goal.source);
    rec.success = rec.final_eval_distance < env_cfg_.eval_success_radius;

    // Post-episode updates.
    std::vector<LatentState> latents;
    latents.reserve(rec.trajectory.size());
    for (const auto& st : rec.trajectory) latents.push_back(enc_.encode(st));
    if (cfg_.scheme == Scheme::Leaf) reach::append_episode_pairs(reach_data_, latents);
    for (auto& r : relabel_future(episode, cfg_.k_relabel, enc_, streams_.relabel)) buffer_.push(std::move(r));
    archive_.insert(archive_.end(), rec.trajectory.begin(), rec.trajectory.end());

    if (e == 1 || e % cfg_.refit_every == 0) refit_density();
    if (cfg_.scheme == Scheme::Leaf && !reach_data_.empty() && cfg_.reach_steps > 0) {
      const auto opts = reach_batch_options();
      reach::train_reachnet(reachnet_, reach_data_, cfg_.reach_steps, opts, ropt_, streams_.reach);
      const auto probe = reach::make_training_batch(reach_data_, opts, streams_.reach);
      rec.reach_acc = reach::accuracy(reachnet_, probe.records);
    }
    last_report_ = std::move(report);
    return rec;
  }

  void refit_density() {
    if (buffer_.empty()) return;
    const std::size_t n = std::min<std::size_t>(buffer_.size(), static_cast<std::size_t>(cfg_.density_support));
    std::vector<EnvState> states;
    std::vector<LatentState> support;
    states.reserve(n);
    support.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& tr = buffer_.at(buffer_.size() <= n ? i : streams_.density.index(buffer_.size()));
      states.push_back(tr.s_next);
      support.push_back(enc_.encode(tr.s_next));
    }
    density_.fit(std::move(support), latent_bandwidth());
    sampler_ = latent::SkewedSampler::build(std::move(states), enc_, density_, cfg_.alpha_skew);
  }

  RunConfig cfg_;
  env::EnvConfig env_cfg_;
  latent::Encoder enc_;
  Streams streams_;
  ReplayBuffer buffer_;
  reach::ReachDataset reach_data_;
  Curriculum curriculum_;
  PolicyParams policy_;
  PolicyOptimizer popt_;
  reach::ReachNet reachnet_;
  reach::ReachOptimizer ropt_;
  latent::DensityModel density_;
  latent::SkewedSampler sampler_;
  std::vector<EnvState> archive_;
  frontier::FrontierReport last_report_;
  int episode_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation

enum class EvalProtocol { Deterministic, Leaf };

struct EvalModels {
  const PolicyParams* policy = nullptr;
  const latent::Encoder* encoder = nullptr;
  const reach::ReachNet* reachnet = nullptr;       // Leaf protocol only
  const latent::DensityModel* density = nullptr;   // Leaf protocol only
};

struct EvalEpisode {
  double distance = 0.0;
  bool success = false;
  std::optional<int> k_star;
};

/// Eval-mode episodes (start inside the U, goal outside) without any learning.
inline std::vector<EvalEpisode> evaluate(const EvalModels& m, const env::EnvConfig& env_cfg, int n_episodes, int horizon,
                                         EvalProtocol protocol, std::uint64_t seed, int frontier_samples = 256,
                                         double delta = 0.2, double eps_reach = 0.25) {
  require(n_episodes >= 1, "evaluate: n_episodes must be >= 1");
  require(horizon >= 1, "evaluate: horizon must be >= 1");
  require(m.policy && m.encoder, "evaluate: policy and encoder are required");
  const bool leaf = protocol == EvalProtocol::Leaf && m.reachnet && m.density && m.density->fitted();
  const Rng master(seed);
  Rng reset = master.fork(1), noise = master.fork(2), fr = master.fork(3);
  std::vector<EvalEpisode> out;
  for (int i = 0; i < n_episodes; ++i) {
    const auto rr = env::env_reset(env_cfg, env::ResetMode::Eval, reset);
    const LatentState zg = m.encoder->encode(rr.goal);
    EnvState s = rr.start;
    EvalEpisode ep;
    int used = 0;
    if (leaf) {
      const LatentState z0 = m.encoder->encode(s);
      const auto samples = m.density->sample(static_cast<std::size_t>(frontier_samples), fr);
      const auto rep = frontier::compute_frontier(*m.reachnet, z0, samples, std::min(horizon, m.reachnet->k_scale()),
                                                  delta, &zg);
      ep.k_star = rep.k_star;
      if (rep.chosen) {
        for (; used < std::min(*rep.k_star, horizon); ++used) {
          s = env::env_step(env_cfg, s, act_deterministic(*m.policy, m.encoder->encode(s), *rep.chosen));
          if (latent_distance(m.encoder->encode(s), *rep.chosen) < eps_reach) {
            ++used;
            break;
          }
        }
      }
      for (; used < horizon; ++used)
        s = env::env_step(env_cfg, s, act_stochastic(*m.policy, m.encoder->encode(s), zg, noise));
    } else {
      for (; used < horizon; ++used)
        s = env::env_step(env_cfg, s, act_deterministic(*m.policy, m.encoder->encode(s), zg));
    }
    ep.distance = env::eval_distance(s, rr.goal);
    ep.success = ep.distance < env_cfg.eval_success_radius;
    out.push_back(ep);
  }
  return out;
}

}  // namespace leaf::agent
