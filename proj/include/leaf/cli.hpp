// Experiment commands behind the `leaf` executable: train, eval and analyze.
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime divergence or unreadable
// checkpoint, 3 acceptance violation (analyze).
#pragma once

#include "leaf/agent.hpp"
#include "leaf/analysis.hpp"
#include "leaf/checkpoint.hpp"
#include "leaf/config.hpp"
#include "leaf/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace leaf::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2, kViolation = 3 };

/// Relative output paths resolve under $LEAF_OUT when set.
inline fs::path resolve_output(const std::string& dir) {
  fs::path p(dir);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("LEAF_OUT"); root != nullptr && *root != '\0') return fs::path(root) / p;
  return p;
}

inline const char* episodes_header() {
  return "episode,scheme,H,k_star,det_steps,stoch_steps,final_eval_distance,success,critic_loss,actor_loss,reach_acc";
}
inline const char* frontier_header() { return "episode,k_star,fraction_at_kstar,bucket_size,fallback"; }
inline const char* analysis_header() { return "T,k_star,r1,r2_sum,r2_closed,r3,r3_minus_r2,r3_minus_r1"; }
inline const char* walks_header() { return "t,n_walks,rms,expected_sqrt_t,rel_err"; }

inline std::vector<std::string> episode_row(const agent::EpisodeRecord& r) {
  return {io::num(r.episode),        to_string(r.scheme),      io::num(r.H),
          io::opt(r.k_star),         io::num(r.det_steps),     io::num(r.stoch_steps),
          io::num(r.final_eval_distance), r.success ? "1" : "0", io::num(r.critic_loss),
          io::num(r.actor_loss),     io::opt(r.reach_acc)};
}

inline std::vector<std::string> frontier_row(const agent::EpisodeRecord& r) {
  return {io::num(r.episode), io::opt(r.k_star), io::num(r.fraction_at_kstar), io::num(r.bucket_size),
          r.fallback ? "1" : "0"};
}

// ---------------------------------------------------------------------------
// Checkpoints

inline ckpt::TensorMap checkpoint_tensors(const agent::Trainer& tr) {
  ckpt::TensorMap t;
  const auto& p = tr.policy();
  ckpt::put_mlp(t, "actor", p.actor);
  ckpt::put_mlp(t, "critic", p.critic);
  ckpt::put_mlp(t, "target_critic", p.target_critic);
  ckpt::put_mlp(t, "reach.state_enc", tr.reachnet().state_encoder());
  ckpt::put_mlp(t, "reach.k_enc", tr.reachnet().k_encoder());
  ckpt::put_mlp(t, "reach.dec", tr.reachnet().decoder());
  t["encoder.mean"] = tr.encoder().mean;
  t["encoder.scale"] = tr.encoder().scale;
  t["policy.sigma"] = p.sigma.transpose();
  Mat meta(1, 8);
  const auto& c = tr.config();
  meta << p.gamma, p.tau, p.max_speed, c.Hmax, c.M, c.delta, c.eps_reach, c.eval_success_radius;
  t["run.meta"] = meta;
  const auto& dm = tr.density();
  Mat support(static_cast<Eigen::Index>(dm.support().size()), c.latent_dim);
  for (std::size_t i = 0; i < dm.support().size(); ++i)
    support.row(static_cast<Eigen::Index>(i)) = dm.support()[i].z.transpose();
  t["density.support"] = support;
  t["density.bandwidth"] = Mat::Constant(1, 1, dm.fitted() ? dm.bandwidth() : tr.latent_bandwidth());
  return t;
}

/// Everything evaluation needs, restored from a checkpoint.
struct EvalBundle {
  agent::PolicyParams policy;
  latent::Encoder encoder;
  reach::ReachNet reachnet;
  latent::DensityModel density;
  int Hmax = 100;
  int M = 256;
  double delta = 0.2;
  double eps_reach = 0.25;
  double eval_success_radius = 0.5;
};

inline EvalBundle load_eval_bundle(const std::string& path) {
  const auto t = ckpt::load(path);
  EvalBundle b;
  b.policy.actor = ckpt::get_mlp(t, "actor", nn::Activation::Tanh);
  b.policy.critic = ckpt::get_mlp(t, "critic", nn::Activation::Identity);
  b.policy.target_critic = ckpt::get_mlp(t, "target_critic", nn::Activation::Identity);
  const Mat& meta = ckpt::get(t, "run.meta");
  if (meta.rows() != 1 || meta.cols() != 8 || !meta.allFinite()) throw ckpt::CorruptCheckpoint("bad run.meta");
  b.policy.gamma = meta(0, 0);
  b.policy.tau = meta(0, 1);
  b.policy.max_speed = meta(0, 2);
  b.Hmax = static_cast<int>(meta(0, 3));
  b.M = static_cast<int>(meta(0, 4));
  b.delta = meta(0, 5);
  b.eps_reach = meta(0, 6);
  b.eval_success_radius = meta(0, 7);
  const Mat& sigma = ckpt::get(t, "policy.sigma");
  if (sigma.rows() != 1 || sigma.cols() != b.policy.action_dim()) throw ckpt::CorruptCheckpoint("bad policy.sigma");
  b.policy.sigma = sigma.row(0).transpose();
  const Mat& mean = ckpt::get(t, "encoder.mean");
  const Mat& scale = ckpt::get(t, "encoder.scale");
  if (mean.cols() != 1 || scale.cols() != 1 || mean.rows() != 2 || scale.rows() != 2)
    throw ckpt::CorruptCheckpoint("bad encoder statistics");
  b.encoder.mean = mean.col(0);
  b.encoder.scale = scale.col(0);
  if (b.policy.latent_dim() != b.encoder.latent_dim() ||
      b.policy.critic.input_size() != 2 * b.policy.latent_dim() + b.policy.action_dim())
    throw ckpt::CorruptCheckpoint("policy shapes do not match the encoder");
  try {
    b.reachnet = reach::ReachNet(ckpt::get_mlp(t, "reach.state_enc", nn::Activation::Identity),
                                 ckpt::get_mlp(t, "reach.k_enc", nn::Activation::Identity),
                                 ckpt::get_mlp(t, "reach.dec", nn::Activation::Sigmoid), b.Hmax);
  } catch (const InvalidArgument& e) {
    throw ckpt::CorruptCheckpoint(std::string("reachability network: ") + e.what());
  }
  const Mat& support = ckpt::get(t, "density.support");
  const double bw = ckpt::get(t, "density.bandwidth")(0, 0);
  if (support.rows() > 0) {
    std::vector<LatentState> pts;
    for (Eigen::Index i = 0; i < support.rows(); ++i) pts.emplace_back(Vec(support.row(i).transpose()));
    b.density.fit(std::move(pts), bw);
  }
  return b;
}

// ---------------------------------------------------------------------------
// train

struct TrainResult {
  int exit_code = kOk;
  std::vector<agent::EpisodeRecord> episodes;
  std::vector<agent::EvalEpisode> eval;
  fs::path out_dir;
  std::string error;
};

inline void write_manifest(const fs::path& dir, const RunConfig& cfg, const env::EnvConfig& env_cfg) {
  std::ostringstream os;
  os << "# resolved configuration\n";
  for (const auto& [k, v] : config_entries(cfg)) os << k << '=' << v << '\n';
  os << "# environment geometry (cm)\n";
  os << "env.arena_size=" << io::num(env_cfg.arena_size) << '\n';
  os << "env.wall_thickness=" << io::num(env_cfg.wall_thickness) << '\n';
  os << "env.agent_diameter=" << io::num(env_cfg.agent_diameter) << '\n';
  static const char* names[] = {"left_arm", "right_arm", "base"};
  for (std::size_t i = 0; i < env_cfg.u_wall.size(); ++i) {
    const auto& r = env_cfg.u_wall[i];
    os << "env.u_wall." << names[i] << '=' << io::num(r.x0) << ',' << io::num(r.x1) << ',' << io::num(r.y0) << ','
       << io::num(r.y1) << '\n';
  }
  os << "env.opening=+y\n";
  io::write_text((dir / "manifest.txt").string(), os.str());
}

inline void write_learning_curve(const fs::path& path, const std::vector<agent::EpisodeRecord>& eps) {
  std::map<std::string, io::Series> by_scheme;
  for (const auto& r : eps) {
    auto& s = by_scheme[to_string(r.scheme)];
    s.name = to_string(r.scheme);
    s.points.emplace_back(r.episode, r.final_eval_distance);
  }
  std::vector<io::Series> series;
  for (auto& [_, s] : by_scheme) series.push_back(std::move(s));
  io::write_text(path.string(), io::svg_line_chart("Final distance to goal per episode", "episode",
                                                   "final distance (cm)", series));
}

/// Runs one training job into cfg.output_dir (resolved under $LEAF_OUT).
inline TrainResult run_train(const RunConfig& cfg, std::ostream& log = std::cout) {
  TrainResult res;
  res.out_dir = resolve_output(cfg.output_dir);
  fs::create_directories(res.out_dir / "checkpoints");
  agent::Trainer trainer(cfg);
  RunConfig resolved = cfg;
  resolved.output_dir = res.out_dir.string();
  write_manifest(res.out_dir, resolved, trainer.env_config());
  io::CsvWriter episodes((res.out_dir / "episodes.csv").string(), episodes_header());
  io::CsvWriter frontier((res.out_dir / "frontier.csv").string(), frontier_header());
  auto save_ckpt = [&](int e) {
    char name[64];
    std::snprintf(name, sizeof name, "ckpt_%06d.leafckpt", e);
    ckpt::save((res.out_dir / "checkpoints" / name).string(), checkpoint_tensors(trainer));
    ckpt::save((res.out_dir / "checkpoints" / "latest.leafckpt").string(), checkpoint_tensors(trainer));
  };
  try {
    for (int e = 1; e <= cfg.n_episodes; ++e) {
      auto rec = trainer.run_episode();
      episodes.row(episode_row(rec));
      frontier.row(frontier_row(rec));
      rec.trajectory.clear();
      res.episodes.push_back(std::move(rec));
      if (e % cfg.checkpoint_every == 0 || e == cfg.n_episodes) save_ckpt(e);
    }
  } catch (const DivergenceError& ex) {
    res.exit_code = kRuntime;
    res.error = ex.what();
    log << "divergence: " << ex.what() << '\n';
  }
  write_learning_curve(res.out_dir / "learning_curve.svg", res.episodes);
  if (res.exit_code == kOk && cfg.eval_episodes > 0) {
    const agent::EvalModels m{&trainer.policy(), &trainer.encoder(), &trainer.reachnet(), &trainer.density()};
    res.eval = agent::evaluate(m, trainer.env_config(), cfg.eval_episodes, cfg.Hmax, agent::EvalProtocol::Deterministic,
                               Rng(cfg.seed).fork(999).next_u64(), cfg.M, cfg.delta, cfg.eps_reach);
    io::CsvWriter ev((res.out_dir / "eval.csv").string(), "episode,final_eval_distance,success");
    for (std::size_t i = 0; i < res.eval.size(); ++i)
      ev.row({io::num(i + 1), io::num(res.eval[i].distance), res.eval[i].success ? "1" : "0"});
  }
  log << "train: " << res.episodes.size() << " episodes written to " << res.out_dir.string() << '\n';
  return res;
}

// ---------------------------------------------------------------------------
// eval

struct EvalSummary {
  int n_episodes = 0;
  std::string protocol;
  double mean_distance = 0.0;
  double median_distance = 0.0;
  double success_rate = 0.0;
};

inline EvalSummary summarize(const std::vector<agent::EvalEpisode>& eps, const std::string& protocol) {
  EvalSummary s;
  s.n_episodes = static_cast<int>(eps.size());
  s.protocol = protocol;
  std::vector<double> d;
  double succ = 0;
  for (const auto& e : eps) {
    d.push_back(e.distance);
    succ += e.success;
  }
  s.mean_distance = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  s.median_distance = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  s.success_rate = succ / static_cast<double>(n);
  return s;
}

inline const char* eval_header() { return "n_episodes,protocol,mean_distance,median_distance,success_rate"; }

inline std::vector<std::string> eval_row(const EvalSummary& s) {
  return {io::num(s.n_episodes), s.protocol, io::num(s.mean_distance), io::num(s.median_distance),
          io::num(s.success_rate)};
}

inline EvalSummary run_eval(const std::string& checkpoint, int n_episodes, std::uint64_t seed,
                            agent::EvalProtocol protocol) {
  require(n_episodes >= 1, "eval: n_episodes must be >= 1");
  const auto b = load_eval_bundle(checkpoint);
  env::EnvConfig ec;
  ec.max_speed = b.policy.max_speed;
  ec.eval_success_radius = b.eval_success_radius;
  const agent::EvalModels m{&b.policy, &b.encoder, &b.reachnet, &b.density};
  const auto eps = agent::evaluate(m, ec, n_episodes, b.Hmax, protocol, seed, b.M, b.delta, b.eps_reach);
  return summarize(eps, protocol == agent::EvalProtocol::Leaf ? "leaf" : "deterministic");
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
  std::vector<int> T_list = {100};
  std::vector<int> t_grid = {25, 100, 400};
  int walks = 20000;
  std::uint64_t seed = 0;
  std::string out_dir = "leaf_analysis";
};

struct AnalyzeResult {
  int exit_code = kOk;
  analysis::TheoremReport theorem;
  std::vector<analysis::WalkRow> walks;
  std::vector<analysis::ClosedFormComparison> closed_form;
  fs::path out_dir;
};

inline AnalyzeResult run_analyze(const AnalyzeOptions& opt, std::ostream& log = std::cout) {
  for (int T : opt.T_list) require(T >= 3, "analyze: every T must be >= 3");
  require(opt.walks >= 1, "analyze: walks must be >= 1");
  AnalyzeResult res;
  res.out_dir = resolve_output(opt.out_dir);
  fs::create_directories(res.out_dir);

  res.theorem = analysis::verify_theorem(opt.T_list);
  {
    io::CsvWriter csv((res.out_dir / "analysis.csv").string(), analysis_header());
    io::CsvWriter var((res.out_dir / "analysis_r2_variant.csv").string(), "T,k_star,r2_mean,r3_minus_r2_mean");
    for (const auto& r : res.theorem.rows) {
      csv.row({io::num(r.T), io::num(r.k_star), io::num(r.r1), io::num(r.r2_sum), io::num(r.r2_closed), io::num(r.r3),
               io::num(r.r3_minus_r2()), io::num(r.r3_minus_r1())});
      var.row({io::num(r.T), io::num(r.k_star), io::num(r.r2_mean), io::num(r.r3 - r.r2_mean)});
    }
  }
  {
    io::CsvWriter csv((res.out_dir / "closed_form.csv").string(), "T,k_star,r2_sum,r2_closed,rel_err");
    for (int T : opt.T_list)
      for (int k : {T / 4, T / 2, 3 * T / 4}) {
        if (k < 1 || k >= T) continue;
        res.closed_form.push_back(analysis::compare_closed_form(T, k));
        const auto& c = res.closed_form.back();
        csv.row({io::num(T), io::num(k), io::num(c.summed), io::num(c.closed), io::num(c.rel_error())});
      }
  }
  {
    const Rng rng(opt.seed);
    io::CsvWriter csv((res.out_dir / "walks.csv").string(), walks_header());
    for (int t : opt.t_grid) {
      analysis::WalkRow w{t, opt.walks, analysis::random_walk_rms(t, opt.walks, rng.fork(static_cast<std::uint64_t>(t)))};
      csv.row({io::num(w.t), io::num(w.n_walks), io::num(w.rms), io::num(w.expected()), io::num(w.rel_err())});
      res.walks.push_back(w);
    }
  }
  {
    io::CsvWriter csv((res.out_dir / "derivative.csv").string(), "T,min_df_dk,argmin_k,positive_everywhere");
    for (const auto& d : res.theorem.derivative)
      csv.row({io::num(d.T), io::num(d.min_derivative), io::num(d.argmin_k), d.positive_everywhere ? "1" : "0"});
  }
  for (int T : opt.T_list) {
    io::Series s1{"R1 = sqrt(T)", {}}, s2{"R2 (as printed)", {}}, s3{"R3 = k* + sqrt(T-k*)", {}};
    for (const auto& r : res.theorem.rows) {
      if (r.T != T) continue;
      s1.points.emplace_back(r.k_star, r.r1);
      s2.points.emplace_back(r.k_star, r.r2_sum);
      s3.points.emplace_back(r.k_star, r.r3);
    }
    io::write_text((res.out_dir / ("analysis_T" + std::to_string(T) + ".svg")).string(),
                   io::svg_line_chart("Reach distance bounds, T = " + std::to_string(T), "k*", "distance (steps)",
                                      {s1, s2, s3}));
  }

  for (const auto& w : res.walks)
    log << "walk t=" << w.t << " rms=" << w.rms << " expected=" << w.expected() << " rel_err=" << w.rel_err() << '\n';
  log << "theorem rows=" << res.theorem.rows.size() << " violations=" << res.theorem.violations.size() << '\n';
  for (const auto& v : res.theorem.violations)
    log << "  violation T=" << v.T << " k*=" << v.k_star << " r1=" << v.r1 << " r2_sum=" << v.r2_sum
        << " r3=" << v.r3 << '\n';
  if (!res.theorem.ok()) res.exit_code = kViolation;
  return res;
}

/// Parses "16,64,100".
inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto t = config_detail::trim(tok);
    if (t.empty()) throw ConfigError("", "malformed integer list '" + s + "'");
    out.push_back(config_detail::parse_number<int>("list", t));
  }
  if (out.empty()) throw ConfigError("", "empty integer list");
  return out;
}

}  // namespace leaf::cli
