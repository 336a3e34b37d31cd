#include "leaf/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace leaf;

int train_main(const std::string& config_path, const std::vector<std::string>& overrides,
               std::optional<std::uint64_t> seed, const std::string& seeds, const std::string& out) {
  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& o : overrides) apply_assignment(cfg, o);
    if (!out.empty()) cfg.output_dir = out;
    if (seed) cfg.seed = *seed;
    validate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kUsage;
  }

  std::vector<std::uint64_t> seed_list;
  if (!seeds.empty()) {
    try {
      for (int s : cli::parse_int_list(seeds)) seed_list.push_back(static_cast<std::uint64_t>(s));
    } catch (const ConfigError& e) {
      std::cerr << "usage error: --seeds: " << e.what() << '\n';
      return cli::kUsage;
    }
  }

  auto run_one = [](const RunConfig& c) {
    try {
      return cli::run_train(c).exit_code;
    } catch (const InvalidArgument& e) {
      std::cerr << "error: " << e.what() << '\n';
      return static_cast<int>(cli::kUsage);
    } catch (const std::exception& e) {
      std::cerr << "runtime error: " << e.what() << '\n';
      return static_cast<int>(cli::kRuntime);
    }
  };

  if (seed_list.empty()) return run_one(cfg);
  int worst = cli::kOk;
  for (auto s : seed_list) {
    RunConfig c = cfg;
    c.seed = s;
    c.output_dir = (std::filesystem::path(cfg.output_dir) / ("seed_" + std::to_string(s))).string();
    worst = std::max(worst, run_one(c));
  }
  return worst;
}

int eval_main(const std::string& checkpoint, int episodes, std::uint64_t seed, const std::string& protocol,
              const std::string& out) {
  agent::EvalProtocol p;
  if (protocol == "leaf") p = agent::EvalProtocol::Leaf;
  else if (protocol == "deterministic") p = agent::EvalProtocol::Deterministic;
  else {
    std::cerr << "usage error: --protocol must be leaf or deterministic\n";
    return cli::kUsage;
  }
  if (episodes < 1) {
    std::cerr << "usage error: --episodes must be >= 1\n";
    return cli::kUsage;
  }
  try {
    const auto s = cli::run_eval(checkpoint, episodes, seed, p);
    if (!out.empty()) {
      const auto path = cli::resolve_output(out);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      io::CsvWriter csv(path.string(), cli::eval_header());
      csv.row(cli::eval_row(s));
    }
    std::cout << cli::eval_header() << '\n';
    const auto row = cli::eval_row(s);
    for (std::size_t i = 0; i < row.size(); ++i) std::cout << (i ? "," : "") << row[i];
    std::cout << '\n';
    return cli::kOk;
  } catch (const ckpt::CorruptCheckpoint& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return cli::kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return cli::kRuntime;
  }
}

int analyze_main(const std::string& T_list, const std::string& t_grid, int walks, std::uint64_t seed,
                 const std::string& out) {
  cli::AnalyzeOptions opt;
  try {
    opt.T_list = cli::parse_int_list(T_list);
    opt.t_grid = cli::parse_int_list(t_grid);
    for (int T : opt.T_list)
      if (T < 3) throw ConfigError("T", "every T must be >= 3");
    for (int t : opt.t_grid)
      if (t < 1) throw ConfigError("t-grid", "every t must be >= 1");
    if (walks < 1) throw ConfigError("walks", "must be >= 1");
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return cli::kUsage;
  }
  opt.walks = walks;
  opt.seed = seed;
  opt.out_dir = out;
  return cli::run_analyze(opt).exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Committed exploration with latent reachability frontiers"};
  app.require_subcommand(1);

  std::string config_path, seeds, train_out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> train_seed;
  auto* train = app.add_subcommand("train", "Run the training loop and write run artifacts");
  train->add_option("-c,--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
  train->add_option("--set", overrides, "Override one key (key=value); repeatable");
  train->add_option("--seed", train_seed, "Seed (overrides the config file)");
  train->add_option("--seeds", seeds, "Comma-separated seeds; one run per seed under <output_dir>/seed_<n>");
  train->add_option("-o,--out", train_out, "Output directory (relative paths resolve under $LEAF_OUT)");

  std::string checkpoint, protocol = "leaf", eval_out;
  int eval_episodes = 100;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on inside-U to outside-U episodes");
  eval->add_option("checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("-n,--episodes", eval_episodes, "Number of evaluation episodes");
  eval->add_option("--seed", eval_seed, "Seed");
  eval->add_option("--protocol", protocol, "leaf (frontier then explore) or deterministic");
  eval->add_option("-o,--out", eval_out, "Summary CSV path");

  std::string T_list = "100", t_grid = "25,100,400", analyze_out = "leaf_analysis";
  int walks = 20000;
  std::uint64_t analyze_seed = 0;
  auto* analyze = app.add_subcommand("analyze", "Verify the random-walk analysis of the three schemes");
  analyze->add_option("-T,--T", T_list, "Comma-separated episode lengths");
  analyze->add_option("--t-grid", t_grid, "Comma-separated walk lengths for the RMS law");
  analyze->add_option("--walks", walks, "Random walks per estimate");
  analyze->add_option("--seed", analyze_seed, "Seed");
  analyze->add_option("-o,--out", analyze_out, "Output directory (relative paths resolve under $LEAF_OUT)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : leaf::cli::kUsage;
  }

  if (*train) return train_main(config_path, overrides, train_seed, seeds, train_out);
  if (*eval) return eval_main(checkpoint, eval_episodes, eval_seed, protocol, eval_out);
  return analyze_main(T_list, t_grid, walks, analyze_seed, analyze_out);
}
