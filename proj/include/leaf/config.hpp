// Flat key=value run configuration.
#pragma once

#include "leaf/core.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace leaf {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& msg)
      : std::runtime_error(key.empty() ? msg : key + ": " + msg), key_(key) {}
  [[nodiscard]] const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class Scheme { Leaf, SkewFitVariant, GoExploreVariant };
enum class PhaseConvention { Prose, AlgorithmLiteral };

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Leaf: return "LEAF";
    case Scheme::SkewFitVariant: return "SKEWFIT_VARIANT";
    case Scheme::GoExploreVariant: return "GOEXPLORE_VARIANT";
  }
  return "?";
}

struct RunConfig {
  Scheme scheme = Scheme::Leaf;
  std::uint64_t seed = 0;
  int n_episodes = 400;
  int H0 = 10;
  int Hmax = 100;
  int latent_dim = 2;
  double delta = 0.2;
  double alpha = 1.3;
  double alpha_skew = -1.0;
  int batch_size = 128;
  double learning_rate = 1e-3;
  long buffer_capacity = 1'000'000;
  int M = 256;
  int k_relabel = 4;
  int reach_steps = 100;
  int refit_every = 10;
  bool label_paper_literal = false;
  PhaseConvention phase_convention = PhaseConvention::Prose;
  std::string output_dir = "leaf_run";

  // policy
  std::vector<int> policy_hidden = {400, 300};
  double sigma = 0.3;  // fraction of max_speed
  double gamma = 0.98;
  double tau = 0.005;
  double eps_reach = 0.25;
  double warmup_fraction = 0.25;
  // latent
  double density_bandwidth = 0.3;  // cm
  int density_support = 2048;
  int goal_retry_cap = 64;
  // reachability
  int reach_batch_size = 128;
  long reach_capacity = 500'000;
  // environment
  double max_speed = 1.0;
  double eval_success_radius = 0.5;
  // artifacts
  int checkpoint_every = 50;
  int eval_episodes = 0;  // post-training evaluation episodes (0 = none)
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    std::size_t pos = 0;
    try {
      out = static_cast<T>(std::stod(v, &pos));
    } catch (const std::exception&) {
      throw ConfigError(key, "expected a number, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError(key, "expected a number, got '" + v + "'");
  } else {
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
      throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
  return out;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Field {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number(std::string name, T RunConfig::*member, T lo, T hi) {
  return {name,
          [name, member, lo, hi](RunConfig& c, const std::string& v) {
            const T x = parse_number<T>(name, v);
            if (!(x >= lo && x <= hi))
              throw ConfigError(name, "value " + v + " outside [" + fmt(static_cast<double>(lo)) + ", " +
                                          fmt(static_cast<double>(hi)) + "]");
            c.*member = x;
          },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*member);
            else return std::to_string(c.*member);
          }};
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"scheme",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "LEAF") c.scheme = Scheme::Leaf;
                   else if (v == "SKEWFIT_VARIANT") c.scheme = Scheme::SkewFitVariant;
                   else if (v == "GOEXPLORE_VARIANT") c.scheme = Scheme::GoExploreVariant;
                   else throw ConfigError("scheme", "expected LEAF|SKEWFIT_VARIANT|GOEXPLORE_VARIANT, got '" + v + "'");
                 },
                 [](const RunConfig& c) { return to_string(c.scheme); }});
    f.push_back({"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    f.push_back(number<int>("n_episodes", &RunConfig::n_episodes, 1, 1'000'000));
    f.push_back(number<int>("H0", &RunConfig::H0, 1, 100'000));
    f.push_back(number<int>("Hmax", &RunConfig::Hmax, 1, 100'000));
    f.push_back(number<int>("latent_dim", &RunConfig::latent_dim, 2, 2));
    f.push_back(number<double>("delta", &RunConfig::delta, 0.0, 1.0));
    f.push_back(number<double>("alpha", &RunConfig::alpha, 1.0 + 1e-12, 100.0));
    f.push_back(number<double>("alpha_skew", &RunConfig::alpha_skew, -1.0, 0.0));
    f.push_back(number<int>("batch_size", &RunConfig::batch_size, 1, 1'000'000));
    f.push_back(number<double>("learning_rate", &RunConfig::learning_rate, 1e-12, 1.0));
    f.push_back(number<long>("buffer_capacity", &RunConfig::buffer_capacity, 1, 100'000'000));
    f.push_back(number<int>("M", &RunConfig::M, 1, 1'000'000));
    f.push_back(number<int>("k_relabel", &RunConfig::k_relabel, 0, 1000));
    f.push_back(number<int>("reach_steps", &RunConfig::reach_steps, 0, 1'000'000));
    f.push_back(number<int>("refit_every", &RunConfig::refit_every, 1, 1'000'000));
    f.push_back({"label_convention",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "semantic") c.label_paper_literal = false;
                   else if (v == "paper_literal") c.label_paper_literal = true;
                   else throw ConfigError("label_convention", "expected semantic|paper_literal, got '" + v + "'");
                 },
                 [](const RunConfig& c) { return std::string(c.label_paper_literal ? "paper_literal" : "semantic"); }});
    f.push_back({"phase_convention",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "prose") c.phase_convention = PhaseConvention::Prose;
                   else if (v == "algorithm_literal") c.phase_convention = PhaseConvention::AlgorithmLiteral;
                   else throw ConfigError("phase_convention", "expected prose|algorithm_literal, got '" + v + "'");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.phase_convention == PhaseConvention::Prose ? "prose" : "algorithm_literal");
                 }});
    f.push_back({"output_dir",
                 [](RunConfig& c, const std::string& v) {
                   if (v.empty()) throw ConfigError("output_dir", "must not be empty");
                   c.output_dir = v;
                 },
                 [](const RunConfig& c) { return c.output_dir; }});
    f.push_back({"policy_hidden",
                 [](RunConfig& c, const std::string& v) {
                   std::vector<int> sizes;
                   std::stringstream ss(v);
                   std::string tok;
                   while (std::getline(ss, tok, ',')) {
                     const int n = parse_number<int>("policy_hidden", trim(tok));
                     if (n < 1) throw ConfigError("policy_hidden", "layer sizes must be positive");
                     sizes.push_back(n);
                   }
                   if (sizes.empty()) throw ConfigError("policy_hidden", "need at least one hidden layer");
                   c.policy_hidden = sizes;
                 },
                 [](const RunConfig& c) { return join(c.policy_hidden); }});
    f.push_back(number<double>("sigma", &RunConfig::sigma, 1e-9, 10.0));
    f.push_back(number<double>("gamma", &RunConfig::gamma, 0.0, 1.0));
    f.push_back(number<double>("tau", &RunConfig::tau, 0.0, 1.0));
    f.push_back(number<double>("eps_reach", &RunConfig::eps_reach, 0.0, 100.0));
    f.push_back(number<double>("warmup_fraction", &RunConfig::warmup_fraction, 0.0, 1.0));
    f.push_back(number<double>("density_bandwidth", &RunConfig::density_bandwidth, 1e-6, 100.0));
    f.push_back(number<int>("density_support", &RunConfig::density_support, 1, 10'000'000));
    f.push_back(number<int>("goal_retry_cap", &RunConfig::goal_retry_cap, 1, 1'000'000));
    f.push_back(number<int>("reach_batch_size", &RunConfig::reach_batch_size, 1, 1'000'000));
    f.push_back(number<long>("reach_capacity", &RunConfig::reach_capacity, 1, 100'000'000));
    f.push_back(number<double>("max_speed", &RunConfig::max_speed, 1e-6, 100.0));
    f.push_back(number<double>("eval_success_radius", &RunConfig::eval_success_radius, 0.0, 100.0));
    f.push_back(number<int>("checkpoint_every", &RunConfig::checkpoint_every, 1, 1'000'000));
    f.push_back(number<int>("eval_episodes", &RunConfig::eval_episodes, 0, 1'000'000));
    return f;
  }();
  return table;
}

}  // namespace config_detail

/// Sets one key; unknown keys and out-of-range values raise ConfigError naming the key.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : config_detail::fields()) {
    if (f.name == key) {
      f.set(cfg, config_detail::trim(value));
      return;
    }
  }
  throw ConfigError(key, "unknown configuration key");
}

/// Applies a `key=value` assignment.
inline void apply_assignment(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("", "expected key=value, got '" + assignment + "'");
  set_config_value(cfg, config_detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

inline void validate(const RunConfig& c) {
  if (c.Hmax < c.H0) throw ConfigError("Hmax", "must be >= H0");
}

/// Parses `key = value` lines; `#` starts a comment.
inline RunConfig parse_config(std::istream& is, RunConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = config_detail::trim(line);
    if (t.empty()) continue;
    if (t.find('=') == std::string::npos)
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected key=value");
    apply_assignment(base, t);
  }
  validate(base);
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("", "cannot read config file '" + path + "'");
  return parse_config(is, std::move(base));
}

/// Every key with its resolved value, in declaration order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : config_detail::fields()) out.emplace_back(f.name, f.get(c));
  return out;
}

}  // namespace leaf
