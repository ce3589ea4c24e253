#include "amrl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <system_error>

namespace amrl {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Dqn: return "dqn";
    case Algorithm::Ppo: return "ppo";
    case Algorithm::Sac: return "sac";
  }
  return "?";
}

std::string to_string(RewardMode m) { return m == RewardMode::Dense ? "dense" : "sparse"; }

Algorithm parse_algorithm(std::string_view text) {
  if (text == "dqn") return Algorithm::Dqn;
  if (text == "ppo") return Algorithm::Ppo;
  if (text == "sac") return Algorithm::Sac;
  throw ConfigError("unknown algorithm '" + std::string(text) + "' (expected dqn, ppo or sac)");
}

RewardMode parse_reward_mode(std::string_view text) {
  if (text == "dense") return RewardMode::Dense;
  if (text == "sparse") return RewardMode::Sparse;
  throw ConfigError("unknown reward mode '" + std::string(text) + "' (expected dense or sparse)");
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

template <typename V>
V parse_number(std::string_view text) {
  V v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ConfigError("malformed number '" + std::string(text) + "'");
  }
  return v;
}

template <typename V>
V parse_value(std::string_view text) {
  if constexpr (std::is_same_v<V, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("malformed boolean '" + std::string(text) + "'");
  } else if constexpr (std::is_same_v<V, std::string>) {
    return std::string(text);
  } else if constexpr (std::is_same_v<V, std::vector<int>>) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t comma = std::min(text.find(',', pos), text.size());
      out.push_back(parse_number<int>(trim(text.substr(pos, comma - pos))));
      pos = comma + 1;
    }
    return out;
  } else if constexpr (std::is_same_v<V, Algorithm>) {
    return parse_algorithm(text);
  } else if constexpr (std::is_same_v<V, RewardMode>) {
    return parse_reward_mode(text);
  } else {
    return parse_number<V>(text);
  }
}

template <typename V>
std::string format_value(const V& v) {
  if constexpr (std::is_same_v<V, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<V, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<V, std::vector<int>>) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(v[i]);
    }
    return out;
  } else if constexpr (std::is_same_v<V, Algorithm> || std::is_same_v<V, RewardMode>) {
    return to_string(v);
  } else if constexpr (std::is_floating_point_v<V>) {
    return format_double(v);
  } else {
    return std::to_string(v);
  }
}

struct Field {
  std::string key;
  std::string help;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, std::string_view)> set;
};

template <typename Access>
Field field(std::string key, std::string help, Access access) {
  using V = std::remove_reference_t<decltype(access(std::declval<TrainConfig&>()))>;
  return Field{std::move(key), std::move(help),
               [access](const TrainConfig& c) {
                 return format_value<V>(access(const_cast<TrainConfig&>(c)));
               },
               [access](TrainConfig& c, std::string_view text) {
                 access(c) = parse_value<V>(text);
               }};
}

#define AMRL_FIELD(key, help, expr) field(key, help, [](TrainConfig& c) -> auto& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      AMRL_FIELD("algorithm", "dqn, ppo or sac", c.algorithm),
      AMRL_FIELD("reward_mode", "dense or sparse", c.reward_mode),
      AMRL_FIELD("seed", "master seed for every stochastic component", c.seed),
      AMRL_FIELD("horizon", "maximum steps per episode", c.horizon),
      AMRL_FIELD("nozzle_channel", "add an image channel marking the nozzle", c.nozzle_channel),
      AMRL_FIELD("sections_dir", "directory of .sect files; empty uses the generator",
                 c.sections_dir),
      AMRL_FIELD("dataset.count", "number of generated sections", c.dataset_count),
      AMRL_FIELD("dataset.seed", "seed of the section generator", c.dataset_seed),
      AMRL_FIELD("dataset.grid_size", "generated grid side in pixels", c.generator.grid_size),
      AMRL_FIELD("dataset.min_shapes", "fewest shapes per generated section",
                 c.generator.min_shapes),
      AMRL_FIELD("dataset.max_shapes", "most shapes per generated section",
                 c.generator.max_shapes),
      AMRL_FIELD("dataset.rectangles", "generator may draw rectangles", c.generator.rectangles),
      AMRL_FIELD("dataset.ellipses", "generator may draw ellipses", c.generator.ellipses),
      AMRL_FIELD("dataset.min_extent", "smallest shape extent as a fraction of the grid",
                 c.generator.min_extent),
      AMRL_FIELD("dataset.max_extent", "largest shape extent as a fraction of the grid",
                 c.generator.max_extent),
      AMRL_FIELD("holdout_fraction", "share of sections kept for evaluation only",
                 c.holdout_fraction),
      AMRL_FIELD("total_env_steps", "training budget in environment steps", c.total_env_steps),
      AMRL_FIELD("total_episodes", "PPO episode budget; 0 disables it", c.total_episodes),
      AMRL_FIELD("eval_interval_steps", "DQN/SAC env steps between evaluations",
                 c.eval_interval_steps),
      AMRL_FIELD("eval_interval_iterations", "PPO iterations between evaluations",
                 c.eval_interval_iterations),
      AMRL_FIELD("eval_episodes", "greedy episodes per evaluation", c.eval_episodes),
      AMRL_FIELD("log_wall_clock", "record elapsed seconds; false writes 0 for reproducible CSVs",
                 c.log_wall_clock),
      AMRL_FIELD("net.conv_filters", "filters per conv layer", c.network.conv_filters),
      AMRL_FIELD("net.conv_strides", "stride per conv layer", c.network.conv_strides),
      AMRL_FIELD("net.kernel", "square conv kernel size", c.network.kernel),
      AMRL_FIELD("net.hidden", "dense width of every head", c.network.hidden),
      AMRL_FIELD("dqn.gamma", "discount", c.dqn.gamma),
      AMRL_FIELD("dqn.buffer_capacity", "replay capacity", c.dqn.buffer_capacity),
      AMRL_FIELD("dqn.batch_size", "replay batch size", c.dqn.batch_size),
      AMRL_FIELD("dqn.epsilon_start", "initial exploration rate", c.dqn.epsilon_start),
      AMRL_FIELD("dqn.epsilon_end", "final exploration rate", c.dqn.epsilon_end),
      AMRL_FIELD("dqn.epsilon_decay_fraction", "share of training spent decaying epsilon",
                 c.dqn.epsilon_decay_fraction),
      AMRL_FIELD("dqn.tau", "Polyak rate of the target network", c.dqn.tau),
      AMRL_FIELD("dqn.learning_starts", "transitions collected before training",
                 c.dqn.learning_starts),
      AMRL_FIELD("dqn.train_every", "env steps per gradient step", c.dqn.train_every),
      AMRL_FIELD("dqn.lr", "Adam learning rate", c.dqn.lr),
      AMRL_FIELD("dqn.max_grad_norm", "global gradient norm clip", c.dqn.max_grad_norm),
      AMRL_FIELD("ppo.gamma", "discount", c.ppo.gamma),
      AMRL_FIELD("ppo.gae_lambda", "GAE lambda", c.ppo.gae_lambda),
      AMRL_FIELD("ppo.clip", "ratio clip epsilon", c.ppo.clip),
      AMRL_FIELD("ppo.value_coef", "value loss weight", c.ppo.value_coef),
      AMRL_FIELD("ppo.entropy_coef", "entropy bonus weight", c.ppo.entropy_coef),
      AMRL_FIELD("ppo.num_envs", "parallel environment streams", c.ppo.num_envs),
      AMRL_FIELD("ppo.steps_per_env", "rollout length per stream", c.ppo.steps_per_env),
      AMRL_FIELD("ppo.epochs", "passes over each rollout", c.ppo.epochs),
      AMRL_FIELD("ppo.minibatch_size", "samples per gradient step", c.ppo.minibatch_size),
      AMRL_FIELD("ppo.normalize_advantages", "standardize advantages per rollout",
                 c.ppo.normalize_advantages),
      AMRL_FIELD("ppo.lr", "Adam learning rate", c.ppo.lr),
      AMRL_FIELD("ppo.max_grad_norm", "global gradient norm clip", c.ppo.max_grad_norm),
      AMRL_FIELD("sac.gamma", "discount", c.sac.gamma),
      AMRL_FIELD("sac.buffer_capacity", "replay capacity", c.sac.buffer_capacity),
      AMRL_FIELD("sac.batch_size", "replay batch size", c.sac.batch_size),
      AMRL_FIELD("sac.tau", "Polyak rate of the target critics", c.sac.tau),
      AMRL_FIELD("sac.learning_starts", "transitions collected before training",
                 c.sac.learning_starts),
      AMRL_FIELD("sac.train_every", "env steps per gradient step", c.sac.train_every),
      AMRL_FIELD("sac.lr", "Adam learning rate of policy and critics", c.sac.lr),
      AMRL_FIELD("sac.alpha_lr", "Adam learning rate of log alpha", c.sac.alpha_lr),
      AMRL_FIELD("sac.initial_alpha", "starting temperature", c.sac.initial_alpha),
      AMRL_FIELD("sac.target_entropy_scale", "target entropy as a fraction of ln 8",
                 c.sac.target_entropy_scale),
      AMRL_FIELD("sac.gumbel_temperature", "Gumbel-softmax relaxation temperature",
                 c.sac.gumbel_temperature),
      AMRL_FIELD("sac.max_grad_norm", "global gradient norm clip", c.sac.max_grad_norm),
  };
  return table;
}

#undef AMRL_FIELD

}  // namespace

void TrainConfig::validate() const {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(horizon >= 1, "horizon must be >= 1");
  require(dataset_count >= 1, "dataset.count must be >= 1");
  require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, "holdout_fraction must be in [0, 1)");
  require(total_env_steps >= 0, "total_env_steps must be >= 0");
  require(total_episodes >= 0, "total_episodes must be >= 0");
  require(eval_interval_steps >= 1, "eval_interval_steps must be >= 1");
  require(eval_interval_iterations >= 1, "eval_interval_iterations must be >= 1");
  require(eval_episodes >= 1, "eval_episodes must be >= 1");
  require(!network.conv_filters.empty(), "net.conv_filters must not be empty");
  require(network.conv_filters.size() == network.conv_strides.size(),
          "net.conv_filters and net.conv_strides differ in length");
  require(network.hidden >= 1 && network.kernel >= 1, "net sizes must be positive");
  require(dqn.batch_size >= 1 && dqn.train_every >= 1, "dqn batch and cadence must be positive");
  require(dqn.buffer_capacity >= static_cast<std::size_t>(dqn.batch_size),
          "dqn.buffer_capacity below batch size");
  require(ppo.num_envs >= 1 && ppo.steps_per_env >= 1 && ppo.epochs >= 1 &&
              ppo.minibatch_size >= 1,
          "ppo sizes must be positive");
  require(sac.batch_size >= 1 && sac.train_every >= 1, "sac batch and cadence must be positive");
  require(sac.buffer_capacity >= static_cast<std::size_t>(sac.batch_size),
          "sac.buffer_capacity below batch size");
}

EnvConfig TrainConfig::env_config() const {
  EnvConfig env;
  env.horizon = horizon;
  env.reward_mode = reward_mode;
  env.observation.nozzle_channel = nozzle_channel;
  return env;
}

nn::NetworkSpec TrainConfig::trunk_spec(int height, int width) const {
  nn::NetworkSpec spec;
  spec.in_channels = nozzle_channel ? 2 : 1;
  spec.height = height;
  spec.width = width;
  spec.history_dim = kHistoryDim;
  for (std::size_t i = 0; i < network.conv_filters.size(); ++i) {
    spec.convs.push_back(nn::ConvSpec{network.conv_filters[i], network.kernel,
                                      network.conv_strides[i], network.kernel / 2});
  }
  spec.hidden = network.hidden;
  return spec;
}

std::vector<ConfigKeyInfo> config_keys() {
  const TrainConfig defaults;
  std::vector<ConfigKeyInfo> out;
  for (const auto& f : fields()) out.push_back({f.key, f.get(defaults), f.help});
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;
  std::set<std::string> seen;
  for (const auto& [key, value] : parse_key_values(text)) {
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError("unknown config key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("duplicate config key '" + key + "'");
    try {
      it->second->set(base, value);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  return parse_config(read_text_file(path), std::move(base));
}

std::string serialize_config(const TrainConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

std::string config_hash(const TrainConfig& config) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : serialize_config(config)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace amrl
