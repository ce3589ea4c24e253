#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "amrl/dqn.hpp"
#include "amrl/geometry.hpp"
#include "amrl/grid_env.hpp"
#include "amrl/network.hpp"
#include "amrl/ppo.hpp"
#include "amrl/sac.hpp"

namespace amrl {

enum class Algorithm { Dqn, Ppo, Sac };

std::string to_string(Algorithm a);
std::string to_string(RewardMode m);
Algorithm parse_algorithm(std::string_view text);
RewardMode parse_reward_mode(std::string_view text);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NetworkConfig {
  std::vector<int> conv_filters = {16, 32, 32};
  std::vector<int> conv_strides = {2, 2, 1};
  int kernel = 3;
  int hidden = 128;
};

// Everything that determines a seeded run.
struct TrainConfig {
  Algorithm algorithm = Algorithm::Dqn;
  RewardMode reward_mode = RewardMode::Dense;
  std::uint64_t seed = 0;
  int horizon = 400;
  bool nozzle_channel = false;

  // Empty sections_dir means the generator below builds the dataset.
  std::string sections_dir;
  int dataset_count = 32;
  std::uint64_t dataset_seed = 1;
  GeneratorParams generator;
  double holdout_fraction = 0.0;

  long total_env_steps = 200000;
  long total_episodes = 0;  // PPO only; 0 disables the episode bound
  long eval_interval_steps = 5000;
  int eval_interval_iterations = 10;
  int eval_episodes = 16;
  bool log_wall_clock = false;

  NetworkConfig network;
  DqnConfig dqn;
  PpoConfig ppo;
  SacConfig sac;

  void validate() const;
  EnvConfig env_config() const;
  // Trunk for a dataset with the given section size; heads are left empty.
  nn::NetworkSpec trunk_spec(int height, int width) const;
};

struct ConfigKeyInfo {
  std::string key;
  std::string default_value;
  std::string help;
};

// Every accepted key with its default and a one-line description.
std::vector<ConfigKeyInfo> config_keys();

// Flat "key = value" lines; '#' starts a comment. Unknown keys, duplicate
// keys and malformed values raise ConfigError naming the line.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

// Every key, one per line, in config_keys() order. parse_config of the
// result reproduces the config exactly.
std::string serialize_config(const TrainConfig& config);

// FNV-1a 64 of serialize_config, as 16 hex digits.
std::string config_hash(const TrainConfig& config);

// Generic key-value text used by configs and run manifests.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);
std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& entries);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Shortest decimal that round-trips the double.
std::string format_double(double v);

}  // namespace amrl
