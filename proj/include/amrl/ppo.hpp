#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "amrl/agent_common.hpp"
#include "amrl/checkpoint.hpp"
#include "amrl/geometry.hpp"
#include "amrl/optim.hpp"

namespace amrl {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int num_envs = 8;
  int steps_per_env = 256;
  int epochs = 4;
  int minibatch_size = 512;
  bool normalize_advantages = true;
  double lr = 3e-4;
  double max_grad_norm = 0.5;
};

inline const std::string kPolicyHead = "policy";
inline const std::string kValueHead = "value";

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation over one stream. values holds one entry
// per step plus the bootstrap value of the state after the last step.
//   delta_t = r_t + gamma (1 - d_t) V_{t+1} - V_t
//   A_t     = delta_t + gamma lambda (1 - d_t) A_{t+1}
GaeResult ppo_gae(std::span<const double> rewards, std::span<const double> values,
                  std::span<const std::uint8_t> dones, double gamma, double lambda);

// n independent environments that reset onto a freshly sampled section
// whenever an episode ends.
class EnvStreams {
 public:
  EnvStreams(const SectionDataset& dataset, EnvConfig config, int count, Rng& rng);

  int size() const { return static_cast<int>(envs_.size()); }
  const GridEnv& env(int i) const { return envs_[i]; }
  const Observation& observation(int i) const { return observations_[i]; }
  const std::vector<Observation>& observations() const { return observations_; }

  StepOutcome step(int i, int action, Rng& rng);

  // Returns and lengths of episodes finished since the last call.
  std::vector<double> take_episode_returns();
  std::vector<int> take_episode_lengths();
  long total_steps() const { return total_steps_; }
  long total_episodes() const { return total_episodes_; }

 private:
  const SectionDataset* dataset_;
  std::vector<GridEnv> envs_;
  std::vector<Observation> observations_;
  std::vector<double> running_return_;
  std::vector<double> finished_returns_;
  std::vector<int> finished_lengths_;
  long total_steps_ = 0;
  long total_episodes_ = 0;
};

// Flattened on-policy rollout; entry t * num_envs + e is step t of stream e.
struct RolloutBatch {
  int num_envs = 0;
  int steps = 0;
  std::vector<Observation> obs;
  std::vector<int> actions;
  std::vector<double> log_probs_old;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<double> bootstrap_values;  // per stream
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return actions.size(); }
};

// Fills advantages/returns with per-stream GAE; normalizes advantages to
// zero mean and unit variance when requested.
void compute_advantages(RolloutBatch& batch, double gamma, double lambda, bool normalize);

template <typename T>
struct PpoNets {
  nn::NetworkSpec policy_spec;
  nn::NetworkSpec value_spec;
  nn::NetworkParams<T> policy;
  nn::NetworkParams<T> value;
};

template <typename T>
PpoNets<T> make_ppo_nets(const nn::NetworkSpec& trunk, Rng& rng);

template <typename T>
RolloutBatch ppo_collect(const PpoNets<T>& nets, EnvStreams& envs, int steps_per_env, Rng& rng);

template <typename T>
struct PpoLoss {
  double loss = 0.0;
  double policy_loss = 0.0;  // -mean(min(r A, clip(r) A))
  double value_loss = 0.0;   // mean((V - R)^2)
  double entropy = 0.0;      // mean policy entropy
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  nn::Gradients<T> policy_grads;
  nn::Gradients<T> value_grads;
};

// L = policy_loss + value_coef * value_loss - entropy_coef * entropy over
// the selected samples.
template <typename T>
PpoLoss<T> ppo_loss(const PpoNets<T>& nets, const RolloutBatch& batch,
                    std::span<const std::size_t> indices, double clip, double value_coef,
                    double entropy_coef);

struct PpoMetrics {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;  // on the whole batch after the update
};

template <typename T>
class PpoAgent {
 public:
  PpoAgent(const nn::NetworkSpec& trunk, PpoConfig config, Rng& init_rng);

  RolloutBatch collect(EnvStreams& envs, Rng& rng) const {
    return ppo_collect(nets_, envs, config_.steps_per_env, rng);
  }
  // Epochs of shuffled minibatch Adam on ppo_loss; batch must already carry
  // advantages.
  PpoMetrics update(const RolloutBatch& batch, Rng& rng);

  int greedy(const Observation& obs) const {
    return greedy_action(nets_.policy_spec, nets_.policy, kPolicyHead, obs);
  }

  const PpoNets<T>& nets() const { return nets_; }
  PpoNets<T>& nets() { return nets_; }
  const PpoConfig& config() const { return config_; }
  long updates() const { return updates_; }

  void save(nn::Checkpoint& ckpt) const;
  void load(const nn::Checkpoint& ckpt);

 private:
  PpoConfig config_;
  PpoNets<T> nets_;
  nn::AdamState<T> policy_adam_;
  nn::AdamState<T> value_adam_;
  long updates_ = 0;
};

}  // namespace amrl
