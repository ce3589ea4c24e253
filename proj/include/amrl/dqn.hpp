#pragma once

#include "amrl/agent_common.hpp"
#include "amrl/checkpoint.hpp"
#include "amrl/optim.hpp"

namespace amrl {

struct DqnConfig {
  double gamma = 0.99;
  std::size_t buffer_capacity = 100000;
  int batch_size = 64;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.2;  // of total training steps
  double tau = 0.005;
  int learning_starts = 1000;
  int train_every = 1;  // env steps per gradient step
  double lr = 3e-4;
  double max_grad_norm = 0.5;
};

// Linear decay from epsilon_start to epsilon_end over the first
// epsilon_decay_fraction of total_steps, constant afterwards.
double linear_epsilon(const DqnConfig& config, long step, long total_steps);

inline const std::string kQHead = "q";

// With probability epsilon a uniform action, otherwise argmax Q.
template <typename T>
int dqn_act(const nn::NetworkSpec& spec, const nn::NetworkParams<T>& params,
            const Observation& obs, double epsilon, Rng& rng);

// y = r + gamma * (1 - d) * Q_target(s', argmax_a Q_online(s', a)).
// Q matrices are actions x batch.
template <typename T>
nn::Vector<T> double_dqn_targets(const nn::Matrix<T>& next_q_online,
                                 const nn::Matrix<T>& next_q_target,
                                 const nn::Vector<T>& rewards, const nn::Vector<T>& dones,
                                 double gamma);

template <typename T>
nn::Vector<T> dqn_td_targets(const nn::NetworkSpec& spec, const nn::NetworkParams<T>& online,
                             const nn::NetworkParams<T>& target, const TransitionBatch<T>& batch,
                             double gamma);

template <typename T>
struct DqnLoss {
  double loss = 0.0;
  double mean_q = 0.0;
  nn::Gradients<T> grads;
};

// Mean squared error between Q_online(s, a) and fixed targets.
template <typename T>
DqnLoss<T> dqn_loss(const nn::NetworkSpec& spec, const nn::NetworkParams<T>& params,
                    const TransitionBatch<T>& batch, const nn::Vector<T>& targets);

struct DqnMetrics {
  double loss = 0.0;
  double mean_q = 0.0;
  double grad_norm = 0.0;
};

template <typename T>
class DqnAgent {
 public:
  DqnAgent(nn::NetworkSpec spec, DqnConfig config, Rng& init_rng);

  int act(const Observation& obs, double epsilon, Rng& rng) const {
    return dqn_act(spec_, online_, obs, epsilon, rng);
  }
  int greedy(const Observation& obs) const { return greedy_action(spec_, online_, kQHead, obs); }

  void remember(const Transition& t) { buffer_.push(t); }
  bool ready() const {
    return buffer_.size() >= static_cast<std::size_t>(std::max(config_.learning_starts, config_.batch_size));
  }

  // Corrected-replay batch, MSE to double-DQN targets, clip, Adam, Polyak.
  DqnMetrics train_step(Rng& rng);

  const nn::NetworkSpec& spec() const { return spec_; }
  const DqnConfig& config() const { return config_; }
  const nn::NetworkParams<T>& online() const { return online_; }
  const nn::NetworkParams<T>& target() const { return target_; }
  nn::NetworkParams<T>& online() { return online_; }
  nn::NetworkParams<T>& target() { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  long train_steps() const { return train_steps_; }

  void save(nn::Checkpoint& ckpt) const;
  void load(const nn::Checkpoint& ckpt);

 private:
  nn::NetworkSpec spec_;
  DqnConfig config_;
  nn::NetworkParams<T> online_;
  nn::NetworkParams<T> target_;
  nn::AdamState<T> adam_;
  ReplayBuffer buffer_;
  long train_steps_ = 0;
};

}  // namespace amrl
