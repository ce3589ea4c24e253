#pragma once

#include <cmath>

#include "amrl/agent_common.hpp"
#include "amrl/checkpoint.hpp"
#include "amrl/optim.hpp"

namespace amrl {

struct SacConfig {
  double gamma = 0.99;
  std::size_t buffer_capacity = 100000;
  int batch_size = 64;
  double tau = 0.005;
  int learning_starts = 1000;
  int train_every = 1;
  double lr = 3e-4;
  double alpha_lr = 3e-4;
  double initial_alpha = 1.0;
  double target_entropy_scale = 0.98;  // times ln(8)
  double gumbel_temperature = 1.0;
  double max_grad_norm = 0.5;
};

// Discrete soft actor-critic: a categorical policy, twin Q critics over the
// eight actions, Polyak-averaged target critics and a learned temperature.
template <typename T>
struct SacState {
  nn::NetworkSpec policy_spec;
  nn::NetworkSpec critic_spec;
  nn::NetworkParams<T> policy;
  nn::NetworkParams<T> critic1;
  nn::NetworkParams<T> critic2;
  nn::NetworkParams<T> target1;
  nn::NetworkParams<T> target2;
  double log_alpha = 0.0;
  double target_entropy = 0.0;

  nn::AdamState<T> policy_adam;
  nn::AdamState<T> critic1_adam;
  nn::AdamState<T> critic2_adam;
  nn::ScalarAdam alpha_adam;

  double alpha() const { return std::exp(log_alpha); }
};

template <typename T>
SacState<T> make_sac_state(const nn::NetworkSpec& trunk, const SacConfig& config, Rng& rng);

template <typename T>
struct SacCriticLoss {
  double loss = 0.0;  // MSE(Q1, y) + MSE(Q2, y)
  nn::Vector<T> targets;
  nn::Gradients<T> grads1;
  nn::Gradients<T> grads2;
};

// y = r + gamma (1 - d) sum_a' pi(a'|s') [min_i Qbar_i(s', a') - alpha log pi(a'|s')]
// with the expectation over the eight actions taken exactly.
template <typename T>
nn::Vector<T> sac_critic_targets(const SacState<T>& state, const TransitionBatch<T>& batch,
                                 double gamma, double alpha);

template <typename T>
SacCriticLoss<T> sac_critic_loss(const SacState<T>& state, const TransitionBatch<T>& batch,
                                 double gamma, double alpha);

template <typename T>
struct SacPolicyLoss {
  double loss = 0.0;
  double entropy = 0.0;  // mean entropy of pi on the batch
  nn::Gradients<T> grads;
};

// -mean[min_i Q_i(s, a~) - alpha log pi(a~|s)] with a~ the Gumbel-softmax
// relaxed action. Q_i(s, a~) = a~ . Q_i(s, .) and log pi(a~|s) = a~ . log pi(.|s).
template <typename T>
SacPolicyLoss<T> sac_policy_loss(const SacState<T>& state, const TransitionBatch<T>& batch,
                                 const nn::Matrix<T>& gumbel_noise, double alpha,
                                 double temperature);

struct SacAlphaLoss {
  double loss = 0.0;  // alpha * mean(H(pi) - H_target)
  double grad_log_alpha = 0.0;
  double entropy = 0.0;
};

template <typename T>
SacAlphaLoss sac_alpha_loss(const SacState<T>& state, const TransitionBatch<T>& batch);

struct SacMetrics {
  double critic_loss = 0.0;
  double policy_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;
};

// One critic step (both critics), one policy step, one temperature step,
// then Polyak averaging of both targets. Every gradient is clipped.
template <typename T>
SacMetrics sac_train_step(SacState<T>& state, const TransitionBatch<T>& batch,
                          const SacConfig& config, Rng& rng);

inline const std::string kSacPolicyHead = "policy";
inline const std::string kSacCriticHead = "q";

template <typename T>
class SacAgent {
 public:
  SacAgent(const nn::NetworkSpec& trunk, SacConfig config, Rng& init_rng);

  // Sample from the categorical policy.
  int act(const Observation& obs, Rng& rng) const;
  int greedy(const Observation& obs) const {
    return greedy_action(state_.policy_spec, state_.policy, kSacPolicyHead, obs);
  }

  void remember(const Transition& t) { buffer_.push(t); }
  bool ready() const {
    return buffer_.size() >= static_cast<std::size_t>(std::max(config_.learning_starts, config_.batch_size));
  }
  SacMetrics train_step(Rng& rng);

  const SacState<T>& state() const { return state_; }
  SacState<T>& state() { return state_; }
  const SacConfig& config() const { return config_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  void save(nn::Checkpoint& ckpt) const;
  void load(const nn::Checkpoint& ckpt);

 private:
  SacConfig config_;
  SacState<T> state_;
  ReplayBuffer buffer_;
};

}  // namespace amrl
