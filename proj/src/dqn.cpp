#include "amrl/dqn.hpp"

#include <algorithm>
#include <cmath>

#include "amrl/distributions.hpp"

namespace amrl {

double linear_epsilon(const DqnConfig& config, long step, long total_steps) {
  const double span = config.epsilon_decay_fraction * static_cast<double>(total_steps);
  if (span <= 0.0) return config.epsilon_end;
  const double frac = std::min(1.0, static_cast<double>(step) / span);
  return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start);
}

template <typename T>
int dqn_act(const nn::NetworkSpec& spec, const nn::NetworkParams<T>& params,
            const Observation& obs, double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon must be in [0, 1]");
  if (uniform01(rng) < epsilon) return uniform_int(rng, 0, kNumActions - 1);
  return greedy_action(spec, params, kQHead, obs);
}

template <typename T>
nn::Vector<T> double_dqn_targets(const nn::Matrix<T>& next_q_online,
                                 const nn::Matrix<T>& next_q_target,
                                 const nn::Vector<T>& rewards, const nn::Vector<T>& dones,
                                 double gamma) {
  const auto n = rewards.size();
  if (next_q_online.cols() != n || next_q_target.cols() != n || dones.size() != n ||
      next_q_online.rows() != next_q_target.rows()) {
    throw std::invalid_argument("double_dqn_targets: shape mismatch");
  }
  nn::Vector<T> y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int best = nn::argmax(next_q_online.col(i));
    y(i) = static_cast<T>(rewards(i) + gamma * (1.0 - dones(i)) * next_q_target(best, i));
  }
  return y;
}

template <typename T>
nn::Vector<T> dqn_td_targets(const nn::NetworkSpec& spec, const nn::NetworkParams<T>& online,
                             const nn::NetworkParams<T>& target, const TransitionBatch<T>& batch,
                             double gamma) {
  const auto q_online = nn::forward(spec, online, batch.next_obs, {kQHead});
  const auto q_target = nn::forward(spec, target, batch.next_obs, {kQHead});
  return double_dqn_targets<T>(q_online.output(kQHead), q_target.output(kQHead), batch.rewards,
                               batch.dones, gamma);
}

template <typename T>
DqnLoss<T> dqn_loss(const nn::NetworkSpec& spec, const nn::NetworkParams<T>& params,
                    const TransitionBatch<T>& batch, const nn::Vector<T>& targets) {
  const int n = batch.size();
  const auto fwd = nn::forward(spec, params, batch.obs, {kQHead});
  const auto& q = fwd.output(kQHead);
  nn::Matrix<T> d_q = nn::Matrix<T>::Zero(q.rows(), q.cols());
  DqnLoss<T> out;
  double loss = 0.0;
  double q_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double pred = q(batch.actions[i], i);
    const double err = pred - static_cast<double>(targets(i));
    loss += err * err;
    q_sum += pred;
    d_q(batch.actions[i], i) = static_cast<T>(2.0 * err / n);
  }
  out.loss = loss / n;
  out.mean_q = q_sum / n;
  if (!std::isfinite(out.loss)) {
    throw NonFiniteError("DQN loss is not finite: " + describe_batch(batch));
  }
  out.grads = nn::backward(spec, params, fwd, {{kQHead, d_q}});
  return out;
}

template <typename T>
DqnAgent<T>::DqnAgent(nn::NetworkSpec spec, DqnConfig config, Rng& init_rng)
    : spec_(std::move(spec)),
      config_(config),
      online_(nn::init_params<T>(spec_, init_rng)),
      target_(online_),
      adam_(nn::make_adam_state(online_)),
      buffer_(config.buffer_capacity) {
  spec_.head(kQHead);
}

template <typename T>
DqnMetrics DqnAgent<T>::train_step(Rng& rng) {
  const auto batch = make_transition_batch<T>(
      buffer_.sample_corrected(static_cast<std::size_t>(config_.batch_size), rng));
  const auto targets = dqn_td_targets(spec_, online_, target_, batch, config_.gamma);
  auto result = dqn_loss(spec_, online_, batch, targets);
  DqnMetrics m;
  m.loss = result.loss;
  m.mean_q = result.mean_q;
  m.grad_norm = nn::clip_global_norm(result.grads, config_.max_grad_norm);
  if (!std::isfinite(m.grad_norm)) {
    throw NonFiniteError("DQN gradient norm is not finite: " + describe_batch(batch));
  }
  nn::adam_step(online_, result.grads, adam_, config_.lr);
  nn::polyak_update(target_, online_, config_.tau);
  ++train_steps_;
  return m;
}

template <typename T>
void DqnAgent<T>::save(nn::Checkpoint& ckpt) const {
  ckpt.put("online/", online_);
  ckpt.put("target/", target_);
}

template <typename T>
void DqnAgent<T>::load(const nn::Checkpoint& ckpt) {
  ckpt.get("online/", online_);
  // Evaluation checkpoints may carry only the online network.
  if (ckpt.contains("target/" + nn::tensors(target_).front().name)) {
    ckpt.get("target/", target_);
  } else {
    target_ = online_;
  }
}

#define AMRL_INSTANTIATE(T)                                                                 \
  template int dqn_act(const nn::NetworkSpec&, const nn::NetworkParams<T>&,                 \
                       const Observation&, double, Rng&);                                   \
  template nn::Vector<T> double_dqn_targets(const nn::Matrix<T>&, const nn::Matrix<T>&,     \
                                            const nn::Vector<T>&, const nn::Vector<T>&,     \
                                            double);                                        \
  template nn::Vector<T> dqn_td_targets(const nn::NetworkSpec&, const nn::NetworkParams<T>&, \
                                        const nn::NetworkParams<T>&,                        \
                                        const TransitionBatch<T>&, double);                 \
  template DqnLoss<T> dqn_loss(const nn::NetworkSpec&, const nn::NetworkParams<T>&,         \
                               const TransitionBatch<T>&, const nn::Vector<T>&);            \
  template class DqnAgent<T>;

AMRL_INSTANTIATE(float)
AMRL_INSTANTIATE(double)
#undef AMRL_INSTANTIATE

}  // namespace amrl
