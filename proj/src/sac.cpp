#include "amrl/sac.hpp"

#include <algorithm>
#include <cmath>

#include "amrl/distributions.hpp"

namespace amrl {

template <typename T>
SacState<T> make_sac_state(const nn::NetworkSpec& trunk, const SacConfig& config, Rng& rng) {
  if (!(config.initial_alpha > 0.0)) throw std::invalid_argument("initial alpha must be > 0");
  SacState<T> s;
  s.policy_spec = trunk;
  s.policy_spec.heads = {{kSacPolicyHead, kNumActions}};
  s.critic_spec = trunk;
  s.critic_spec.heads = {{kSacCriticHead, kNumActions}};
  s.policy = nn::init_params<T>(s.policy_spec, rng);
  s.critic1 = nn::init_params<T>(s.critic_spec, rng);
  s.critic2 = nn::init_params<T>(s.critic_spec, rng);
  s.target1 = s.critic1;
  s.target2 = s.critic2;
  s.log_alpha = std::log(config.initial_alpha);
  s.target_entropy = config.target_entropy_scale * std::log(static_cast<double>(kNumActions));
  s.policy_adam = nn::make_adam_state(s.policy);
  s.critic1_adam = nn::make_adam_state(s.critic1);
  s.critic2_adam = nn::make_adam_state(s.critic2);
  return s;
}

template <typename T>
nn::Vector<T> sac_critic_targets(const SacState<T>& state, const TransitionBatch<T>& batch,
                                 double gamma, double alpha) {
  const int n = batch.size();
  const auto pi = nn::forward(state.policy_spec, state.policy, batch.next_obs, {kSacPolicyHead});
  const auto q1 = nn::forward(state.critic_spec, state.target1, batch.next_obs, {kSacCriticHead});
  const auto q2 = nn::forward(state.critic_spec, state.target2, batch.next_obs, {kSacCriticHead});
  const nn::Matrix<T> log_probs = nn::log_softmax<T>(pi.output(kSacPolicyHead));
  const auto& a = q1.output(kSacCriticHead);
  const auto& b = q2.output(kSacCriticHead);
  nn::Vector<T> y(n);
  for (int j = 0; j < n; ++j) {
    double soft_value = 0.0;
    for (int i = 0; i < kNumActions; ++i) {
      const double lp = log_probs(i, j);
      const double q = std::min<double>(a(i, j), b(i, j));
      soft_value += std::exp(lp) * (q - alpha * lp);
    }
    y(j) = static_cast<T>(batch.rewards(j) + gamma * (1.0 - batch.dones(j)) * soft_value);
  }
  return y;
}

template <typename T>
SacCriticLoss<T> sac_critic_loss(const SacState<T>& state, const TransitionBatch<T>& batch,
                                 double gamma, double alpha) {
  const int n = batch.size();
  SacCriticLoss<T> out;
  out.targets = sac_critic_targets(state, batch, gamma, alpha);
  const auto critic_pass = [&](const nn::NetworkParams<T>& params, nn::Gradients<T>& grads) {
    const auto fwd = nn::forward(state.critic_spec, params, batch.obs, {kSacCriticHead});
    const auto& q = fwd.output(kSacCriticHead);
    nn::Matrix<T> d_q = nn::Matrix<T>::Zero(q.rows(), q.cols());
    double loss = 0.0;
    for (int j = 0; j < n; ++j) {
      const double err = static_cast<double>(q(batch.actions[j], j)) - out.targets(j);
      loss += err * err;
      d_q(batch.actions[j], j) = static_cast<T>(2.0 * err / n);
    }
    grads = nn::backward(state.critic_spec, params, fwd, {{kSacCriticHead, d_q}});
    return loss / n;
  };
  out.loss = critic_pass(state.critic1, out.grads1) + critic_pass(state.critic2, out.grads2);
  if (!std::isfinite(out.loss)) {
    throw NonFiniteError("SAC critic loss is not finite: " + describe_batch(batch));
  }
  return out;
}

template <typename T>
SacPolicyLoss<T> sac_policy_loss(const SacState<T>& state, const TransitionBatch<T>& batch,
                                 const nn::Matrix<T>& gumbel_noise, double alpha,
                                 double temperature) {
  const int n = batch.size();
  const auto pi = nn::forward(state.policy_spec, state.policy, batch.obs, {kSacPolicyHead});
  const auto q1f = nn::forward(state.critic_spec, state.critic1, batch.obs, {kSacCriticHead});
  const auto q2f = nn::forward(state.critic_spec, state.critic2, batch.obs, {kSacCriticHead});
  const auto& logits = pi.output(kSacPolicyHead);
  const auto sample = nn::gumbel_softmax_with_noise<T>(logits, gumbel_noise, temperature);
  const auto& q1 = q1f.output(kSacCriticHead);
  const auto& q2 = q2f.output(kSacCriticHead);

  SacPolicyLoss<T> out;
  nn::Matrix<T> d_logits(logits.rows(), logits.cols());
  double loss = 0.0;
  double ent = 0.0;
  double u[kNumActions];
  for (int j = 0; j < n; ++j) {
    double v1 = 0.0, v2 = 0.0, soft_logp = 0.0;
    for (int i = 0; i < kNumActions; ++i) {
      const double w = sample.soft(i, j);
      v1 += w * q1(i, j);
      v2 += w * q2(i, j);
      soft_logp += w * sample.log_prob(i, j);
      ent -= std::exp(static_cast<double>(sample.log_prob(i, j))) * sample.log_prob(i, j);
    }
    const bool first = v1 <= v2;
    loss += -(first ? v1 : v2) + alpha * soft_logp;
    // u = dL/d(a~) for this sample.
    double mean_u = 0.0;
    for (int i = 0; i < kNumActions; ++i) {
      u[i] = -static_cast<double>(first ? q1(i, j) : q2(i, j)) + alpha * sample.log_prob(i, j);
      mean_u += sample.soft(i, j) * u[i];
    }
    for (int i = 0; i < kNumActions; ++i) {
      const double w = sample.soft(i, j);
      const double p = std::exp(static_cast<double>(sample.log_prob(i, j)));
      const double through_sample = w * (u[i] - mean_u) / temperature;
      const double through_logp = alpha * (w - p);
      d_logits(i, j) = static_cast<T>((through_sample + through_logp) / n);
    }
  }
  out.loss = loss / n;
  out.entropy = ent / n;
  if (!std::isfinite(out.loss)) {
    throw NonFiniteError("SAC policy loss is not finite: " + describe_batch(batch));
  }
  out.grads = nn::backward(state.policy_spec, state.policy, pi, {{kSacPolicyHead, d_logits}});
  return out;
}

template <typename T>
SacAlphaLoss sac_alpha_loss(const SacState<T>& state, const TransitionBatch<T>& batch) {
  const auto pi = nn::forward(state.policy_spec, state.policy, batch.obs, {kSacPolicyHead});
  const nn::Matrix<T> h = nn::entropy<T>(pi.output(kSacPolicyHead));
  SacAlphaLoss out;
  out.entropy = static_cast<double>(h.mean());
  const double alpha = state.alpha();
  // E_{a~pi}[-log pi(a|s)] is the policy entropy, taken exactly.
  out.loss = alpha * (out.entropy - state.target_entropy);
  out.grad_log_alpha = out.loss;  // d alpha / d log_alpha = alpha
  return out;
}

template <typename T>
SacMetrics sac_train_step(SacState<T>& state, const TransitionBatch<T>& batch,
                          const SacConfig& config, Rng& rng) {
  SacMetrics m;
  const double alpha = state.alpha();

  auto critic = sac_critic_loss(state, batch, config.gamma, alpha);
  nn::clip_global_norm(critic.grads1, config.max_grad_norm);
  nn::clip_global_norm(critic.grads2, config.max_grad_norm);
  nn::adam_step(state.critic1, critic.grads1, state.critic1_adam, config.lr);
  nn::adam_step(state.critic2, critic.grads2, state.critic2_adam, config.lr);
  m.critic_loss = critic.loss;

  const auto noise = nn::gumbel_noise<T>(kNumActions, batch.size(), rng);
  auto policy = sac_policy_loss(state, batch, noise, alpha, config.gumbel_temperature);
  nn::clip_global_norm(policy.grads, config.max_grad_norm);
  nn::adam_step(state.policy, policy.grads, state.policy_adam, config.lr);
  m.policy_loss = policy.loss;

  const auto temp = sac_alpha_loss(state, batch);
  const double g = std::clamp(temp.grad_log_alpha, -config.max_grad_norm, config.max_grad_norm);
  state.alpha_adam.apply(state.log_alpha, g, config.alpha_lr);
  m.alpha_loss = temp.loss;
  m.entropy = temp.entropy;
  m.alpha = state.alpha();
  if (!std::isfinite(state.log_alpha)) throw NonFiniteError("SAC temperature became non-finite");

  nn::polyak_update(state.target1, state.critic1, config.tau);
  nn::polyak_update(state.target2, state.critic2, config.tau);
  return m;
}

template <typename T>
SacAgent<T>::SacAgent(const nn::NetworkSpec& trunk, SacConfig config, Rng& init_rng)
    : config_(config),
      state_(make_sac_state<T>(trunk, config, init_rng)),
      buffer_(config.buffer_capacity) {}

template <typename T>
int SacAgent<T>::act(const Observation& obs, Rng& rng) const {
  const Observation* one[] = {&obs};
  const auto batch = nn::make_batch<T>(std::span<const Observation* const>(one));
  const auto pi = nn::forward(state_.policy_spec, state_.policy, batch, {kSacPolicyHead});
  const nn::Matrix<T> probs = nn::softmax<T>(pi.output(kSacPolicyHead));
  return nn::sample_categorical(probs.col(0), rng);
}

template <typename T>
SacMetrics SacAgent<T>::train_step(Rng& rng) {
  const auto batch = make_transition_batch<T>(
      buffer_.sample_uniform(static_cast<std::size_t>(config_.batch_size), rng));
  return sac_train_step(state_, batch, config_, rng);
}

template <typename T>
void SacAgent<T>::save(nn::Checkpoint& ckpt) const {
  ckpt.put("policy/", state_.policy);
  ckpt.put("critic1/", state_.critic1);
  ckpt.put("critic2/", state_.critic2);
  ckpt.put("target1/", state_.target1);
  ckpt.put("target2/", state_.target2);
  ckpt.put_scalar("log_alpha", state_.log_alpha);
}

template <typename T>
void SacAgent<T>::load(const nn::Checkpoint& ckpt) {
  ckpt.get("policy/", state_.policy);
  ckpt.get("critic1/", state_.critic1);
  ckpt.get("critic2/", state_.critic2);
  ckpt.get("target1/", state_.target1);
  ckpt.get("target2/", state_.target2);
  state_.log_alpha = ckpt.get_scalar("log_alpha");
}

#define AMRL_INSTANTIATE(T)                                                                      \
  template SacState<T> make_sac_state<T>(const nn::NetworkSpec&, const SacConfig&, Rng&);        \
  template nn::Vector<T> sac_critic_targets(const SacState<T>&, const TransitionBatch<T>&,       \
                                            double, double);                                     \
  template SacCriticLoss<T> sac_critic_loss(const SacState<T>&, const TransitionBatch<T>&,       \
                                            double, double);                                     \
  template SacPolicyLoss<T> sac_policy_loss(const SacState<T>&, const TransitionBatch<T>&,       \
                                            const nn::Matrix<T>&, double, double);               \
  template SacAlphaLoss sac_alpha_loss(const SacState<T>&, const TransitionBatch<T>&);           \
  template SacMetrics sac_train_step(SacState<T>&, const TransitionBatch<T>&, const SacConfig&,  \
                                     Rng&);                                                      \
  template class SacAgent<T>;

AMRL_INSTANTIATE(float)
AMRL_INSTANTIATE(double)
#undef AMRL_INSTANTIATE

}  // namespace amrl
