#include "amrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "amrl/distributions.hpp"

namespace amrl {

GaeResult ppo_gae(std::span<const double> rewards, std::span<const double> values,
                  std::span<const std::uint8_t> dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) {
    throw std::invalid_argument("ppo_gae: values needs one more entry than rewards");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double live = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * live * values[k + 1] - values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + values[k];
  }
  return out;
}

EnvStreams::EnvStreams(const SectionDataset& dataset, EnvConfig config, int count, Rng& rng)
    : dataset_(&dataset) {
  if (count < 1) throw std::invalid_argument("need at least one environment stream");
  for (int i = 0; i < count; ++i) {
    envs_.emplace_back(config);
    envs_.back().reset(dataset_->sample(rng), rng);
    observations_.push_back(envs_.back().observe());
  }
  running_return_.assign(count, 0.0);
}

StepOutcome EnvStreams::step(int i, int action, Rng& rng) {
  GridEnv& env = envs_[i];
  const StepOutcome out = env.step(action);
  running_return_[i] += out.reward;
  ++total_steps_;
  if (out.done) {
    finished_returns_.push_back(running_return_[i]);
    finished_lengths_.push_back(env.state().step_count);
    running_return_[i] = 0.0;
    ++total_episodes_;
    env.reset(dataset_->sample(rng), rng);
  }
  observations_[i] = env.observe();
  return out;
}

std::vector<double> EnvStreams::take_episode_returns() {
  return std::exchange(finished_returns_, {});
}

std::vector<int> EnvStreams::take_episode_lengths() {
  return std::exchange(finished_lengths_, {});
}

void compute_advantages(RolloutBatch& batch, double gamma, double lambda, bool normalize) {
  const int n = batch.num_envs;
  const int steps = batch.steps;
  const std::size_t total = static_cast<std::size_t>(n) * steps;
  if (batch.rewards.size() != total || batch.values.size() != total ||
      batch.dones.size() != total || batch.bootstrap_values.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("compute_advantages: rollout arrays do not match " +
                                std::to_string(n) + " streams x " + std::to_string(steps) +
                                " steps");
  }
  batch.advantages.assign(total, 0.0);
  batch.returns.assign(total, 0.0);
  std::vector<double> r(steps), v(steps + 1);
  std::vector<std::uint8_t> d(steps);
  for (int e = 0; e < n; ++e) {
    for (int t = 0; t < steps; ++t) {
      const std::size_t k = static_cast<std::size_t>(t) * n + e;
      r[t] = batch.rewards[k];
      v[t] = batch.values[k];
      d[t] = batch.dones[k];
    }
    v[steps] = batch.bootstrap_values[e];
    const auto gae = ppo_gae(r, v, d, gamma, lambda);
    for (int t = 0; t < steps; ++t) {
      const std::size_t k = static_cast<std::size_t>(t) * n + e;
      batch.advantages[k] = gae.advantages[t];
      batch.returns[k] = gae.returns[t];
    }
  }
  if (normalize && total > 1) {
    const double count = static_cast<double>(total);
    const double mean = std::accumulate(batch.advantages.begin(), batch.advantages.end(), 0.0) / count;
    double var = 0.0;
    for (double a : batch.advantages) var += (a - mean) * (a - mean);
    const double std = std::sqrt(var / count);
    for (double& a : batch.advantages) a = (a - mean) / (std + 1e-8);
  }
}

template <typename T>
PpoNets<T> make_ppo_nets(const nn::NetworkSpec& trunk, Rng& rng) {
  PpoNets<T> nets;
  nets.policy_spec = trunk;
  nets.policy_spec.heads = {{kPolicyHead, kNumActions}};
  nets.value_spec = trunk;
  nets.value_spec.heads = {{kValueHead, 1}};
  nets.policy = nn::init_params<T>(nets.policy_spec, rng);
  nets.value = nn::init_params<T>(nets.value_spec, rng);
  return nets;
}

template <typename T>
RolloutBatch ppo_collect(const PpoNets<T>& nets, EnvStreams& envs, int steps_per_env, Rng& rng) {
  if (steps_per_env < 1) throw std::invalid_argument("steps_per_env must be >= 1");
  RolloutBatch batch;
  const int n = envs.size();
  batch.num_envs = n;
  batch.steps = steps_per_env;
  const std::size_t total = static_cast<std::size_t>(n) * steps_per_env;
  batch.obs.reserve(total);
  batch.actions.reserve(total);
  for (int t = 0; t < steps_per_env; ++t) {
    const auto obs = nn::make_batch<T>(std::span<const Observation>(envs.observations()));
    const auto pi = nn::forward(nets.policy_spec, nets.policy, obs, {kPolicyHead});
    const auto v = nn::forward(nets.value_spec, nets.value, obs, {kValueHead});
    const nn::Matrix<T> log_probs = nn::log_softmax<T>(pi.output(kPolicyHead));
    const auto& values = v.output(kValueHead);
    for (int e = 0; e < n; ++e) {
      const int action = nn::sample_categorical(log_probs.col(e).array().exp().matrix(), rng);
      batch.obs.push_back(envs.observation(e));
      batch.actions.push_back(action);
      batch.log_probs_old.push_back(static_cast<double>(log_probs(action, e)));
      batch.values.push_back(static_cast<double>(values(0, e)));
      const StepOutcome out = envs.step(e, action, rng);
      batch.rewards.push_back(out.reward);
      batch.dones.push_back(out.done ? 1 : 0);
    }
  }
  const auto obs = nn::make_batch<T>(std::span<const Observation>(envs.observations()));
  const auto v = nn::forward(nets.value_spec, nets.value, obs, {kValueHead});
  for (int e = 0; e < n; ++e) batch.bootstrap_values.push_back(static_cast<double>(v.output(kValueHead)(0, e)));
  return batch;
}

template <typename T>
PpoLoss<T> ppo_loss(const PpoNets<T>& nets, const RolloutBatch& batch,
                    std::span<const std::size_t> indices, double clip, double value_coef,
                    double entropy_coef) {
  if (indices.empty()) throw std::invalid_argument("ppo_loss: empty minibatch");
  if (batch.advantages.size() != batch.size()) {
    throw std::invalid_argument("ppo_loss: advantages have not been computed");
  }
  const int n = static_cast<int>(indices.size());
  std::vector<const Observation*> obs;
  obs.reserve(n);
  for (auto i : indices) obs.push_back(&batch.obs[i]);
  const auto input = nn::make_batch<T>(std::span<const Observation* const>(obs));

  const auto pi = nn::forward(nets.policy_spec, nets.policy, input, {kPolicyHead});
  const auto vf = nn::forward(nets.value_spec, nets.value, input, {kValueHead});
  const auto& logits = pi.output(kPolicyHead);
  const nn::Matrix<T> log_probs = nn::log_softmax<T>(logits);
  const nn::Matrix<T> probs = log_probs.array().exp().matrix();
  const auto& values = vf.output(kValueHead);

  nn::Matrix<T> d_logits = nn::Matrix<T>::Zero(logits.rows(), logits.cols());
  nn::Matrix<T> d_values(1, n);
  PpoLoss<T> out;
  double surrogate = 0.0;
  double value_err = 0.0;
  double ent_sum = 0.0;
  int clipped = 0;
  double ratio_sum = 0.0;
  for (int j = 0; j < n; ++j) {
    const std::size_t k = indices[j];
    const int a = batch.actions[k];
    const double adv = batch.advantages[k];
    const double ratio = std::exp(static_cast<double>(log_probs(a, j)) - batch.log_probs_old[k]);
    const double clipped_ratio = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    const double unclipped_term = ratio * adv;
    const double clipped_term = clipped_ratio * adv;
    ratio_sum += ratio;
    if (ratio != clipped_ratio) ++clipped;
    // The clipped branch is constant in the parameters, so only the
    // unclipped branch carries gradient.
    double d_logp = 0.0;
    if (unclipped_term <= clipped_term) {
      surrogate += unclipped_term;
      d_logp = -ratio * adv / n;
    } else {
      surrogate += clipped_term;
    }

    double h = 0.0;
    for (int i = 0; i < kNumActions; ++i) h -= static_cast<double>(probs(i, j) * log_probs(i, j));
    ent_sum += h;
    for (int i = 0; i < kNumActions; ++i) {
      const double p = probs(i, j);
      const double lp = log_probs(i, j);
      double g = d_logp * ((i == a ? 1.0 : 0.0) - p);
      g += entropy_coef / n * p * (lp + h);
      d_logits(i, j) = static_cast<T>(g);
    }

    const double err = static_cast<double>(values(0, j)) - batch.returns[k];
    value_err += err * err;
    d_values(0, j) = static_cast<T>(2.0 * value_coef * err / n);
  }
  out.policy_loss = -surrogate / n;
  out.value_loss = value_err / n;
  out.entropy = ent_sum / n;
  out.loss = out.policy_loss + value_coef * out.value_loss - entropy_coef * out.entropy;
  out.clip_fraction = static_cast<double>(clipped) / n;
  out.mean_ratio = ratio_sum / n;
  if (!std::isfinite(out.loss)) {
    throw NonFiniteError("PPO loss is not finite (policy " + std::to_string(out.policy_loss) +
                         ", value " + std::to_string(out.value_loss) + ", entropy " +
                         std::to_string(out.entropy) + ")");
  }
  out.policy_grads = nn::backward(nets.policy_spec, nets.policy, pi, {{kPolicyHead, d_logits}});
  out.value_grads = nn::backward(nets.value_spec, nets.value, vf, {{kValueHead, d_values}});
  return out;
}

template <typename T>
PpoAgent<T>::PpoAgent(const nn::NetworkSpec& trunk, PpoConfig config, Rng& init_rng)
    : config_(config),
      nets_(make_ppo_nets<T>(trunk, init_rng)),
      policy_adam_(nn::make_adam_state(nets_.policy)),
      value_adam_(nn::make_adam_state(nets_.value)) {}

template <typename T>
PpoMetrics PpoAgent<T>::update(const RolloutBatch& batch, Rng& rng) {
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t mb = static_cast<std::size_t>(std::max(1, config_.minibatch_size));
  PpoMetrics m;
  int count = 0;
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t len = std::min(mb, order.size() - start);
      auto loss = ppo_loss(nets_, batch, std::span<const std::size_t>(order.data() + start, len),
                           config_.clip, config_.value_coef, config_.entropy_coef);
      nn::clip_global_norm(loss.policy_grads, config_.max_grad_norm);
      nn::clip_global_norm(loss.value_grads, config_.max_grad_norm);
      nn::adam_step(nets_.policy, loss.policy_grads, policy_adam_, config_.lr);
      nn::adam_step(nets_.value, loss.value_grads, value_adam_, config_.lr);
      m.loss += loss.loss;
      m.policy_loss += loss.policy_loss;
      m.value_loss += loss.value_loss;
      m.entropy += loss.entropy;
      m.clip_fraction += loss.clip_fraction;
      ++count;
    }
  }
  if (count > 0) {
    m.loss /= count;
    m.policy_loss /= count;
    m.value_loss /= count;
    m.entropy /= count;
    m.clip_fraction /= count;
  }
  if (!nn::all_finite(nets_.policy) || !nn::all_finite(nets_.value)) {
    throw NonFiniteError("PPO parameters became non-finite after update");
  }
  // Ratio of the updated policy to the collection policy on the whole batch.
  double ratio_sum = 0.0;
  for (std::size_t start = 0; start < batch.size(); start += mb) {
    const std::size_t len = std::min(mb, batch.size() - start);
    std::vector<const Observation*> obs;
    for (std::size_t k = start; k < start + len; ++k) obs.push_back(&batch.obs[k]);
    const auto input = nn::make_batch<T>(std::span<const Observation* const>(obs));
    const auto pi = nn::forward(nets_.policy_spec, nets_.policy, input, {kPolicyHead});
    const nn::Matrix<T> lp = nn::log_softmax<T>(pi.output(kPolicyHead));
    for (std::size_t j = 0; j < len; ++j) {
      ratio_sum += std::exp(static_cast<double>(lp(batch.actions[start + j], j)) -
                            batch.log_probs_old[start + j]);
    }
  }
  m.mean_ratio = ratio_sum / static_cast<double>(batch.size());
  ++updates_;
  return m;
}

template <typename T>
void PpoAgent<T>::save(nn::Checkpoint& ckpt) const {
  ckpt.put("policy/", nets_.policy);
  ckpt.put("value/", nets_.value);
}

template <typename T>
void PpoAgent<T>::load(const nn::Checkpoint& ckpt) {
  ckpt.get("policy/", nets_.policy);
  ckpt.get("value/", nets_.value);
}

#define AMRL_INSTANTIATE(T)                                                                  \
  template PpoNets<T> make_ppo_nets<T>(const nn::NetworkSpec&, Rng&);                        \
  template RolloutBatch ppo_collect(const PpoNets<T>&, EnvStreams&, int, Rng&);              \
  template PpoLoss<T> ppo_loss(const PpoNets<T>&, const RolloutBatch&,                       \
                               std::span<const std::size_t>, double, double, double);        \
  template class PpoAgent<T>;

AMRL_INSTANTIATE(float)
AMRL_INSTANTIATE(double)
#undef AMRL_INSTANTIATE

}  // namespace amrl
