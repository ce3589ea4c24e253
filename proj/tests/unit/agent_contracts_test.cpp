#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "amrl/distributions.hpp"
#include "amrl/dqn.hpp"
#include "amrl/ppo.hpp"
#include "amrl/sac.hpp"
#include "test_support.hpp"

namespace amrl {
namespace {

Transition make_transition(Rng& rng, int action, double reward, bool done) {
  return Transition{testing::random_observation(rng, 1, 6, 6), action, reward,
                    testing::random_observation(rng, 1, 6, 6), done};
}

// ---- replay ----

TEST(ReplayContract, FifoEvictionAndNewestAccess) {
  Rng rng(1);
  ReplayBuffer buf(2);
  buf.push(make_transition(rng, 0, 0.0, false));
  EXPECT_EQ(buf.size(), 1u);
  buf.push(make_transition(rng, 1, 0.0, false));
  buf.push(make_transition(rng, 2, 0.0, false));
  EXPECT_EQ(buf.size(), 2u);
  EXPECT_EQ(buf.at(0).action, 1);
  EXPECT_EQ(buf.last().action, 2);
}

TEST(ReplayContract, BatchOfOneIsNewest) {
  Rng rng(2);
  ReplayBuffer buf(10);
  for (int i = 0; i < 7; ++i) buf.push(make_transition(rng, i % 8, i, false));
  for (int k = 0; k < 20; ++k) {
    const auto b = buf.sample_corrected(1, rng);
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0].reward, 6.0);
  }
}

TEST(ReplayContract, NonNewestFrequencyWithinFiveSigma) {
  Rng rng(3);
  ReplayBuffer buf(100);
  for (int i = 0; i < 100; ++i) buf.push(make_transition(rng, i % 8, i, false));
  const int draws = 10000;
  const std::size_t batch = 32;
  std::vector<long> counts(100, 0);
  for (int k = 0; k < draws; ++k) {
    for (const auto i : buf.sample_indices_corrected(batch, rng)) ++counts[i];
  }
  const double trials = static_cast<double>(draws) * (batch - 1);
  const double mean = trials / 100.0;
  const double sigma = std::sqrt(trials * 0.01 * 0.99);
  for (int i = 0; i < 99; ++i) EXPECT_NEAR(counts[i], mean, 5 * sigma) << i;
  EXPECT_NEAR(counts[99], mean + draws, 5 * sigma);
}

// ---- DQN ----

nn::NetworkParams<double> q_with_bias(const nn::NetworkSpec& spec, const nn::Vector<double>& bias) {
  Rng rng(0);
  auto p = nn::zeros_like(nn::init_params<double>(spec, rng));
  p.heads.at(kQHead).back().biases = bias;
  return p;
}

TEST(DqnContract, GreedyPicksArgmaxAndLowestTie) {
  Rng rng(4);
  const auto spec = testing::toy_spec(1, {{kQHead, kNumActions}});
  const auto obs = testing::random_observation(rng, 1, 6, 6);
  nn::Vector<double> q = nn::Vector<double>::Zero(8);
  EXPECT_EQ(dqn_act(spec, q_with_bias(spec, q), obs, 0.0, rng), 0);
  q(6) = 5.0;
  EXPECT_EQ(dqn_act(spec, q_with_bias(spec, q), obs, 0.0, rng), 6);
}

TEST(DqnContract, FullExplorationIsUniform) {
  Rng rng(5);
  const auto spec = testing::toy_spec(1, {{kQHead, kNumActions}});
  nn::Vector<double> q = nn::Vector<double>::Zero(8);
  q(3) = 1.0;
  const auto params = q_with_bias(spec, q);
  const auto obs = testing::random_observation(rng, 1, 6, 6);
  std::array<int, 8> counts{};
  const int n = 50000;
  for (int i = 0; i < n; ++i) ++counts[dqn_act(spec, params, obs, 1.0, rng)];
  double chi2 = 0.0;
  for (const int c : counts) chi2 += (c - n / 8.0) * (c - n / 8.0) / (n / 8.0);
  EXPECT_LT(chi2, 24.32);  // chi-square, 7 dof, p = 0.001
}

TEST(DqnContract, TargetArithmetic) {
  nn::Matrix<double> online(8, 3), target(8, 3);
  online.setZero();
  target.setConstant(7.0);
  online(2, 0) = 1.0;
  target(2, 0) = 2.0;
  nn::Vector<double> r(3), d(3);
  r << 1.0, -0.5, 0.25;
  d << 0.0, 1.0, 0.0;
  const auto y = double_dqn_targets<double>(online, target, r, d, 0.99);
  EXPECT_DOUBLE_EQ(y(0), 2.98);
  EXPECT_EQ(y(1), -0.5);
  const auto y0 = double_dqn_targets<double>(online, target, r, d, 0.0);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(y0(i), r(i));
}

TEST(DqnContract, TargetNetworkNeverChangesSelection) {
  Rng rng(6);
  const auto spec = testing::toy_spec(1, {{kQHead, kNumActions}});
  auto online = nn::init_params<double>(spec, rng);
  testing::spread_parameters(online, rng);
  const auto batch = make_transition_batch<double>(testing::random_transitions(rng, 8, 1, 6, 6));
  const auto q_online = nn::forward(spec, online, batch.next_obs).output(kQHead);
  for (int trial = 0; trial < 5; ++trial) {
    auto target = nn::init_params<double>(spec, rng);
    testing::spread_parameters(target, rng, 2.0);
    const auto q_target = nn::forward(spec, target, batch.next_obs).output(kQHead);
    const auto y = dqn_td_targets(spec, online, target, batch, 0.9);
    for (int i = 0; i < batch.size(); ++i) {
      const int a = nn::argmax(q_online.col(i));
      EXPECT_NEAR(y(i), batch.rewards(i) + 0.9 * (1 - batch.dones(i)) * q_target(a, i), 1e-12);
    }
  }
}

TEST(DqnContract, RegressesOntoFixedTarget) {
  Rng rng(7);
  DqnConfig cfg;
  cfg.batch_size = 1;
  cfg.learning_starts = 1;
  // Production-size network; the toy head is too narrow to settle in 200 steps.
  DqnAgent<double> agent(nn::default_network_spec(2, 12, 12, {{kQHead, kNumActions}}), cfg, rng);
  const Transition t{testing::random_observation(rng, 2, 12, 12), 5, 1.0,
                     testing::random_observation(rng, 2, 12, 12), true};
  agent.remember(t);
  ASSERT_TRUE(agent.ready());
  for (int i = 0; i < 200; ++i) agent.train_step(rng);
  const Observation* o[] = {&t.obs};
  const auto q = nn::forward(agent.spec(), agent.online(),
                             nn::make_batch<double>(std::span<const Observation* const>(o)))
                     .output(kQHead);
  EXPECT_NEAR(q(5, 0), 1.0, 0.01);
}

// ---- PPO ----

struct PpoFixture {
  Rng rng{8};
  SectionDataset data = SectionDataset::generated(3, GeneratorParams{.grid_size = 6}, 2);
  EnvConfig env{.horizon = 20};
  PpoNets<double> nets = make_ppo_nets<double>(testing::toy_spec(1, {}), rng);
};

TEST(PpoContract, CollectShapesAndStoredLogProbs) {
  PpoFixture f;
  EnvStreams streams(f.data, f.env, 3, f.rng);
  const auto batch = ppo_collect(f.nets, streams, 7, f.rng);
  EXPECT_EQ(batch.size(), 21u);
  EXPECT_EQ(batch.bootstrap_values.size(), 3u);
  const auto logits = nn::forward(f.nets.policy_spec, f.nets.policy,
                                  nn::make_batch<double>(std::span<const Observation>(batch.obs)))
                          .output(kPolicyHead);
  const auto lp = nn::log_softmax<double>(logits);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    EXPECT_NEAR(batch.log_probs_old[i], lp(batch.actions[i], static_cast<Eigen::Index>(i)), 1e-6);
  }
}

TEST(PpoContract, CollectIsSeeded) {
  PpoFixture f;
  Rng a(9), b(9);
  EnvStreams sa(f.data, f.env, 2, a), sb(f.data, f.env, 2, b);
  const auto ba = ppo_collect(f.nets, sa, 10, a);
  const auto bb = ppo_collect(f.nets, sb, 10, b);
  EXPECT_EQ(ba.actions, bb.actions);
  EXPECT_EQ(ba.rewards, bb.rewards);
}

TEST(PpoContract, GaeLimits) {
  Rng rng(10);
  const int n = 20;
  std::vector<double> r(n), v(n + 1);
  std::vector<std::uint8_t> d(n, 0);
  d[n - 1] = 1;
  for (auto& x : r) x = uniform01(rng) * 2 - 1;
  for (auto& x : v) x = uniform01(rng) * 4 - 2;
  const double g = 0.9;

  const auto td = ppo_gae(r, v, d, g, 0.0);
  for (int t = 0; t < n; ++t) {
    const double delta = r[t] + g * (1 - d[t]) * v[t + 1] - v[t];
    EXPECT_EQ(td.advantages[t], delta);
  }
  const auto mc = ppo_gae(r, v, d, g, 1.0);
  for (int t = 0; t < n; ++t) {
    double togo = 0.0, w = 1.0;
    for (int k = t; k < n; ++k, w *= g) togo += w * r[k];
    EXPECT_NEAR(mc.advantages[t], togo - v[t], 1e-12);
  }
  const std::vector<double> zr(n, 0.0), zv(n + 1, 0.0);
  for (const double a : ppo_gae(zr, zv, d, g, 0.95).advantages) EXPECT_EQ(a, 0.0);
}

TEST(PpoContract, UnchangedPolicyHasUnitRatio) {
  PpoFixture f;
  EnvStreams streams(f.data, f.env, 2, f.rng);
  auto batch = ppo_collect(f.nets, streams, 8, f.rng);
  batch.advantages.resize(batch.size());
  batch.returns.assign(batch.size(), 0.0);
  for (auto& a : batch.advantages) a = uniform01(f.rng) * 2 - 1;
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto res = ppo_loss(f.nets, batch, idx, 0.2, 0.0, 0.0);
  EXPECT_NEAR(res.mean_ratio, 1.0, 1e-12);
  const double mean_adv =
      std::accumulate(batch.advantages.begin(), batch.advantages.end(), 0.0) / batch.size();
  EXPECT_NEAR(res.policy_loss, -mean_adv, 1e-12);
}

TEST(PpoContract, UniformPolicyEntropyIsLogEight) {
  PpoFixture f;
  f.nets.policy = nn::zeros_like(f.nets.policy);
  EnvStreams streams(f.data, f.env, 2, f.rng);
  auto batch = ppo_collect(f.nets, streams, 4, f.rng);
  batch.advantages.assign(batch.size(), 0.0);
  batch.returns.assign(batch.size(), 0.0);
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), 0);
  EXPECT_NEAR(ppo_loss(f.nets, batch, idx, 0.2, 0.5, 0.01).entropy, std::log(8.0), 1e-12);
}

TEST(PpoContract, PositiveAdvantageRaisesActionProbability) {
  PpoFixture f;
  EnvStreams streams(f.data, f.env, 1, f.rng);
  auto batch = ppo_collect(f.nets, streams, 1, f.rng);
  batch.advantages = {1.0};
  batch.returns = {0.0};
  const std::size_t idx[] = {0};
  const auto prob = [&] {
    const auto logits = nn::forward(f.nets.policy_spec, f.nets.policy,
                                    nn::make_batch<double>(std::span<const Observation>(batch.obs)))
                            .output(kPolicyHead);
    return nn::softmax<double>(logits)(batch.actions[0], 0);
  };
  const double before = prob();
  auto adam = nn::make_adam_state(f.nets.policy);
  for (int i = 0; i < 3; ++i) {
    const auto res = ppo_loss(f.nets, batch, idx, 0.2, 0.5, 0.0);
    nn::adam_step(f.nets.policy, res.policy_grads, adam, 1e-3);
  }
  EXPECT_GT(prob(), before);
}

// ---- SAC ----

struct SacFixture {
  Rng rng{11};
  SacConfig cfg;
  SacState<double> state;
  TransitionBatch<double> batch;

  SacFixture() {
    state = make_sac_state<double>(testing::toy_spec(1, {}), cfg, rng);
    for (auto* p : {&state.policy, &state.critic1, &state.critic2}) testing::spread_parameters(*p, rng, 0.5);
    state.target1 = state.critic1;
    state.target2 = nn::init_params<double>(state.critic_spec, rng);
    testing::spread_parameters(state.target2, rng, 0.5);
    batch = make_transition_batch<double>(testing::random_transitions(rng, 6, 1, 6, 6));
  }
};

TEST(SacContract, TerminalTargetIsReward) {
  SacFixture f;
  f.batch.dones.setOnes();
  const auto y = sac_critic_targets(f.state, f.batch, 0.99, 0.7);
  for (int i = 0; i < f.batch.size(); ++i) EXPECT_EQ(y(i), f.batch.rewards(i));
}

TEST(SacContract, ZeroTemperatureDeterministicPolicyIsTwinBellman) {
  SacFixture f;
  f.batch.dones.setZero();
  auto& out = f.state.policy.heads.at(kSacPolicyHead).back();
  out.weights.setZero();
  out.biases.setZero();
  out.biases(3) = 200.0;
  const auto y = sac_critic_targets(f.state, f.batch, 0.99, 0.0);
  const auto q1 = nn::forward(f.state.critic_spec, f.state.target1, f.batch.next_obs).output(kSacCriticHead);
  const auto q2 = nn::forward(f.state.critic_spec, f.state.target2, f.batch.next_obs).output(kSacCriticHead);
  for (int i = 0; i < f.batch.size(); ++i) {
    EXPECT_NEAR(y(i), f.batch.rewards(i) + 0.99 * std::min(q1(3, i), q2(3, i)), 1e-12);
  }
}

TEST(SacContract, UniformPolicyZeroCriticsEarnsLogEightBonus) {
  SacFixture f;
  f.batch.dones.setZero();
  f.state.policy = nn::zeros_like(f.state.policy);
  f.state.target1 = nn::zeros_like(f.state.target1);
  f.state.target2 = nn::zeros_like(f.state.target2);
  const double alpha = 0.4;
  const auto y = sac_critic_targets(f.state, f.batch, 0.99, alpha);
  for (int i = 0; i < f.batch.size(); ++i) {
    EXPECT_NEAR(y(i), f.batch.rewards(i) + 0.99 * alpha * std::log(8.0), 1e-12);
  }
}

TEST(SacContract, SwappingTargetCriticsLeavesLossUnchanged) {
  SacFixture f;
  const double a = sac_critic_loss(f.state, f.batch, 0.99, 0.3).loss;
  std::swap(f.state.target1, f.state.target2);
  EXPECT_EQ(sac_critic_loss(f.state, f.batch, 0.99, 0.3).loss, a);
}

TEST(SacContract, FrozenZeroCriticsLeaveOnlyEntropyTerm) {
  SacFixture f;
  f.state.critic1 = nn::zeros_like(f.state.critic1);
  f.state.critic2 = nn::zeros_like(f.state.critic2);
  const auto noise = nn::gumbel_noise<double>(kNumActions, f.batch.size(), f.rng);
  const double alpha = 0.6;
  const auto logits = nn::forward(f.state.policy_spec, f.state.policy, f.batch.obs).output(kSacPolicyHead);
  const auto sample = nn::gumbel_softmax_with_noise<double>(logits, noise, 1.0);
  double expected = 0.0;
  for (int i = 0; i < f.batch.size(); ++i) expected += sample.soft.col(i).dot(sample.log_prob.col(i));
  expected *= alpha / f.batch.size();
  EXPECT_NEAR(sac_policy_loss(f.state, f.batch, noise, alpha, 1.0).loss, expected, 1e-12);

  f.state.policy = nn::zeros_like(f.state.policy);
  EXPECT_NEAR(sac_policy_loss(f.state, f.batch, noise, alpha, 1.0).loss, -alpha * std::log(8.0), 1e-12);
}

TEST(SacContract, LargeTemperaturePushesTowardUniform) {
  SacFixture f;
  f.state.policy.heads.at(kSacPolicyHead).back().weights *= 8.0;
  const auto entropy = [&] { return sac_alpha_loss(f.state, f.batch).entropy; };
  const double before = entropy();
  auto adam = nn::make_adam_state(f.state.policy);
  for (int i = 0; i < 200; ++i) {
    const auto noise = nn::gumbel_noise<double>(kNumActions, f.batch.size(), f.rng);
    auto res = sac_policy_loss(f.state, f.batch, noise, 1000.0, 1.0);
    nn::clip_global_norm(res.grads, 0.5);
    nn::adam_step(f.state.policy, res.grads, adam, 3e-4);
  }
  EXPECT_GT(entropy(), before);
}

TEST(SacContract, EntropyAtTargetGivesZeroAlphaGradient) {
  SacFixture f;
  f.state.target_entropy = sac_alpha_loss(f.state, f.batch).entropy;
  EXPECT_EQ(sac_alpha_loss(f.state, f.batch).grad_log_alpha, 0.0);
}

TEST(SacContract, TemperatureStaysPositive) {
  SacFixture f;
  f.state.target_entropy = 0.0;  // entropy always above: alpha keeps shrinking
  for (int i = 0; i < 10000; ++i) {
    const auto a = sac_alpha_loss(f.state, f.batch);
    f.state.alpha_adam.apply(f.state.log_alpha, a.grad_log_alpha, 0.05);
  }
  EXPECT_GT(f.state.alpha(), 0.0);
  EXPECT_TRUE(std::isfinite(f.state.log_alpha));
}

TEST(SacContract, IdenticalTwinsStayIdentical) {
  SacFixture f;
  f.state.critic2 = f.state.critic1;
  f.state.target2 = f.state.target1;
  f.state.critic2_adam = f.state.critic1_adam;
  for (int i = 0; i < 5; ++i) sac_train_step(f.state, f.batch, f.cfg, f.rng);
  const auto a = nn::tensors(f.state.critic1);
  const auto b = nn::tensors(f.state.critic2);
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t k = 0; k < a[t].size; ++k) ASSERT_EQ(a[t].data[k], b[t].data[k]) << a[t].name;
  }
}

}  // namespace
}  // namespace amrl
