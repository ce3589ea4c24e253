#include <gtest/gtest.h>

#include "amrl/dqn.hpp"
#include "test_support.hpp"

namespace amrl {
namespace {

TEST(Epsilon, LinearDecayThenFlat) {
  DqnConfig c;
  EXPECT_EQ(linear_epsilon(c, 0, 1000), 1.0);
  EXPECT_NEAR(linear_epsilon(c, 100, 1000), 0.525, 1e-12);
  EXPECT_NEAR(linear_epsilon(c, 200, 1000), 0.05, 1e-12);
  EXPECT_NEAR(linear_epsilon(c, 900, 1000), 0.05, 1e-12);
}

TEST(DoubleDqn, SelectsWithOnlineEvaluatesWithTarget) {
  nn::Matrix<double> online(3, 2), target(3, 2);
  online << 1.0, 0.0,
            5.0, 0.0,
            2.0, 9.0;
  target << 10.0, 1.0,
            -3.0, 2.0,
            7.0, 4.0;
  nn::Vector<double> r(2), d(2);
  r << 0.5, -1.0;
  d << 0.0, 1.0;
  const auto y = double_dqn_targets<double>(online, target, r, d, 0.9);
  // Column 0: argmax online is row 1, target value -3.
  EXPECT_NEAR(y(0), 0.5 + 0.9 * -3.0, 1e-15);
  // Column 1 is terminal.
  EXPECT_EQ(y(1), -1.0);
}

TEST(DqnLoss, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  const auto spec = testing::toy_spec(2, {{kQHead, kNumActions}});
  auto params = nn::init_params<double>(spec, rng);
  testing::spread_parameters(params, rng);
  const auto batch = make_transition_batch<double>(testing::random_transitions(rng, 6, 2, 6, 6));
  const nn::Vector<double> y = nn::Vector<double>::Random(6);
  const auto res = dqn_loss(spec, params, batch, y);
  const auto report = testing::finite_difference_check(
      params, res.grads, [&] { return dqn_loss(spec, params, batch, y).loss; });
  EXPECT_LT(report.max_rel_error, 1e-4) << report.worst;
}

TEST(DqnLoss, MatchesDirectMse) {
  Rng rng(2);
  const auto spec = testing::toy_spec(1, {{kQHead, kNumActions}});
  const auto params = nn::init_params<double>(spec, rng);
  const auto ts = testing::random_transitions(rng, 5, 1, 6, 6);
  const auto batch = make_transition_batch<double>(ts);
  const nn::Vector<double> y = nn::Vector<double>::Random(5);
  const auto q = nn::forward(spec, params, batch.obs).output(kQHead);
  double mse = 0.0;
  for (int j = 0; j < 5; ++j) mse += std::pow(q(ts[j].action, j) - y(j), 2);
  EXPECT_NEAR(dqn_loss(spec, params, batch, y).loss, mse / 5, 1e-14);
}

TEST(DqnAgent, TrainStepMovesTargetByPolyak) {
  Rng rng(3);
  DqnConfig cfg;
  cfg.batch_size = 4;
  cfg.learning_starts = 4;
  cfg.buffer_capacity = 16;
  cfg.tau = 0.25;
  DqnAgent<double> agent(testing::toy_spec(1, {{kQHead, kNumActions}}), cfg, rng);
  for (const auto& t : testing::random_transitions(rng, 6, 1, 6, 6)) agent.remember(t);
  ASSERT_TRUE(agent.ready());
  const auto target_before = agent.target();
  const auto m = agent.train_step(rng);
  EXPECT_TRUE(std::isfinite(m.loss));
  const auto t = nn::tensors(agent.target());
  const auto o = nn::tensors(agent.online());
  const auto b = nn::tensors(target_before);
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t k = 0; k < t[i].size; ++k) {
      EXPECT_NEAR(t[i].data[k], 0.25 * o[i].data[k] + 0.75 * b[i].data[k], 1e-14);
    }
  }
  EXPECT_EQ(agent.train_steps(), 1);
}

TEST(DqnAgent, NonFiniteRewardAborts) {
  Rng rng(4);
  DqnConfig cfg;
  cfg.batch_size = 2;
  cfg.learning_starts = 2;
  cfg.buffer_capacity = 4;
  DqnAgent<double> agent(testing::toy_spec(1, {{kQHead, kNumActions}}), cfg, rng);
  auto ts = testing::random_transitions(rng, 2, 1, 6, 6);
  ts[1].reward = std::numeric_limits<double>::quiet_NaN();
  for (const auto& t : ts) agent.remember(t);
  EXPECT_THROW(agent.train_step(rng), NonFiniteError);
}

TEST(DqnAgent, CheckpointRoundTrip) {
  Rng rng(5);
  DqnConfig cfg;
  cfg.buffer_capacity = 8;
  const auto spec = testing::toy_spec(1, {{kQHead, kNumActions}});
  DqnAgent<float> a(spec, cfg, rng), b(spec, cfg, rng);
  nn::Checkpoint c;
  a.save(c);
  b.load(nn::Checkpoint::from_bytes(c.to_bytes()));
  const auto obs = testing::random_observation(rng, 1, 6, 6);
  EXPECT_EQ(a.greedy(obs), b.greedy(obs));
  nn::Checkpoint c2;
  b.save(c2);
  EXPECT_EQ(c.to_bytes(), c2.to_bytes());
}

}  // namespace
}  // namespace amrl
