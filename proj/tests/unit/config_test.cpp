#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "amrl/config.hpp"

namespace amrl {
namespace {

TEST(Config, DefaultsMatchPublishedHyperparameters) {
  const TrainConfig c;
  EXPECT_EQ(c.network.conv_filters, (std::vector<int>{16, 32, 32}));
  EXPECT_EQ(c.network.conv_strides, (std::vector<int>{2, 2, 1}));
  EXPECT_EQ(c.network.hidden, 128);
  for (const double lr : {c.dqn.lr, c.ppo.lr, c.sac.lr}) EXPECT_EQ(lr, 3e-4);
  for (const double g : {c.dqn.gamma, c.ppo.gamma, c.sac.gamma}) EXPECT_EQ(g, 0.99);
  for (const double n : {c.dqn.max_grad_norm, c.ppo.max_grad_norm, c.sac.max_grad_norm}) {
    EXPECT_EQ(n, 0.5);
  }
  EXPECT_EQ(c.dqn.buffer_capacity, 100000u);
  EXPECT_EQ(c.dqn.batch_size, 64);
  EXPECT_EQ(c.dqn.epsilon_start, 1.0);
  EXPECT_EQ(c.dqn.epsilon_end, 0.05);
  EXPECT_EQ(c.dqn.epsilon_decay_fraction, 0.2);
  EXPECT_EQ(c.dqn.tau, 0.005);
  EXPECT_EQ(c.dqn.learning_starts, 1000);
  EXPECT_EQ(c.ppo.clip, 0.2);
  EXPECT_EQ(c.ppo.value_coef, 0.5);
  EXPECT_EQ(c.ppo.entropy_coef, 0.01);
  EXPECT_EQ(c.ppo.gae_lambda, 0.95);
  EXPECT_EQ(c.ppo.num_envs, 8);
  EXPECT_EQ(c.ppo.steps_per_env, 256);
  EXPECT_EQ(c.ppo.epochs, 4);
  EXPECT_EQ(c.ppo.minibatch_size, 512);
  EXPECT_EQ(c.sac.target_entropy_scale, 0.98);
  EXPECT_EQ(c.horizon, 400);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, KeysAreUniqueAndAllSerialized) {
  const auto keys = config_keys();
  std::set<std::string> names;
  for (const auto& k : keys) {
    EXPECT_TRUE(names.insert(k.key).second) << k.key;
    EXPECT_FALSE(k.help.empty()) << k.key;
  }
  const auto kv = parse_key_values(serialize_config(TrainConfig{}));
  ASSERT_EQ(kv.size(), keys.size());
  for (std::size_t i = 0; i < kv.size(); ++i) {
    EXPECT_EQ(kv[i].first, keys[i].key);
    EXPECT_EQ(kv[i].second, keys[i].default_value);
  }
}

TEST(Config, SerializeParseRoundTrip) {
  TrainConfig c;
  c.algorithm = Algorithm::Sac;
  c.reward_mode = RewardMode::Sparse;
  c.seed = 0xdeadbeefcafeULL;
  c.horizon = 77;
  c.nozzle_channel = true;
  c.sections_dir = "some/dir";
  c.generator.ellipses = false;
  c.holdout_fraction = 0.1;
  c.network.conv_filters = {8, 4};
  c.network.conv_strides = {1, 2};
  c.dqn.tau = 0.1 + 0.2;  // not exactly representable in short decimal
  c.sac.initial_alpha = 1.0 / 3.0;
  c.ppo.normalize_advantages = false;
  const std::string text = serialize_config(c);
  const TrainConfig back = parse_config(text);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(back.dqn.tau, c.dqn.tau);
  EXPECT_EQ(back.sac.initial_alpha, c.sac.initial_alpha);
  EXPECT_EQ(back.network.conv_filters, c.network.conv_filters);
  EXPECT_EQ(back.algorithm, Algorithm::Sac);
  EXPECT_EQ(back.reward_mode, RewardMode::Sparse);
  EXPECT_EQ(back.seed, c.seed);
}

TEST(Config, PartialTextKeepsBaseValuesAndAcceptsComments) {
  TrainConfig base;
  base.horizon = 123;
  const auto c = parse_config(
      "# leading comment\n"
      "\n"
      "algorithm = ppo   # trailing comment\n"
      "  ppo.epochs=2\n",
      base);
  EXPECT_EQ(c.algorithm, Algorithm::Ppo);
  EXPECT_EQ(c.ppo.epochs, 2);
  EXPECT_EQ(c.horizon, 123);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("no_such_key = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("horizon = 3\nhorizon = 4\n"), ConfigError);
  EXPECT_THROW(parse_config("horizon = ten\n"), ConfigError);
  EXPECT_THROW(parse_config("horizon = 10.5\n"), ConfigError);
  EXPECT_THROW(parse_config("horizon\n"), ConfigError);
  EXPECT_THROW(parse_config("nozzle_channel = maybe\n"), ConfigError);
  EXPECT_THROW(parse_config("algorithm = a2c\n"), ConfigError);
  EXPECT_THROW(parse_config("reward_mode = dens\n"), ConfigError);
  EXPECT_THROW(parse_config("= 4\n"), ConfigError);
}

TEST(Config, ErrorNamesTheKey) {
  try {
    parse_config("horizon = 3\n\nseed = x\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("seed"), std::string::npos) << e.what();
  }
}

TEST(Config, ValidateRejectsInconsistentValues) {
  const auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](TrainConfig& c) { c.horizon = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.holdout_fraction = 1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.eval_episodes = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.network.conv_strides = {1}; }).validate(),
               ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.dqn.buffer_capacity = 10; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.ppo.minibatch_size = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.total_env_steps = -1; }).validate(), ConfigError);
}

TEST(Config, HashIsStableHexAndSensitive) {
  const TrainConfig a;
  const std::string h = config_hash(a);
  ASSERT_EQ(h.size(), 16u);
  EXPECT_EQ(h.find_first_not_of("0123456789abcdef"), std::string::npos);
  EXPECT_EQ(config_hash(parse_config(serialize_config(a))), h);
  TrainConfig b;
  b.seed = 1;
  EXPECT_NE(config_hash(b), h);
  TrainConfig c;
  c.sac.gumbel_temperature = std::nextafter(1.0, 2.0);
  EXPECT_NE(config_hash(c), h);
}

TEST(Config, EnvConfigAndTrunkFollowSettings) {
  TrainConfig c;
  c.horizon = 50;
  c.reward_mode = RewardMode::Sparse;
  c.nozzle_channel = true;
  const auto env = c.env_config();
  EXPECT_EQ(env.horizon, 50);
  EXPECT_EQ(env.reward_mode, RewardMode::Sparse);
  EXPECT_TRUE(env.observation.nozzle_channel);
  const auto spec = c.trunk_spec(12, 10);
  EXPECT_EQ(spec.in_channels, 2);
  EXPECT_EQ(spec.height, 12);
  EXPECT_EQ(spec.width, 10);
  EXPECT_EQ(spec.history_dim, kHistoryDim);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(-3.0), "-3");
  for (const double v : {0.1 + 0.2, 1.0 / 3.0, 1e-300, -2.5e17, 123456.789,
                         std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0)}) {
    EXPECT_EQ(std::stod(format_double(v)), v) << format_double(v);
  }
}

TEST(KeyValues, FormatAndParseAreInverse) {
  const std::vector<std::pair<std::string, std::string>> kv = {
      {"a", "1"}, {"b.c", "x y"}, {"d", ""}};
  EXPECT_EQ(parse_key_values(format_key_values(kv)), kv);
}

TEST(Enums, NamesRoundTrip) {
  for (const auto a : {Algorithm::Dqn, Algorithm::Ppo, Algorithm::Sac}) {
    EXPECT_EQ(parse_algorithm(to_string(a)), a);
  }
  for (const auto m : {RewardMode::Dense, RewardMode::Sparse}) {
    EXPECT_EQ(parse_reward_mode(to_string(m)), m);
  }
}

}  // namespace
}  // namespace amrl
