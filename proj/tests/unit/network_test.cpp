#include <gtest/gtest.h>

#include "amrl/network.hpp"
#include "test_support.hpp"

namespace amrl::nn {
namespace {

using amrl::testing::random_observation;
using amrl::testing::toy_spec;

ObsBatch<double> random_batch(Rng& rng, const NetworkSpec& spec, int n) {
  std::vector<Observation> obs;
  for (int i = 0; i < n; ++i) obs.push_back(random_observation(rng, spec.in_channels, spec.height, spec.width));
  return make_batch<double>(std::span<const Observation>(obs));
}

TEST(NetworkSpec, DefaultShapes) {
  const auto spec = default_network_spec(1, 32, 32, {{"q", 8}});
  const auto shapes = spec.conv_shapes();
  ASSERT_EQ(shapes.size(), 3u);
  EXPECT_EQ(shapes[0].channels, 16);
  EXPECT_EQ(shapes[0].height, 16);
  EXPECT_EQ(shapes[1].height, 8);
  EXPECT_EQ(shapes[2].channels, 32);
  EXPECT_EQ(shapes[2].height, 8);
  EXPECT_EQ(spec.feature_dim(), 32 * 8 * 8 + 80);
}

TEST(Network, ForwardShapesAndHeadSelection) {
  Rng rng(1);
  const auto spec = toy_spec(2, {{"policy", 8}, {"value", 1}});
  const auto params = init_params<double>(spec, rng);
  const auto batch = random_batch(rng, spec, 5);
  const auto all = forward(spec, params, batch);
  EXPECT_EQ(all.output("policy").rows(), 8);
  EXPECT_EQ(all.output("value").rows(), 1);
  EXPECT_EQ(all.output("value").cols(), 5);
  const auto one = forward(spec, params, batch, {"value"});
  EXPECT_EQ(one.outputs.count("policy"), 0u);
  EXPECT_THROW(one.output("policy"), std::exception);
}

TEST(Network, BatchColumnsAreIndependent) {
  Rng rng(2);
  const auto spec = toy_spec(1, {{"q", 8}});
  const auto params = init_params<double>(spec, rng);
  std::vector<Observation> obs;
  for (int i = 0; i < 4; ++i) obs.push_back(random_observation(rng, 1, 6, 6));
  const auto joint = forward(spec, params, make_batch<double>(std::span<const Observation>(obs)));
  for (int i = 0; i < 4; ++i) {
    const auto single = forward(spec, params, make_batch<double>(std::span<const Observation>(&obs[i], 1)));
    for (int a = 0; a < 8; ++a) EXPECT_NEAR(single.output("q")(a, 0), joint.output("q")(a, i), 1e-12);
  }
}

TEST(Network, RejectsMismatchedInput) {
  Rng rng(3);
  const auto spec = toy_spec(2, {{"q", 8}});
  const auto params = init_params<double>(spec, rng);
  std::vector<Observation> obs = {random_observation(rng, 1, 6, 6)};
  EXPECT_THROW(forward(spec, params, make_batch<double>(std::span<const Observation>(obs))),
               std::invalid_argument);
}

TEST(Network, InitScheme) {
  Rng rng(4);
  const auto spec = default_network_spec(1, 12, 12, {{"q", 8}});
  const auto params = init_params<float>(spec, rng);
  // He-uniform bound sqrt(6 / fan_in) on the first conv.
  const double bound = std::sqrt(6.0 / 9.0);
  EXPECT_LE(params.trunk[0].kernels.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(params.trunk[0].kernels.cwiseAbs().maxCoeff(), 0.5 * bound);
  const auto& out = params.heads.at("q").back();
  EXPECT_LE(out.weights.cwiseAbs().maxCoeff(), 1e-3f);
  EXPECT_EQ(out.biases.cwiseAbs().maxCoeff(), 0.0f);
}

TEST(Network, GradientMatchesFiniteDifferencesEveryLayer) {
  Rng rng(5);
  const auto spec = toy_spec(2, {{"policy", 8}, {"value", 1}});
  auto params = init_params<double>(spec, rng);
  amrl::testing::spread_parameters(params, rng);
  const auto batch = random_batch(rng, spec, 3);
  const Matrix<double> wp = Matrix<double>::Random(8, 3);
  const Matrix<double> wv = Matrix<double>::Random(1, 3);
  const auto loss = [&] {
    const auto f = forward(spec, params, batch);
    return (f.output("policy").cwiseProduct(wp)).sum() + (f.output("value").cwiseProduct(wv)).sum();
  };
  const auto fwd = forward(spec, params, batch);
  const auto grads = backward(spec, params, fwd, {{"policy", wp}, {"value", wv}});
  const auto report = amrl::testing::finite_difference_check(params, grads, loss);
  EXPECT_EQ(report.checked, parameter_count(params));
  EXPECT_LT(report.max_rel_error, 1e-4) << report.worst;
}

TEST(Network, MissingHeadGradientIsZero) {
  Rng rng(6);
  const auto spec = toy_spec(1, {{"policy", 8}, {"value", 1}});
  const auto params = init_params<double>(spec, rng);
  const auto batch = random_batch(rng, spec, 2);
  const auto fwd = forward(spec, params, batch);
  const auto grads = backward(spec, params, fwd, {{"value", Matrix<double>::Ones(1, 2)}});
  for (const auto& l : grads.heads.at("policy")) EXPECT_EQ(l.weights.cwiseAbs().sum(), 0.0);
}

TEST(Network, TensorEnumerationIsStable) {
  Rng rng(7);
  const auto spec = toy_spec(1, {{"q", 8}});
  auto params = init_params<double>(spec, rng);
  const auto t = tensors(params);
  ASSERT_FALSE(t.empty());
  EXPECT_EQ(t.front().name, "conv1.kernels");
  std::size_t total = 0;
  for (const auto& x : t) total += x.size;
  EXPECT_EQ(total, parameter_count(params));
  EXPECT_EQ(t.front().shape, (std::vector<int>{4, 3, 3, 1}));
}

TEST(Network, CastRoundTrip) {
  Rng rng(8);
  const auto spec = toy_spec(1, {{"q", 8}});
  const auto f = init_params<float>(spec, rng);
  const auto back = cast_params<float>(cast_params<double>(f));
  const auto a = tensors(f);
  const auto b = tensors(back);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].size; ++k) EXPECT_EQ(a[i].data[k], b[i].data[k]);
  }
}


TEST(Network, ZeroParametersGiveZeroOutputs) {
  Rng rng(11);
  const auto spec = toy_spec(2, {{"q", 8}});
  const auto params = zeros_like(init_params<double>(spec, rng));
  const auto out = forward(spec, params, random_batch(rng, spec, 4));
  EXPECT_EQ(out.output("q").rows(), 8);
  EXPECT_EQ(out.output("q").cols(), 4);
  EXPECT_TRUE((out.output("q").array() == 0.0).all());
}

TEST(Network, ConstantLossHasZeroGradient) {
  Rng rng(12);
  const auto spec = toy_spec(1, {{"q", 8}});
  const auto params = init_params<double>(spec, rng);
  const auto fwd = forward(spec, params, random_batch(rng, spec, 3));
  const auto g = backward(spec, params, fwd, {{"q", Matrix<double>::Zero(8, 3)}});
  for (const auto t : tensors(g)) {
    for (std::size_t k = 0; k < t.size; ++k) ASSERT_EQ(t.data[k], 0.0);
  }
}

TEST(Network, DoublingLossDoublesGradient) {
  Rng rng(13);
  const auto spec = toy_spec(2, {{"q", 8}});
  auto params = init_params<double>(spec, rng);
  amrl::testing::spread_parameters(params, rng);
  const auto fwd = forward(spec, params, random_batch(rng, spec, 3));
  const Matrix<double> d = Matrix<double>::Random(8, 3);
  const auto g1 = backward(spec, params, fwd, {{"q", d}});
  const auto g2 = backward(spec, params, fwd, {{"q", Matrix<double>(2.0 * d)}});
  const auto a = tensors(g1);
  const auto b = tensors(g2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].size; ++k) ASSERT_EQ(b[i].data[k], 2.0 * a[i].data[k]);
  }
}

}  // namespace
}  // namespace amrl::nn
