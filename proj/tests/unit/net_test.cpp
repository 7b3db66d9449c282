#include <gtest/gtest.h>

#include "frnet/gradcheck.hpp"
#include "frnet/net.hpp"
#include "oracles.hpp"

using namespace frnet;

namespace {

UNetConfig cfg(std::size_t depth, std::size_t base, std::size_t size, std::uint64_t seed = 0) {
  UNetConfig c;
  c.depth = depth;
  c.base_channels = base;
  c.input_size = size;
  c.seed = seed;
  return c;
}

template <typename T>
void randomize_biases(UNetParams<T>& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (auto& l : p.layers)
    for (T& b : l.bias) b = static_cast<T>(u(rng));
}

}  // namespace

TEST(Net, ParameterCountMatchesHandCount) {
  // 160 + 2320 + 4640 + 9248 + 18496 + 36928 + 18464 + 18464 + 9248 + 4624 + 4624 + 2320 + 145
  EXPECT_EQ(parameter_count(cfg(2, 16, 48)), 129681u);
  EXPECT_EQ(build<float>(cfg(2, 16, 48)).parameter_count(), 129681u);
  // depth 1, base 1: 10 + 10 + 20 + 38 + 19 + 19 + 10 + 10
  EXPECT_EQ(parameter_count(cfg(1, 1, 8)), 136u);
  EXPECT_EQ(parameter_count(cfg(2, 4, 16)), 8229u);
}

TEST(Net, ManifestLayout) {
  const auto m = layer_manifest(cfg(2, 4, 16));
  ASSERT_EQ(m.size(), 13u);
  EXPECT_EQ(m.front().name, "enc0.conv0");
  EXPECT_EQ(m[4].name, "bottleneck.conv0");
  EXPECT_EQ(m[4].out_channels, 16u);
  EXPECT_EQ(m[7].name, "dec1.conv0");
  EXPECT_EQ(m[7].in_channels, 16u);
  EXPECT_EQ(m.back().name, "out");
  EXPECT_FALSE(m.back().relu);
  EXPECT_EQ(m.back().out_channels, 1u);
}

TEST(Net, InvalidConfigs) {
  EXPECT_THROW(build<float>(cfg(0, 4, 8)), ConfigError);
  EXPECT_THROW(build<float>(cfg(1, 0, 8)), ConfigError);
  EXPECT_THROW(build<float>(cfg(2, 4, 50)), ConfigError);
}

TEST(Net, SameSeedSameParameters) {
  const auto a = build<float>(cfg(2, 4, 16, 9));
  const auto b = build<float>(cfg(2, 4, 16, 9));
  const auto c = build<float>(cfg(2, 4, 16, 10));
  EXPECT_EQ(a.flatten(), b.flatten());
  EXPECT_NE(a.flatten(), c.flatten());
  for (const auto& l : a.layers)
    for (float v : l.bias) EXPECT_EQ(v, 0.0f);
}

TEST(Net, SmallestNetworkRuns) {
  const auto p = build<float>(cfg(1, 1, 8));
  const auto y = infer(p, oracle::random_tensor<float>({1, 1, 8, 8}, 1));
  EXPECT_EQ(y.shape(), (Shape4{1, 1, 8, 8}));
}

TEST(Net, ShapeContract) {
  const auto p = build<float>(cfg(2, 4, 48));
  EXPECT_EQ(infer(p, oracle::random_tensor<float>({5, 1, 48, 48}, 2)).shape(), (Shape4{5, 1, 48, 48}));
  EXPECT_THROW(infer(p, Tensor4<float>({1, 1, 40, 40})), ShapeError);
  EXPECT_THROW(infer(p, Tensor4<float>({1, 2, 48, 48})), ShapeError);
}

TEST(Net, ZeroInputZeroBiasGivesZeroOutput) {
  const auto p = build<double>(cfg(1, 2, 8, 3));
  const auto y = infer(p, Tensor4<double>({2, 1, 8, 8}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Net, ZeroWeightsPassOnlyTheOutputBias) {
  auto p = build<double>(cfg(1, 1, 8));
  randomize_biases(p, 4);
  for (auto& l : p.layers) std::fill(l.weights.begin(), l.weights.end(), 0.0);
  const auto y = infer(p, oracle::random_tensor<double>({1, 1, 8, 8}, 5));
  for (double v : y.data()) EXPECT_EQ(v, p.layers.back().bias[0]);
}

TEST(Net, ZeroInputMatchesForwardOracle) {
  auto p = build<double>(cfg(1, 2, 8, 6));
  randomize_biases(p, 7);
  const Tensor4<double> x({1, 1, 8, 8});
  EXPECT_LT(oracle::max_abs_diff<double>(infer(p, x).data(), oracle::unet(p, x).data()), 1e-12);
}

TEST(Net, ForwardMatchesOracle) {
  for (std::size_t depth : {1u, 2u}) {
    auto p = build<double>(cfg(depth, 3, 16, depth));
    randomize_biases(p, depth + 20);
    const auto x = oracle::random_tensor<double>({2, 1, 16, 16}, depth + 30);
    EXPECT_LT(oracle::max_abs_diff<double>(infer(p, x).data(), oracle::unet(p, x).data()), 1e-12);
  }
}

TEST(Net, IdenticalRowsGiveIdenticalOutputs) {
  const auto p = build<float>(cfg(2, 4, 16, 1));
  const auto one = oracle::random_tensor<float>({1, 1, 16, 16}, 8);
  Tensor4<float> batch({3, 1, 16, 16});
  for (std::size_t n = 0; n < 3; ++n) std::copy(one.data().begin(), one.data().end(), batch.item(n).begin());
  const auto y = infer(p, batch);
  for (std::size_t n = 1; n < 3; ++n) {
    const auto a = y.item(0), b = y.item(n);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST(Net, ForwardIsDeterministic) {
  const auto p = build<float>(cfg(2, 4, 16, 2));
  const auto x = oracle::random_tensor<float>({2, 1, 16, 16}, 9);
  const auto a = loss_and_gradients(p, x, LossVariant::frnet, LossConfig{});
  const auto b = loss_and_gradients(p, x, LossVariant::frnet, LossConfig{});
  EXPECT_EQ(a.loss.total, b.loss.total);
  EXPECT_EQ(a.grads.flatten(), b.grads.flatten());
}

TEST(Net, ZeroCotangentGivesZeroGradients) {
  const auto p = build<double>(cfg(2, 2, 8, 1));
  const auto x = oracle::random_tensor<double>({2, 1, 8, 8}, 1);
  const auto f = forward(p, x);
  for (double g : backward(p, f.cache, Tensor4<double>(x.shape())).flatten()) EXPECT_EQ(g, 0.0);
}

TEST(Net, DuplicatingEveryItemKeepsGradients) {
  auto p = build<double>(cfg(1, 2, 8, 2));
  randomize_biases(p, 3);
  const auto x = oracle::random_tensor<double>({2, 1, 8, 8}, 4);
  Tensor4<double> xx({4, 1, 8, 8});
  for (std::size_t n = 0; n < 4; ++n) {
    const auto src = x.item(n % 2);
    std::copy(src.begin(), src.end(), xx.item(n).begin());
  }
  LossConfig lc;
  lc.lambda1 = lc.lambda2 = 1.0;
  const auto a = loss_and_gradients(p, x, LossVariant::frnet, lc);
  const auto b = loss_and_gradients(p, xx, LossVariant::frnet, lc);
  EXPECT_NEAR(a.loss.total, b.loss.total, 1e-12 * a.loss.total);
  EXPECT_LT(oracle::rel_error(a.grads.flatten(), b.grads.flatten()), 1e-12);
}

TEST(Net, OutputLayerGradientMatchesFiniteDifferences) {
  // Perturbing the final linear layer never moves a ReLU or pooling switch.
  auto p = build<double>(cfg(1, 2, 8, 5));
  randomize_biases(p, 6);
  const auto x = oracle::random_tensor<double>({2, 1, 8, 8}, 7);
  LossConfig lc;
  lc.lambda1 = lc.lambda2 = 1.0;
  const auto ana = loss_and_gradients(p, x, LossVariant::frnet, lc);
  auto& out = p.layers.back();
  std::vector<double> flat = out.weights;
  flat.insert(flat.end(), out.bias.begin(), out.bias.end());
  auto f = [&](std::span<const double> q) {
    auto pp = p;
    auto& o = pp.layers.back();
    std::copy(q.begin(), q.begin() + static_cast<long>(o.weights.size()), o.weights.begin());
    std::copy(q.begin() + static_cast<long>(o.weights.size()), q.end(), o.bias.begin());
    return evaluate_loss(LossVariant::frnet, infer(pp, x), x, lc).value.total;
  };
  const auto num = finite_diff_grad(f, flat, 1e-5);
  std::vector<double> a = ana.grads.layers.back().weights;
  a.insert(a.end(), ana.grads.layers.back().bias.begin(), ana.grads.layers.back().bias.end());
  EXPECT_LT(oracle::rel_error(num, a), 1e-6);
}

TEST(Net, MicroNetGradientCheck) {
  GradcheckCase c;
  c.depth = 1;
  c.base_channels = 2;
  c.size = 8;
  const auto r = run_gradcheck(c, GradcheckOptions{});
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_rel_error, 1e-3);
  EXPECT_LE(r.kink_crossings, r.coordinates / 100);
}

TEST(Net, StaleCacheIsRejected) {
  const auto p = build<double>(cfg(1, 2, 8));
  const auto q = build<double>(cfg(2, 2, 8));
  const auto x = oracle::random_tensor<double>({1, 1, 8, 8}, 1);
  const auto f = forward(p, x);
  EXPECT_THROW(backward(q, f.cache, Tensor4<double>(x.shape())), ShapeError);
  EXPECT_THROW(backward(p, f.cache, Tensor4<double>({2, 1, 8, 8})), ShapeError);
  EXPECT_THROW(backward(p, ForwardCache<double>{}, Tensor4<double>(x.shape())), ShapeError);
}

TEST(Net, FlattenRoundTrip) {
  auto p = build<float>(cfg(1, 2, 8, 3));
  auto flat = p.flatten();
  for (float& v : flat) v += 1.0f;
  p.assign_flat(flat);
  EXPECT_EQ(p.flatten(), flat);
  EXPECT_THROW(p.assign_flat(std::vector<float>(3)), ShapeError);
}
