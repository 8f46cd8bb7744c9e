#include <gtest/gtest.h>

#include <random>

#include "jumpflow/errors.hpp"
#include "jumpflow/mlp.hpp"
#include "oracles.hpp"

namespace jumpflow {
namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

TEST(Mlp, IdentityLayer) {
  const Mlp net({2, 2});
  const std::vector<double> params{1, 0, 0, 1, 0, 0};
  const auto y = net.forward(params, std::vector<double>{0.3, -0.7});
  EXPECT_EQ(y, (std::vector<double>{0.3, -0.7}));
}

TEST(Mlp, ParameterCountAndOffsets) {
  const Mlp net({3, 4, 2});
  EXPECT_EQ(net.param_count(), 3u * 4 + 4 + 4 * 2 + 2);
  EXPECT_EQ(net.weight_offset(0), 0u);
  EXPECT_EQ(net.bias_offset(0), 12u);
  EXPECT_EQ(net.weight_offset(1), 16u);
  EXPECT_EQ(net.bias_offset(1), 24u);
}

TEST(Mlp, LinearVjpIsTransposeProduct) {
  std::mt19937_64 rng(3);
  const Mlp net({3, 2});
  std::vector<double> params(net.param_count());
  net.init_uniform(params, rng);
  const auto v = random_vector(2, rng);
  const auto [dx, dparams] = net.vjp(params, random_vector(3, rng), v);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(dx[c], v[0] * params[c] + v[1] * params[3 + c], 1e-15);
  }
  EXPECT_EQ(dparams.size(), net.param_count());
}

TEST(Mlp, ZeroCotangentGivesZeroProducts) {
  std::mt19937_64 rng(4);
  const Mlp net({3, 5, 2});
  std::vector<double> params(net.param_count());
  net.init_uniform(params, rng);
  const auto [dx, dparams] = net.vjp(params, random_vector(3, rng), std::vector<double>(2, 0.0));
  for (double g : dx) EXPECT_EQ(g, 0.0);
  for (double g : dparams) EXPECT_EQ(g, 0.0);
}

TEST(Mlp, DimensionErrorNamesTheLayer) {
  const Mlp net({3, 4, 2});
  std::vector<double> params(net.param_count(), 0.1);
  try {
    net.forward(params, std::vector<double>{1.0, 2.0});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("layer"), std::string::npos) << e.what();
  }
  EXPECT_THROW(net.forward(std::vector<double>(3, 0.0), std::vector<double>(3, 0.0)),
               DimensionError);
}

TEST(Mlp, InitializationRespectsFanInBound) {
  std::mt19937_64 rng(5);
  const Mlp net({16, 8, 4});
  std::vector<double> params(net.param_count());
  net.init_uniform(params, rng);
  for (std::size_t i = 0; i < net.bias_offset(0) + 8; ++i) {
    EXPECT_LE(std::abs(params[i]), std::sqrt(1.0 / 16));
  }
  for (std::size_t i = net.weight_offset(1); i < params.size(); ++i) {
    EXPECT_LE(std::abs(params[i]), std::sqrt(1.0 / 8));
  }
}

TEST(Mlp, ForwardIsBitReproducible) {
  std::mt19937_64 rng(6);
  const Mlp net({4, 7, 3}, OutputActivation::softplus);
  std::vector<double> params(net.param_count());
  net.init_uniform(params, rng);
  const auto x = random_vector(4, rng);
  EXPECT_EQ(net.forward(params, x), net.forward(params, x));
}

TEST(Mlp, SoftplusOutputIsPositive) {
  std::mt19937_64 rng(7);
  const Mlp net({2, 5, 3}, OutputActivation::softplus);
  std::vector<double> params(net.param_count());
  net.init_uniform(params, rng);
  for (int trial = 0; trial < 50; ++trial) {
    for (double y : net.forward(params, random_vector(2, rng))) EXPECT_GT(y, 0.0);
  }
}

// Property: both products agree with central differences of v . out on at
// least 100 random networks.
TEST(Mlp, VjpMatchesCentralDifferencesOnRandomNetworks) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> width(1, 6), depth(1, 3);
  std::size_t checked = 0;
  for (int instance = 0; instance < 120; ++instance) {
    std::vector<std::size_t> widths{width(rng)};
    const std::size_t layers = depth(rng);
    for (std::size_t l = 0; l < layers; ++l) widths.push_back(width(rng));
    const auto activation = instance % 2 ? OutputActivation::softplus : OutputActivation::identity;
    const Mlp net(widths, activation);
    std::vector<double> params(net.param_count());
    net.init_uniform(params, rng);
    const auto x = random_vector(widths.front(), rng);
    const auto v = random_vector(widths.back(), rng);
    const auto [dx, dparams] = net.vjp(params, x, v);

    const auto fd_x = testing::central_difference(
        [&](std::span<const double> xp) { return dot(v, net.forward(params, xp)); }, x, 1e-5);
    const auto fd_p = testing::central_difference(
        [&](std::span<const double> pp) { return dot(v, net.forward(pp, x)); }, params, 1e-5);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      EXPECT_TRUE(testing::close(dx[i], fd_x[i], 1e-4, 1e-8)) << instance << " x" << i;
    }
    for (std::size_t i = 0; i < dparams.size(); ++i) {
      EXPECT_TRUE(testing::close(dparams[i], fd_p[i], 1e-4, 1e-8)) << instance << " p" << i;
    }
    ++checked;
  }
  EXPECT_GE(checked, 100u);
}

TEST(Mlp, TapeVjpAccumulates) {
  std::mt19937_64 rng(8);
  const Mlp net({3, 4, 2});
  std::vector<double> params(net.param_count());
  net.init_uniform(params, rng);
  const auto x = random_vector(3, rng);
  const auto v = random_vector(2, rng);
  Mlp::Tape tape;
  net.forward(params, x, tape);
  std::vector<double> dx(3, 1.0), dp(net.param_count(), 1.0);
  net.vjp(params, tape, v, dx, dp);
  const auto [ref_dx, ref_dp] = net.vjp(params, x, v);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(dx[i], 1.0 + ref_dx[i]);
  for (std::size_t i = 0; i < dp.size(); ++i) EXPECT_DOUBLE_EQ(dp[i], 1.0 + ref_dp[i]);
}

}  // namespace
}  // namespace jumpflow
