#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "gradcheck.hpp"
#include "msrl/agents/network.hpp"

using namespace msrl;

TEST(ValueNetwork, ZeroWeightsOutputBias) {
  ValueNetwork net({3, 4, 2});
  net.layers().back().bias = {0.25, -1.5};
  EXPECT_EQ(net.forward(std::vector<double>{9, -3, 0.5}), (std::vector<double>{0.25, -1.5}));
  EXPECT_EQ(forward(net, std::vector<double>{0, 0, 0}), (std::vector<double>{0.25, -1.5}));
}

TEST(ValueNetwork, HandComputedSinglePath) {
  ValueNetwork net({1, 1, 1});
  net.layers()[0].weights = {2.0};
  net.layers()[0].bias = {-1.0};
  net.layers()[1].weights = {3.0};
  net.layers()[1].bias = {0.5};
  EXPECT_DOUBLE_EQ(net.forward(std::vector<double>{2.0})[0], 3.0 * 3.0 + 0.5);
  EXPECT_DOUBLE_EQ(net.forward(std::vector<double>{0.0})[0], 0.5);  // hidden unit clipped by the rectifier
}

TEST(ValueNetwork, WrongInputLengthThrows) {
  ValueNetwork net({4, 3, 2}, 1);
  try {
    net.forward(std::vector<double>{1, 2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(ValueNetwork, BadArchitectureThrows) {
  EXPECT_THROW(ValueNetwork({4}), Error);
  EXPECT_THROW(ValueNetwork({4, 0, 2}), Error);
}

TEST(ValueNetwork, SeededInitIsDeterministicAndBounded) {
  ValueNetwork a({6, 8, 3}, 42), b({6, 8, 3}, 42), c({6, 8, 3}, 43);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  EXPECT_EQ(a.parameter_count(), 6u * 8 + 8 + 8 * 3 + 3);
  const double limit = std::sqrt(6.0 / 6.0);
  for (double w : a.layers()[0].weights) EXPECT_LE(std::abs(w), limit);
}

TEST(Backprop, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = msrl::testing::gradient_check(seed);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed;
    EXPECT_GT(r.parameters, 0u);
  }
}

TEST(SgdStep, ZeroLearningRateLeavesParameters) {
  ValueNetwork net({3, 5, 2}, 7);
  const auto before = net;
  const std::vector<double> s{0.1, 0.2, 0.3};
  const std::vector<QSample> batch{{s, 1, 4.0}};
  EXPECT_GT(sgd_step(net, batch, 0.0), 0.0);
  EXPECT_TRUE(net == before);
}

TEST(SgdStep, PerfectPredictionHasZeroLossAndGradient) {
  ValueNetwork net({3, 5, 2}, 7);
  const std::vector<double> s{0.1, -0.2, 0.3};
  const double q = net.forward(s)[1];
  const std::vector<QSample> batch{{s, 1, q}};
  Gradients g;
  EXPECT_EQ(loss_and_gradient(net, batch, &g), 0.0);
  for (const auto& l : g) {
    for (double w : l.weights) EXPECT_EQ(w, 0.0);
    for (double b : l.bias) EXPECT_EQ(b, 0.0);
  }
}

TEST(SgdStep, OnlyTakenActionMoves) {
  ValueNetwork net({2, 2});
  const std::vector<double> s{1.0, 0.0};
  const std::vector<QSample> batch{{s, 0, 1.0}};
  for (int i = 0; i < 200; ++i) sgd_step(net, batch, 0.1);
  const auto q = net.forward(s);
  EXPECT_NEAR(q[0], 1.0, 1e-6);
  EXPECT_EQ(q[1], 0.0);
}

TEST(SgdStep, NonFiniteLossThrows) {
  ValueNetwork net({2, 2}, 1);
  const std::vector<double> s{1.0, 0.0};
  const std::vector<QSample> batch{{s, 0, std::numeric_limits<double>::infinity()}};
  try {
    sgd_step(net, batch, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
  }
}

TEST(SyncTarget, CopiesExactlyAndFreezes) {
  ValueNetwork online({4, 6, 3}, 3);
  TargetNetwork target{ValueNetwork({4, 6, 3}), 500};
  sync_target(online, target);
  Rng rng(9);
  std::vector<std::vector<double>> states(100, std::vector<double>(4));
  for (auto& s : states)
    for (auto& x : s) x = rng.uniform(-1.0, 1.0);
  for (const auto& s : states) ASSERT_EQ(online.forward(s), target.net.forward(s));
  std::vector<std::vector<double>> before;
  for (const auto& s : states) before.push_back(target.net.forward(s));
  const std::vector<QSample> batch{{states[0], 2, 5.0}};
  for (int i = 0; i < 10; ++i) sgd_step(online, batch, 0.05);
  EXPECT_NE(online.forward(states[0]), before[0]);
  for (std::size_t i = 0; i < states.size(); ++i) ASSERT_EQ(target.net.forward(states[i]), before[i]);
}

TEST(SyncTarget, MismatchedLayersThrow) {
  ValueNetwork online({4, 6, 3}, 3);
  ValueNetwork target({4, 5, 3});
  try {
    sync_target(online, target);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ArchitectureMismatch);
  }
}

TEST(Serialization, RoundTripIsExact) {
  ValueNetwork net({5, 7, 3}, 11);
  std::stringstream ss;
  save_network(ss, net);
  EXPECT_TRUE(load_network(ss) == net);
  std::stringstream bad("msrl-valuenet 1\nlayers 2 2 2\n0.5\n");
  EXPECT_THROW(load_network(bad), Error);
}
