#include <gtest/gtest.h>

#include <sstream>
#include <vector>

#include "chain_mdp.hpp"
#include "msrl/agents/qlearning.hpp"

using namespace msrl;
using msrl::testing::ChainMdp;

namespace {

// One state, two actions; rewards drawn per step. Mean of action 0 is 0.3,
// of action 1 is 1.0.
class NoisyBandit {
 public:
  StateVector reset(std::uint64_t seed) {
    rng_ = Rng(seed);
    return {0.5};
  }
  StepResult step(std::size_t a) {
    const double r = a == 0 ? (rng_.uniform() <= 0.3 ? 1.0 : 0.0) : rng_.uniform(0.0, 2.0);
    return {{0.5}, r, true};
  }
  std::size_t action_count() const { return 2; }
  std::size_t state_size() const { return 1; }

 private:
  Rng rng_;
};

static_assert(Environment<ChainMdp>);
static_assert(Environment<NoisyBandit>);

}  // namespace

TEST(QUpdate, HandDerivedValues) {
  EXPECT_NEAR(q_update(0.0, 1.0, 2.0, 0.5, 0.9), 1.4, 1e-12);
  EXPECT_NEAR(q_update(1.0, -0.5, 1.0, 0.1, 0.99), 0.949, 1e-12);
}

TEST(QUpdate, ZeroStepLeavesValue) { EXPECT_EQ(q_update(3.25, 100.0, -7.0, 0.0, 0.9), 3.25); }

TEST(QUpdate, FixedPointIsStable) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double r = rng.uniform(-5.0, 5.0), max_next = rng.uniform(-5.0, 5.0);
    const double gamma = rng.uniform(0.0, 0.99), alpha = rng.uniform(0.0, 1.0);
    const double q = r + gamma * max_next;
    ASSERT_EQ(q_update(q, r, max_next, alpha, gamma), q);
  }
}

TEST(SelectAction, GreedyPicksMaximum) {
  Rng rng(1);
  EXPECT_EQ(select_action(std::vector<double>{1, 3, 2}, 0.0, rng), 1u);
  EXPECT_EQ(select_action(std::vector<double>{2, 2, 1}, 0.0, rng), 0u);
}

TEST(SelectAction, EmptyValuesThrow) {
  Rng rng(1);
  try {
    select_action(std::vector<double>{}, 0.0, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyActionSet);
  }
}

TEST(SelectAction, FullExplorationIsUniform) {
  Rng rng(2);
  std::vector<int> counts(4, 0);
  const std::vector<double> v{5, 1, 1, 1};
  for (int i = 0; i < 100000; ++i) ++counts[select_action(v, 1.0, rng)];
  for (int c : counts) EXPECT_NEAR(c / 1e5, 0.25, 0.01);
}

TEST(SelectAction, ConstantShiftKeepsGreedyChoice) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> v(4);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    auto shifted = v;
    const double c = rng.uniform(-100.0, 100.0);
    for (auto& x : shifted) x += c;
    ASSERT_EQ(select_action(v, 0.0, rng), select_action(shifted, 0.0, rng));
  }
}

TEST(Epsilon, LinearDecayThenFloor) {
  EXPECT_DOUBLE_EQ(epsilon_at(0, 1.0, 0.05, 100), 1.0);
  EXPECT_DOUBLE_EQ(epsilon_at(50, 1.0, 0.05, 100), 0.525);
  EXPECT_DOUBLE_EQ(epsilon_at(100, 1.0, 0.05, 100), 0.05);
  EXPECT_DOUBLE_EQ(epsilon_at(1000, 1.0, 0.05, 100), 0.05);
}

TEST(Discretizer, BinsEachFeature) {
  Discretizer d{4};
  EXPECT_EQ(d.key(std::vector<double>{0.0, 0.24, 0.26, 1.0}), d.key(std::vector<double>{0.1, 0.0, 0.4, 0.99}));
  EXPECT_NE(d.key(std::vector<double>{0.0}), d.key(std::vector<double>{0.3}));
}

TEST(QTable, MissingStatesReadZero) {
  QTable t(3);
  EXPECT_EQ(t.values(std::vector<double>{0.2, 0.9}), (std::vector<double>{0, 0, 0}));
  EXPECT_TRUE(t.empty());
}

TEST(QTable, SaveLoadRoundTrips) {
  QTable t(2, Discretizer{4});
  t.at("01", 0) = 0.1;
  t.at("01", 1) = -3.0e-7;
  t.at("32", 1) = 12345.678901234567;
  std::stringstream ss;
  t.save(ss);
  const auto back = QTable::load(ss);
  EXPECT_EQ(back.entries(), t.entries());
  EXPECT_EQ(back.action_count(), 2u);
  EXPECT_EQ(back.discretizer().bins, 4u);
}

TEST(TrainTabular, ZeroEpisodesGiveEmptyTable) {
  ChainMdp mdp;
  TabularOptions opts;
  opts.episodes = 0;
  const auto res = train_tabular(mdp, LearningParams{}, opts);
  EXPECT_TRUE(res.table.empty());
  EXPECT_TRUE(res.returns.empty());
}

TEST(TrainTabular, RecoversValueIterationPolicy) {
  ChainMdp mdp;
  LearningParams p;
  p.gamma = 0.8;
  const auto oracle = msrl::testing::value_iteration(mdp, p.gamma);
  ASSERT_EQ(oracle.policy, (std::vector<std::size_t>{0, 1, 1, 1, 1}));

  TabularOptions opts;
  opts.episodes = 100000;
  opts.max_steps_per_episode = mdp.max_steps;
  opts.max_total_steps = 50000;
  opts.seed = 3;
  const auto res = train_tabular(mdp, p, opts);
  EXPECT_LE(res.steps, 50000u);
  for (std::size_t s = 0; s < ChainMdp::kStates; ++s)
    EXPECT_EQ(res.table.greedy(ChainMdp::encode(s)), oracle.policy[s]) << "state " << s;
}

TEST(TrainTabular, ValuesStayWithinDiscountedRewardBounds) {
  ChainMdp mdp;
  LearningParams p;
  p.gamma = 0.8;
  p.alpha = 0.5;
  TabularOptions opts;
  opts.episodes = 2000;
  opts.max_steps_per_episode = mdp.max_steps;
  opts.seed = 8;
  const auto res = train_tabular(mdp, p, opts);
  const double hi = mdp.goal_reward / (1.0 - p.gamma);
  for (const auto& [key, values] : res.table.entries())
    for (double v : values) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, hi);
    }
}

TEST(TrainTabular, MyopicValuesConvergeToMeanReward) {
  NoisyBandit bandit;
  LearningParams p;
  p.gamma = 0.0;
  p.alpha = 0.01;
  p.epsilon_start = p.epsilon_end = 1.0;
  TabularOptions opts;
  opts.episodes = 40000;
  opts.seed = 5;
  const auto res = train_tabular(bandit, p, opts);
  const auto v = res.table.values(std::vector<double>{0.5});
  EXPECT_NEAR(v[0], 0.3, 0.1);
  EXPECT_NEAR(v[1], 1.0, 0.1);
}

TEST(TrainTabular, SameSeedSameResult) {
  ChainMdp mdp;
  TabularOptions opts;
  opts.episodes = 200;
  opts.max_steps_per_episode = 20;
  opts.seed = 4;
  const auto a = train_tabular(mdp, LearningParams{}, opts);
  const auto b = train_tabular(mdp, LearningParams{}, opts);
  EXPECT_EQ(a.returns, b.returns);
  EXPECT_EQ(a.table.entries(), b.table.entries());
}
