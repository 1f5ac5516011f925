#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "msrl/agents/network.hpp"
#include "msrl/agents/qlearning.hpp"
#include "msrl/agents/replay.hpp"
#include "msrl/error.hpp"
#include "msrl/rlenv.hpp"
#include "msrl/rng.hpp"

namespace msrl {

/// y_i = r_i for terminal transitions, r_i + gamma * max_a' target(s'_i)[a'] otherwise.
inline std::vector<double> td_targets(std::span<const Transition* const> batch, const ValueNetwork& target,
                                      double gamma) {
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = *batch[i];
    y[i] = t.reward;
    if (!t.terminal && gamma != 0.0) {
      const auto q = target.forward(t.next_state);
      y[i] += gamma * q[argmax(q)];
    }
  }
  return y;
}

inline std::vector<double> td_targets(std::span<const Transition> batch, const ValueNetwork& target, double gamma) {
  std::vector<const Transition*> ptrs(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) ptrs[i] = &batch[i];
  return td_targets(ptrs, target, gamma);
}

inline double sgd_step(ValueNetwork& net, std::span<const Transition* const> batch, std::span<const double> targets,
                       double learning_rate) {
  if (batch.size() != targets.size()) throw Error(ErrorCode::LengthMismatch, "one target per transition");
  std::vector<QSample> samples(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) samples[i] = {batch[i]->state, batch[i]->action, targets[i]};
  return sgd_step(net, samples, learning_rate);
}

struct DqnConfig {
  std::vector<std::size_t> hidden = {64, 64};
  double learning_rate = 1e-3;
  double gamma = 0.95;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_decay_steps = 20000;
  std::size_t replay_capacity = 10000;
  std::size_t batch_size = 32;
  std::size_t sync_interval = 500;
  std::size_t train_every = 1;     // environment steps per gradient step
  std::size_t warmup_steps = 0;    // no gradient steps before this many transitions (at least one batch)
  double reward_scale = 1.0;       // applied to rewards before they enter the replay buffer
  std::size_t episodes = 1;
  std::size_t max_steps_per_episode = 1000000;
  std::size_t max_total_steps = 0;  // 0: unlimited
  std::uint64_t seed = 0;
};

struct DqnResult {
  ValueNetwork online;
  ValueNetwork target;
  std::vector<double> returns;  // undiscounted, unscaled, one per episode
  std::vector<double> losses;   // mean batch loss per episode
  std::size_t steps = 0;
  std::size_t gradient_steps = 0;
};

inline std::vector<std::size_t> dqn_layer_sizes(std::size_t inputs, const std::vector<std::size_t>& hidden,
                                                std::size_t actions) {
  std::vector<std::size_t> sizes{inputs};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(actions);
  return sizes;
}

/// Epsilon-greedy interaction through the online network, uniform replay,
/// squared-TD-error gradient steps, and a target network refreshed every
/// `sync_interval` environment steps.
template <Environment Env>
DqnResult train_dqn(Env& env, const DqnConfig& cfg) {
  if (cfg.batch_size == 0) throw Error(ErrorCode::InvalidSpec, "batch_size must be positive");
  DqnResult res;
  res.online = ValueNetwork(dqn_layer_sizes(env.state_size(), cfg.hidden, env.action_count()),
                            derive_seed(cfg.seed, 21));
  res.target = res.online;
  ReplayBuffer replay(cfg.replay_capacity);
  Rng act_rng(derive_seed(cfg.seed, 22));
  Rng sample_rng(derive_seed(cfg.seed, 23));
  const std::size_t warmup = std::max(cfg.warmup_steps, cfg.batch_size);
  const std::size_t every = std::max<std::size_t>(cfg.train_every, 1);

  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    if (cfg.max_total_steps && res.steps >= cfg.max_total_steps) break;
    StateVector s = env.reset(derive_seed(cfg.seed, 1000 + ep));
    double ret = 0.0;
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    for (std::size_t t = 0; t < cfg.max_steps_per_episode; ++t) {
      if (cfg.max_total_steps && res.steps >= cfg.max_total_steps) break;
      const double eps = epsilon_at(res.steps, cfg.epsilon_start, cfg.epsilon_end, cfg.epsilon_decay_steps);
      std::size_t a = 0;
      if (eps > 0.0 && act_rng.uniform() <= eps) {
        a = static_cast<std::size_t>(act_rng.below(env.action_count()));
      } else {
        a = argmax(res.online.forward(s));
      }
      StepResult next = env.step(a);
      ret += next.reward;
      replay.push({s, a, next.reward * cfg.reward_scale, next.state, next.terminal});
      ++res.steps;

      if (replay.size() >= warmup && res.steps % every == 0) {
        const auto batch = replay.sample(cfg.batch_size, sample_rng);
        const auto y = td_targets(batch, res.target, cfg.gamma);
        loss_sum += sgd_step(res.online, batch, y, cfg.learning_rate);
        ++loss_n;
        ++res.gradient_steps;
      }
      if (cfg.sync_interval && res.steps % cfg.sync_interval == 0) sync_target(res.online, res.target);
      s = std::move(next.state);
      if (next.terminal) break;
    }
    res.returns.push_back(ret);
    res.losses.push_back(loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0);
  }
  return res;
}

}  // namespace msrl
