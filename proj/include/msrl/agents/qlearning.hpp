#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "msrl/error.hpp"
#include "msrl/rlenv.hpp"
#include "msrl/rng.hpp"

namespace msrl {

struct LearningParams {
  double alpha = 0.1;
  double gamma = 0.95;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_decay_steps = 20000;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidSpec, "alpha must lie in (0, 1]");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(ErrorCode::InvalidSpec, "gamma must lie in [0, 1)");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0))
      throw Error(ErrorCode::InvalidSpec, "epsilon bounds must lie in [0, 1]");
  }
};

/// Linear decay from start to end over `decay_steps`, then flat.
inline double epsilon_at(std::size_t step, double start, double end, std::size_t decay_steps) {
  if (decay_steps == 0 || step >= decay_steps) return end;
  const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
  return start + (end - start) * frac;
}

/// Q(s,a) <- Q(s,a) + alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)).
/// Pass max_next = 0 for terminal transitions.
inline double q_update(double q, double r, double max_next, double alpha, double gamma) {
  return q + alpha * (r + gamma * max_next - q);
}

inline double q_update(double q, double r, double max_next, const LearningParams& p) {
  return q_update(q, r, max_next, p.alpha, p.gamma);
}

/// Index of the largest value; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyActionSet, "no actions");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

/// Epsilon-greedy. Draws nothing from `rng` when epsilon is 0.
inline std::size_t select_action(std::span<const double> values, double epsilon, Rng& rng) {
  if (values.empty()) throw Error(ErrorCode::EmptyActionSet, "no actions");
  if (epsilon > 0.0 && rng.uniform() <= epsilon) return static_cast<std::size_t>(rng.below(values.size()));
  return argmax(values);
}

/// Uniform binning of [0, 1] features into a string key.
struct Discretizer {
  std::size_t bins = 4;

  std::string key(std::span<const double> state) const {
    static constexpr char kDigits[] = "0123456789abcdefghijklmnopqrstuvwxyz";
    std::string k(state.size(), '0');
    const auto b = std::clamp<std::size_t>(bins, 1, 36);
    for (std::size_t i = 0; i < state.size(); ++i) {
      auto idx = static_cast<std::size_t>(std::clamp(state[i], 0.0, 1.0) * static_cast<double>(b));
      k[i] = kDigits[std::min(idx, b - 1)];
    }
    return k;
  }
};

class QTable {
 public:
  QTable() = default;
  QTable(std::size_t actions, Discretizer discretizer = {}) : actions_(actions), disc_(discretizer) {}

  std::size_t action_count() const { return actions_; }
  const Discretizer& discretizer() const { return disc_; }
  std::size_t size() const { return table_.size(); }
  bool empty() const { return table_.empty(); }
  const std::map<std::string, std::vector<double>>& entries() const { return table_; }

  /// Missing states read as all zeros.
  std::vector<double> values(std::span<const double> state) const { return values_for(disc_.key(state)); }

  std::vector<double> values_for(const std::string& key) const {
    auto it = table_.find(key);
    return it == table_.end() ? std::vector<double>(actions_, 0.0) : it->second;
  }

  double& at(const std::string& key, std::size_t action) {
    auto [it, inserted] = table_.try_emplace(key, actions_, 0.0);
    return it->second.at(action);
  }

  double max_value(std::span<const double> state) const {
    const auto v = values(state);
    return v[argmax(v)];
  }

  std::size_t greedy(std::span<const double> state) const {
    const auto v = values(state);
    return argmax(v);
  }

  void save(std::ostream& out) const {
    out << "msrl-qtable 1\n";
    out << "actions " << actions_ << " bins " << disc_.bins << '\n';
    for (const auto& [k, v] : table_) {
      out << k;
      for (double x : v) out << ' ' << detail_format(x);
      out << '\n';
    }
  }

  static QTable load(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "msrl-qtable" || version != 1)
      throw Error(ErrorCode::ParseError, "not a version-1 Q-table");
    std::string tag_a, tag_b;
    std::size_t actions = 0, bins = 0;
    if (!(in >> tag_a >> actions >> tag_b >> bins) || tag_a != "actions" || tag_b != "bins")
      throw Error(ErrorCode::ParseError, "bad Q-table header");
    QTable q(actions, Discretizer{bins});
    std::string key;
    while (in >> key) {
      std::vector<double> v(actions);
      for (auto& x : v)
        if (!(in >> x)) throw Error(ErrorCode::ParseError, "truncated Q-table row '" + key + "'");
      q.table_.emplace(key, std::move(v));
    }
    return q;
  }

 private:
  static std::string detail_format(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
  }

  std::size_t actions_ = 0;
  Discretizer disc_;
  std::map<std::string, std::vector<double>> table_;
};

struct TabularOptions {
  std::size_t episodes = 1;
  std::size_t max_steps_per_episode = 1000;
  std::size_t max_total_steps = 0;  // 0: unlimited
  std::size_t bins = 4;
  std::uint64_t seed = 0;
};

struct TabularResult {
  QTable table;
  std::vector<double> returns;  // undiscounted, one per episode
  std::size_t steps = 0;
};

/// Epsilon-greedy Q-learning with one q_update per transition.
template <Environment Env>
TabularResult train_tabular(Env& env, const LearningParams& params, const TabularOptions& opts) {
  params.validate();
  TabularResult result{QTable(env.action_count(), Discretizer{opts.bins}), {}, 0};
  Rng rng(derive_seed(opts.seed, 11));
  for (std::size_t ep = 0; ep < opts.episodes; ++ep) {
    if (opts.max_total_steps && result.steps >= opts.max_total_steps) break;
    StateVector s = env.reset(derive_seed(opts.seed, 1000 + ep));
    double ret = 0.0;
    for (std::size_t t = 0; t < opts.max_steps_per_episode; ++t) {
      if (opts.max_total_steps && result.steps >= opts.max_total_steps) break;
      const auto key = result.table.discretizer().key(s);
      const auto values = result.table.values_for(key);
      const double eps =
          epsilon_at(result.steps, params.epsilon_start, params.epsilon_end, params.epsilon_decay_steps);
      const auto a = select_action(values, eps, rng);
      StepResult next = env.step(a);
      const double max_next = next.terminal ? 0.0 : result.table.max_value(next.state);
      double& q = result.table.at(key, a);
      q = q_update(q, next.reward, max_next, params);
      ret += next.reward;
      ++result.steps;
      s = std::move(next.state);
      if (next.terminal) break;
    }
    result.returns.push_back(ret);
  }
  return result;
}

}  // namespace msrl
