#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "msrl/agents/baselines.hpp"
#include "msrl/error.hpp"
#include "msrl/simcore.hpp"

namespace msrl {

/// Flat observation; every entry lies in [0, 1].
using StateVector = std::vector<double>;

inline constexpr std::size_t kFeaturesPerService = 6;

struct StepResult {
  StateVector state;
  double reward = 0.0;
  bool terminal = false;
};

/// Anything an agent can be trained against: the cluster environment below
/// as well as small hand-built MDPs used for verification.
template <class E>
concept Environment = requires(E env, const E cenv, std::size_t action, std::uint64_t seed) {
  { env.reset(seed) } -> std::convertible_to<StateVector>;
  { env.step(action) } -> std::same_as<StepResult>;
  { cenv.action_count() } -> std::convertible_to<std::size_t>;
  { cenv.state_size() } -> std::convertible_to<std::size_t>;
};

struct RewardWeights {
  std::vector<double> lambda;  // 1/ms, per service
  std::vector<double> alpha;   // per service

  static RewardWeights uniform(std::size_t n, double lambda = 0.01, double alpha = 0.5) {
    return {std::vector<double>(n, lambda), std::vector<double>(n, alpha)};
  }
};

/// sum_i (-lambda_i * R_i + alpha_i * U_i)
inline double reward(std::span<const double> response_ms, std::span<const double> utilization,
                     const RewardWeights& w) {
  const auto n = response_ms.size();
  if (utilization.size() != n || w.lambda.size() != n || w.alpha.size() != n)
    throw Error(ErrorCode::LengthMismatch, "reward inputs must all have one entry per service");
  double r = 0.0;
  for (std::size_t i = 0; i < n; ++i) r += -w.lambda[i] * response_ms[i] + w.alpha[i] * utilization[i];
  return r;
}

/// Per service: [cpu, memory, storage, network utilization, queue fill,
/// EWMA response / ewma_norm_ms], each clamped to [0, 1]. Utilization and
/// queue fill are averaged over the service's replicas.
inline StateVector observe(const Cluster& cluster, double ewma_norm_ms = 500.0) {
  const auto& svcs = cluster.replicas();
  StateVector out;
  out.reserve(svcs.size() * kFeaturesPerService);
  const double max_q = static_cast<double>(std::max<std::size_t>(cluster.queue_capacity(), 1));
  for (std::size_t s = 0; s < svcs.size(); ++s) {
    std::array<double, kResourceDims> util{};
    double qfill = 0.0;
    for (const auto& r : svcs[s]) {
      for (std::size_t d = 0; d < kResourceDims; ++d) util[d] += r.utilization(d);
      qfill += std::min(1.0, static_cast<double>(r.queue.size()) / max_q);
    }
    const double k = static_cast<double>(svcs[s].size());
    for (double u : util) out.push_back(std::clamp(u / k, 0.0, 1.0));
    out.push_back(std::clamp(qfill / k, 0.0, 1.0));
    const auto e = cluster.ewma_response_ms(s);
    out.push_back(e && ewma_norm_ms > 0.0 ? std::clamp(*e / ewma_norm_ms, 0.0, 1.0) : 0.0);
  }
  return out;
}

/// Routing context appended to the cluster observation: a one-hot of the
/// pending service, then (queue pressure, dominant utilization) for each
/// candidate replica slot. All zeros when nothing is pending.
inline StateVector decision_context(const Cluster& cluster, const DecisionPoint* dp, std::size_t replica_slots) {
  const std::size_t n = cluster.services().size();
  StateVector out(n + 2 * replica_slots, 0.0);
  if (!dp) return out;
  out[dp->service] = 1.0;
  const auto& reps = cluster.replicas()[dp->service];
  for (std::size_t r = 0; r < reps.size() && r < replica_slots; ++r) {
    const double q = static_cast<double>(reps[r].queue.size());
    out[n + 2 * r] = q / (q + 4.0);
    out[n + 2 * r + 1] = reps[r].dominant_utilization();
  }
  return out;
}

enum class ActionMode { Routing, Allocation };

inline constexpr std::array<double, 3> kCapacityTiers = {0.5, 1.0, 2.0};

struct RoutingCommand {
  std::size_t replica = 0;
  friend bool operator==(const RoutingCommand&, const RoutingCommand&) = default;
};
struct AllocationCommand {
  std::size_t service = 0;
  std::size_t tier = 0;
  double scale() const { return kCapacityTiers[tier]; }
  friend bool operator==(const AllocationCommand&, const AllocationCommand&) = default;
};
using Command = std::variant<RoutingCommand, AllocationCommand>;

struct ActionSpec {
  ActionMode mode = ActionMode::Routing;
  std::size_t count = 0;  // |A|
};

/// Routing: index picks a candidate replica (indices beyond a smaller
/// service's candidate list wrap around). Allocation: index = service * 3 +
/// tier, tiers {0.5x, 1x, 2x}.
inline Command decode_action(std::size_t index, const ActionSpec& spec, const DecisionPoint* dp = nullptr) {
  if (index >= spec.count)
    throw Error(ErrorCode::IndexOutOfRange,
                "action " + std::to_string(index) + " outside [0, " + std::to_string(spec.count) + ")");
  if (spec.mode == ActionMode::Allocation)
    return AllocationCommand{index / kCapacityTiers.size(), index % kCapacityTiers.size()};
  if (!dp || dp->candidates.empty()) throw Error(ErrorCode::EmptyActionSet, "routing action without candidates");
  return RoutingCommand{dp->candidates[index % dp->candidates.size()]};
}

/// What R_i becomes for a service with no completions or rejections in a
/// reward window. Rejections always count as timeout-penalty samples.
/// Auto: Zero in routing mode, where windows span a single placement and
/// are usually empty; TimeoutPenalty in allocation mode, where an empty
/// epoch means the service was starved.
enum class EmptyWindow { Auto, TimeoutPenalty, Zero };

struct EnvConfig {
  std::vector<ServiceSpec> services;
  NetworkModel network;
  ClusterOptions cluster;
  RewardWeights weights;  // empty: defaults
  double timeout_penalty_ms = 500.0;
  double ewma_norm_ms = 500.0;
  ActionMode mode = ActionMode::Routing;
  double epoch_ms = 1000.0;
  EmptyWindow empty_window = EmptyWindow::Auto;
};

/// Diagnostics for the window that a step() covered.
struct StepInfo {
  std::optional<PlaceOutcome> outcome;
  std::vector<double> response_ms;
  std::vector<double> utilization;
};

using ArrivalSource = std::function<std::vector<Request>(std::uint64_t seed)>;

/// The simulator as an MDP. In routing mode each step resolves one pending
/// placement; in allocation mode each step sets one service's capacity tier
/// and then runs one epoch with least-loaded routing.
class ClusterEnv {
 public:
  ClusterEnv(EnvConfig config, ArrivalSource arrivals) : config_(std::move(config)), arrivals_(std::move(arrivals)) {
    validate_specs(config_.services, config_.network);
    const auto n = config_.services.size();
    if (config_.weights.lambda.empty() && config_.weights.alpha.empty())
      config_.weights = RewardWeights::uniform(n);
    if (config_.weights.lambda.size() != n || config_.weights.alpha.size() != n)
      throw Error(ErrorCode::LengthMismatch, "reward weights need one entry per service");
    for (const auto& s : config_.services) slots_ = std::max(slots_, s.replicas);
    spec_.mode = config_.mode;
    spec_.count = config_.mode == ActionMode::Routing ? slots_ : n * kCapacityTiers.size();
  }

  std::size_t action_count() const { return spec_.count; }
  const ActionSpec& action_spec() const { return spec_; }
  std::size_t state_size() const {
    const auto n = config_.services.size();
    return n * kFeaturesPerService + n + 2 * slots_;
  }
  const EnvConfig& config() const { return config_; }
  const Cluster& cluster() const { return *cluster_; }
  Cluster& cluster() { return *cluster_; }
  const DecisionPoint* pending() const { return pending_ ? &*pending_ : nullptr; }
  bool done() const { return done_; }
  const StepInfo& last_info() const { return info_; }

  EmptyWindow empty_window_mode() const {
    if (config_.empty_window != EmptyWindow::Auto) return config_.empty_window;
    return config_.mode == ActionMode::Routing ? EmptyWindow::Zero : EmptyWindow::TimeoutPenalty;
  }

  StateVector reset(std::uint64_t seed) {
    cluster_.emplace(config_.services, config_.network, derive_seed(seed, 2), config_.cluster);
    for (auto& r : arrivals_(seed)) cluster_->inject_arrival(std::move(r));
    pending_.reset();
    done_ = false;
    if (config_.mode == ActionMode::Routing) {
      run_until_decision();
    } else {
      done_ = cluster_->pending_events() == 0;
    }
    begin_window();
    return observation();
  }

  StepResult step(std::size_t action) {
    if (!cluster_ || done_) throw Error(ErrorCode::EpisodeOver, "reset() the environment first");
    info_ = StepInfo{};
    const auto cmd = decode_action(action, spec_, pending());
    if (config_.mode == ActionMode::Routing) {
      const auto dp = std::move(*pending_);
      pending_.reset();
      info_.outcome = cluster_->place(dp, std::get<RoutingCommand>(cmd).replica);
      run_until_decision();
    } else {
      const auto& a = std::get<AllocationCommand>(cmd);
      cluster_->set_capacity_scale(a.service, a.scale());
      run_epoch();
    }
    StepResult out;
    out.reward = close_window();
    out.terminal = done_;
    out.state = observation();
    begin_window();
    return out;
  }

  StateVector observation() const {
    auto s = observe(*cluster_, config_.ewma_norm_ms);
    auto ctx = decision_context(*cluster_, pending(), slots_);
    s.insert(s.end(), ctx.begin(), ctx.end());
    return s;
  }

 private:
  void run_until_decision() {
    while (cluster_->pending_events() > 0) {
      auto r = cluster_->advance();
      if (r.decision) {
        pending_ = std::move(r.decision);
        return;
      }
    }
    done_ = true;
  }

  void run_epoch() {
    cluster_->schedule_timer(cluster_->clock() + std::max<SimTime>(1, ms_to_ticks(config_.epoch_ms)));
    while (cluster_->pending_events() > 0) {
      auto r = cluster_->advance();
      if (r.decision) {
        cluster_->place(*r.decision, baseline_least_loaded(*cluster_, *r.decision));
      } else if (r.event.kind == EventKind::Timer) {
        break;
      }
    }
    done_ = cluster_->pending_events() == 0;
  }

  void begin_window() {
    cluster_->sync_accounting();
    window_start_ = cluster_->clock();
    const auto& svcs = cluster_->replicas();
    util_mark_.assign(svcs.size(), 0.0);
    for (std::size_t s = 0; s < svcs.size(); ++s) util_mark_[s] = total_util_integral(s);
    cluster_->take_window();
  }

  double total_util_integral(std::size_t s) const {
    double acc = 0.0;
    for (const auto& r : cluster_->replicas()[s]) acc += r.util_integral.sum();
    return acc;
  }

  double instantaneous_util(std::size_t s) const {
    double acc = 0.0;
    const auto& reps = cluster_->replicas()[s];
    for (const auto& r : reps)
      for (std::size_t d = 0; d < kResourceDims; ++d) acc += r.utilization(d);
    return acc / static_cast<double>(reps.size() * kResourceDims);
  }

  double close_window() {
    cluster_->sync_accounting();
    const auto windows = cluster_->take_window();
    const auto n = windows.size();
    info_.response_ms.assign(n, 0.0);
    info_.utilization.assign(n, 0.0);
    const double dt_ms = ticks_to_ms(cluster_->clock() - window_start_);
    const double empty_value = empty_window_mode() == EmptyWindow::Zero ? 0.0 : config_.timeout_penalty_ms;
    for (std::size_t s = 0; s < n; ++s) {
      const auto& w = windows[s];
      const auto samples = w.completions + w.rejections;
      info_.response_ms[s] =
          samples == 0 ? empty_value
                       : (w.response_sum_ms + static_cast<double>(w.rejections) * config_.timeout_penalty_ms) /
                             static_cast<double>(samples);
      if (dt_ms > 0.0) {
        const double denom = dt_ms * static_cast<double>(cluster_->replicas()[s].size() * kResourceDims);
        info_.utilization[s] = std::clamp((total_util_integral(s) - util_mark_[s]) / denom, 0.0, 1.0);
      } else {
        info_.utilization[s] = instantaneous_util(s);
      }
    }
    return reward(info_.response_ms, info_.utilization, config_.weights);
  }

  EnvConfig config_;
  ArrivalSource arrivals_;
  ActionSpec spec_;
  std::size_t slots_ = 0;
  std::optional<Cluster> cluster_;
  std::optional<DecisionPoint> pending_;
  bool done_ = true;
  SimTime window_start_ = 0;
  std::vector<double> util_mark_;
  StepInfo info_;
};

}  // namespace msrl
