#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "msrl/agents/baselines.hpp"
#include "msrl/agents/dqn.hpp"
#include "msrl/agents/qlearning.hpp"
#include "msrl/bench/config.hpp"
#include "msrl/metrics.hpp"
#include "msrl/rlenv.hpp"
#include "msrl/workload.hpp"

namespace msrl::bench {

/// Evaluation seeds are offset from the configured seeds so that no
/// evaluation episode replays a training trace.
inline constexpr std::uint64_t kEvalSeedOffset = 1000000;

struct RunRecord {
  std::uint64_t seed = 0;  // configured seed; the episode ran on seed + kEvalSeedOffset
  MetricsReport report;
};

/// One (axis value, scheduler) cell: per-seed reports plus their aggregate.
/// Aggregate rates and times are seed means; counts are totals over seeds.
struct Cell {
  std::string axis_value;
  SchedulerKind scheduler = SchedulerKind::Static;
  std::vector<RunRecord> runs;
  MetricsReport mean;
  MetricsReport stddev;  // sample standard deviation of the rate fields; counts are zero
};

struct SweepResult {
  std::string axis;  // "compare", "load", "latency" or "resource"
  std::vector<std::string> values;
  std::vector<Cell> cells;  // value-major, schedulers in config order

  const Cell& at(std::size_t value_index, std::size_t scheduler_index) const {
    const auto per = cells.size() / std::max<std::size_t>(values.size(), 1);
    return cells.at(value_index * per + scheduler_index);
  }
};

namespace detail {

inline std::vector<Request> load_trace_arrivals(const std::string& path, std::size_t entry) {
  return trace_to_arrivals(load_trace(path), entry);
}

inline ArrivalSource arrival_source(const ExperimentConfig& c, double horizon_ms) {
  if (c.workload.trace_path) {
    auto services = c.services();
    const auto entry = Cluster(services, c.network, 0).entry_service();
    auto arrivals = std::make_shared<std::vector<Request>>(load_trace_arrivals(*c.workload.trace_path, entry));
    return [arrivals](std::uint64_t) { return *arrivals; };
  }
  const double rate = c.workload.base_rate_per_ms;
  const LoadLevel level = c.workload.load_level;
  return [rate, level, horizon_ms](std::uint64_t seed) { return generate_arrivals(rate, level, horizon_ms, seed); };
}

inline EnvConfig env_config(const ExperimentConfig& c) {
  EnvConfig e;
  e.services = c.services();
  e.network = c.network;
  e.cluster.max_queue = c.max_queue;
  e.weights = reward_weights(c);
  e.timeout_penalty_ms = c.reward.timeout_penalty_ms;
  e.ewma_norm_ms = c.reward.ewma_norm_ms;
  e.mode = c.agent.mode;
  e.epoch_ms = c.agent.epoch_ms;
  e.empty_window = c.agent.empty_window;
  return e;
}

// Action index that places on `replica` in routing mode.
inline std::size_t routing_action(const DecisionPoint& dp, std::size_t replica) {
  const auto it = std::find(dp.candidates.begin(), dp.candidates.end(), replica);
  return static_cast<std::size_t>(it - dp.candidates.begin());
}

using Policy = std::function<std::size_t(const ClusterEnv&, const StateVector&)>;

// In allocation mode the fixed baselines keep every service at the 1x tier;
// random draws a uniform allocation action. Routing inside an epoch is
// least-loaded regardless of the scheduler.
inline Policy baseline_policy(SchedulerKind kind, const ExperimentConfig& c, std::uint64_t seed) {
  if (c.agent.mode == ActionMode::Allocation) {
    if (kind == SchedulerKind::Random) {
      auto rng = std::make_shared<Rng>(derive_seed(seed, 31));
      return [rng](const ClusterEnv& env, const StateVector&) { return rng->below(env.action_count()); };
    }
    return [](const ClusterEnv&, const StateVector&) -> std::size_t { return 1; };
  }
  switch (kind) {
    case SchedulerKind::RoundRobin: {
      auto rr = std::make_shared<RoundRobin>();
      return [rr](const ClusterEnv& env, const StateVector&) {
        return routing_action(*env.pending(), (*rr)(*env.pending()));
      };
    }
    case SchedulerKind::LeastLoaded:
      return [](const ClusterEnv& env, const StateVector&) {
        return routing_action(*env.pending(), baseline_least_loaded(env.cluster(), *env.pending()));
      };
    case SchedulerKind::Random: {
      auto rr = std::make_shared<RandomRouter>(derive_seed(seed, 31));
      return [rr](const ClusterEnv& env, const StateVector&) {
        return routing_action(*env.pending(), (*rr)(*env.pending()));
      };
    }
    default:
      return [](const ClusterEnv& env, const StateVector&) {
        return routing_action(*env.pending(), baseline_static(*env.pending()));
      };
  }
}

// Greedy policies of the learners, trained once on the training arrivals.
inline Policy trained_policy(SchedulerKind kind, const ExperimentConfig& c) {
  ClusterEnv env(env_config(c), arrival_source(c, c.workload.train_horizon_ms));
  if (kind == SchedulerKind::Dqn) {
    auto net = std::make_shared<ValueNetwork>(train_dqn(env, dqn_config(c)).online);
    return [net](const ClusterEnv&, const StateVector& s) { return argmax(net->forward(s)); };
  }
  TabularOptions opts;
  opts.episodes = c.agent.train_episodes;
  opts.max_steps_per_episode = 100000000;
  opts.bins = c.agent.bins;
  opts.seed = c.train_seed;
  auto table = std::make_shared<QTable>(train_tabular(env, tabular_params(c), opts).table);
  return [table](const ClusterEnv&, const StateVector& s) { return table->greedy(s); };
}

inline MetricsReport evaluate(const ExperimentConfig& c, const Policy& policy, std::uint64_t eval_seed) {
  ClusterEnv env(env_config(c), arrival_source(c, c.workload.horizon_ms));
  auto s = env.reset(eval_seed);
  while (!env.done()) s = env.step(policy(env, s)).state;
  auto rep = summarize(env.cluster(), c.slo_ms, c.energy);
  if (!rep.conserved()) throw std::logic_error("request conservation violated");
  return rep;
}

// Fills cost_efficiency_pct across schedulers that share a seed. Schedulers
// without completions score 0 and do not enter the minimum.
inline void assign_cost_efficiency(std::vector<MetricsReport*>& reports) {
  std::vector<MetricsReport> served;
  std::vector<MetricsReport*> targets;
  for (auto* r : reports) {
    if (r->completed > 0) {
      served.push_back(*r);
      targets.push_back(r);
    } else {
      r->cost_efficiency_pct = 0.0;
    }
  }
  if (served.empty()) return;
  const auto eff = cost_efficiency(served);
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i]->cost_efficiency_pct = eff[i];
}

template <class Get>
void mean_std(const std::vector<RunRecord>& runs, Get get, double& mean, double& sd) {
  const auto n = static_cast<double>(runs.size());
  double sum = 0.0;
  for (const auto& r : runs) sum += get(r.report);
  mean = sum / n;
  double ss = 0.0;
  for (const auto& r : runs) ss += (get(r.report) - mean) * (get(r.report) - mean);
  sd = runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

inline void aggregate(Cell& cell) {
  auto& m = cell.mean;
  auto& s = cell.stddev;
  m = s = MetricsReport{};
  if (cell.runs.empty()) return;
  mean_std(cell.runs, [](const MetricsReport& r) { return r.mean_response_ms; }, m.mean_response_ms, s.mean_response_ms);
  mean_std(cell.runs, [](const MetricsReport& r) { return r.p95_response_ms; }, m.p95_response_ms, s.p95_response_ms);
  mean_std(cell.runs, [](const MetricsReport& r) { return r.throughput_rps; }, m.throughput_rps, s.throughput_rps);
  for (std::size_t d = 0; d < kResourceDims; ++d)
    mean_std(cell.runs, [d](const MetricsReport& r) { return r.utilization_pct.per_dimension[d]; },
             m.utilization_pct.per_dimension[d], s.utilization_pct.per_dimension[d]);
  mean_std(cell.runs, [](const MetricsReport& r) { return r.utilization_pct.overall; }, m.utilization_pct.overall,
           s.utilization_pct.overall);
  mean_std(cell.runs, [](const MetricsReport& r) { return r.energy_joules; }, m.energy_joules, s.energy_joules);
  mean_std(cell.runs, [](const MetricsReport& r) { return r.cost_efficiency_pct; }, m.cost_efficiency_pct,
           s.cost_efficiency_pct);
  mean_std(cell.runs, [](const MetricsReport& r) { return r.scheduling_efficiency_pct; },
           m.scheduling_efficiency_pct, s.scheduling_efficiency_pct);
  for (const auto& r : cell.runs) {
    m.offered += r.report.offered;
    m.completed += r.report.completed;
    m.rejected += r.report.rejected;
    m.in_flight_at_end += r.report.in_flight_at_end;
  }
}

// Trains the learners for this cell's config, evaluates every scheduler on
// every seed, and appends one Cell per scheduler.
inline void run_cell(const ExperimentConfig& c, const std::string& axis_value, std::vector<Cell>& out) {
  std::vector<Cell> cells;
  std::vector<Policy> trained(c.schedulers.size());
  for (std::size_t k = 0; k < c.schedulers.size(); ++k) {
    if (is_learning(c.schedulers[k])) trained[k] = trained_policy(c.schedulers[k], c);
    Cell cell;
    cell.axis_value = axis_value;
    cell.scheduler = c.schedulers[k];
    cells.push_back(std::move(cell));
  }
  for (auto seed : c.seeds) {
    const auto eval_seed = seed + kEvalSeedOffset;
    for (std::size_t k = 0; k < c.schedulers.size(); ++k) {
      const auto policy = trained[k] ? trained[k] : baseline_policy(c.schedulers[k], c, eval_seed);
      cells[k].runs.push_back({seed, evaluate(c, policy, eval_seed)});
    }
    std::vector<MetricsReport*> same_seed;
    for (auto& cell : cells) same_seed.push_back(&cell.runs.back().report);
    assign_cost_efficiency(same_seed);
  }
  for (auto& cell : cells) {
    aggregate(cell);
    out.push_back(std::move(cell));
  }
}

inline std::string format_axis_value(double v) { return msrl::detail::format_double(v); }

}  // namespace detail

inline SweepResult run_compare(const ExperimentConfig& c) {
  SweepResult r;
  r.axis = "compare";
  r.values = {std::string(to_string(c.workload.load_level))};
  detail::run_cell(c, r.values.front(), r.cells);
  return r;
}

inline SweepResult sweep_load(const ExperimentConfig& c) {
  SweepResult r;
  r.axis = "load";
  for (auto level : c.sweeps.load_levels) {
    auto cc = c;
    cc.workload.load_level = level;
    r.values.emplace_back(to_string(level));
    detail::run_cell(cc, r.values.back(), r.cells);
  }
  return r;
}

inline SweepResult sweep_latency(const ExperimentConfig& c) {
  SweepResult r;
  r.axis = "latency";
  for (double ms : c.sweeps.latencies_ms) {
    auto cc = c;
    cc.network.per_hop_latency_ms = ms;
    r.values.push_back(detail::format_axis_value(ms));
    detail::run_cell(cc, r.values.back(), r.cells);
  }
  return r;
}

/// Every service takes the swept profile's demand, including services with
/// an explicit demand in the config.
inline SweepResult sweep_resource(const ExperimentConfig& c) {
  SweepResult r;
  r.axis = "resource";
  for (auto profile : c.sweeps.profiles) {
    auto cc = c;
    cc.workload.resource_profile = profile;
    for (auto& t : cc.topology) t.explicit_demand = false;
    r.values.emplace_back(to_string(profile));
    detail::run_cell(cc, r.values.back(), r.cells);
  }
  return r;
}

/// Runs the experiments named in the config, in config order.
inline std::vector<SweepResult> run_experiments(const ExperimentConfig& c) {
  std::vector<SweepResult> out;
  for (const auto& e : c.experiments) {
    if (e == "compare") out.push_back(run_compare(c));
    else if (e == "sweep_load") out.push_back(sweep_load(c));
    else if (e == "sweep_latency") out.push_back(sweep_latency(c));
    else if (e == "sweep_resource") out.push_back(sweep_resource(c));
  }
  return out;
}

}  // namespace msrl::bench
