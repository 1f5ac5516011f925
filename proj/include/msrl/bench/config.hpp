#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "msrl/agents/dqn.hpp"
#include "msrl/agents/qlearning.hpp"
#include "msrl/error.hpp"
#include "msrl/metrics.hpp"
#include "msrl/rlenv.hpp"
#include "msrl/simcore.hpp"
#include "msrl/workload.hpp"

namespace msrl::bench {

using nlohmann::json;

inline constexpr int kConfigVersion = 1;

enum class SchedulerKind { Static, RoundRobin, LeastLoaded, Random, QLearning, Dqn };

inline constexpr std::array<SchedulerKind, 6> kAllSchedulers = {SchedulerKind::Static,      SchedulerKind::RoundRobin,
                                                                SchedulerKind::LeastLoaded, SchedulerKind::Random,
                                                                SchedulerKind::QLearning,   SchedulerKind::Dqn};

constexpr std::string_view to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::Static: return "static";
    case SchedulerKind::RoundRobin: return "round_robin";
    case SchedulerKind::LeastLoaded: return "least_loaded";
    case SchedulerKind::Random: return "random";
    case SchedulerKind::QLearning: return "qlearning";
    case SchedulerKind::Dqn: return "dqn";
  }
  return "static";
}

constexpr bool is_learning(SchedulerKind k) { return k == SchedulerKind::QLearning || k == SchedulerKind::Dqn; }

struct WorkloadConfig {
  LoadLevel load_level = LoadLevel::Medium;
  std::optional<std::string> trace_path;
  double base_rate_per_ms = 0.08;
  double horizon_ms = 20000.0;
  double train_horizon_ms = 10000.0;
  ResourceProfile resource_profile = ResourceProfile::CpuBound;
  double demand_base = 1.0;
  double demand_skew = 4.0;
};

struct AgentConfig {
  ActionMode mode = ActionMode::Routing;
  double epoch_ms = 1000.0;
  EmptyWindow empty_window = EmptyWindow::Auto;
  std::size_t train_episodes = 6;
  // tabular
  double alpha = 0.1;
  std::size_t bins = 4;
  // shared
  double gamma = 0.99;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_decay_steps = 20000;
  // dqn
  double learning_rate = 1e-3;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t replay_capacity = 10000;
  std::size_t batch_size = 32;
  std::size_t sync_interval = 500;
  std::size_t train_every = 4;
  double reward_scale = 0.05;
};

struct RewardConfig {
  std::vector<double> lambda;  // empty: 0.01 for every service
  std::vector<double> alpha;   // empty: 0.5 for every service
  double timeout_penalty_ms = 500.0;
  double ewma_norm_ms = 500.0;
};

struct SweepAxes {
  std::vector<LoadLevel> load_levels = {kLoadLevels.begin(), kLoadLevels.end()};
  std::vector<double> latencies_ms = {10.0, 20.0, 30.0, 40.0, 50.0};
  std::vector<ResourceProfile> profiles = {kResourceProfiles.begin(), kResourceProfiles.end()};
};

/// One service entry of the topology. Demand is optional: when absent the
/// workload's resource profile decides it.
struct TopologyService {
  ServiceSpec spec;
  bool explicit_demand = false;
};

struct ExperimentConfig {
  std::vector<TopologyService> topology;
  WorkloadConfig workload;
  NetworkModel network{10.0, 0.2};
  std::size_t max_queue = 64;
  std::vector<SchedulerKind> schedulers = {kAllSchedulers.begin(), kAllSchedulers.end()};
  AgentConfig agent;
  RewardConfig reward;
  EnergyModel energy;
  double slo_ms = 250.0;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::uint64_t train_seed = 1;
  std::string output_dir = "out";
  std::vector<std::string> experiments = {"compare"};
  SweepAxes sweeps;

  /// Service specs with profile-derived demands filled in.
  std::vector<ServiceSpec> services() const {
    std::vector<ServiceSpec> out;
    for (const auto& t : topology) {
      auto s = t.spec;
      if (!t.explicit_demand)
        s.demand_per_request = profile_demand(workload.resource_profile, workload.demand_base, workload.demand_skew);
      out.push_back(std::move(s));
    }
    return out;
  }
};

/// gateway -> auth -> logic -> store, three replicas each.
inline std::vector<TopologyService> reference_topology() {
  struct Row {
    const char* name;
    double service_ms;
  };
  static constexpr Row rows[] = {{"gateway", 8.0}, {"auth", 12.0}, {"logic", 20.0}, {"store", 16.0}};
  std::vector<TopologyService> out;
  for (std::size_t i = 0; i < std::size(rows); ++i) {
    TopologyService t;
    t.spec.name = rows[i].name;
    t.spec.replicas = 3;
    t.spec.capacity_per_replica = ResourceVector::uniform(8.0);
    t.spec.base_service_time_ms = rows[i].service_ms;
    if (i + 1 < std::size(rows)) t.spec.downstream = {i + 1};
    out.push_back(std::move(t));
  }
  return out;
}

inline ExperimentConfig reference_config() {
  ExperimentConfig c;
  c.topology = reference_topology();
  return c;
}

namespace detail {

// Walks a JSON object, rejecting keys that no reader claimed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  /// Throws for the first key no reader asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) throw ConfigError(child(it.key()), "unknown field");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  std::string child(const std::string& key) const { return path_ + "." + key; }

  template <class T>
  void read(const std::string& key, T& out) {
    if (const json* v = get(key)) out = as<T>(*v, child(key));
  }

  template <class T>
  static T as(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<std::int64_t>() < 0))
        throw ConfigError(path, "expected a non-negative integer");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path, "expected a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path, "expected a string");
      return v.get<std::string>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class T>
std::vector<T> read_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(ObjectReader::as<T>(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

/// Scalar or per-service array.
inline std::vector<double> read_weights(const json& v, const std::string& path) {
  if (v.is_number()) return {v.get<double>()};
  return read_array<double>(v, path);
}

inline ResourceVector read_resources(const json& v, const std::string& path) {
  ObjectReader r(v, path);
  ResourceVector out;
  r.read("cpu", out.cpu);
  r.read("memory", out.memory);
  r.read("storage", out.storage);
  r.read("network", out.network);
  r.finish();
  if (!out.valid()) throw ConfigError(path, "components must be finite and non-negative");
  return out;
}

template <class Enum, class Parse>
Enum read_enum(const json& v, const std::string& path, Parse parse, std::string_view expected) {
  const auto s = ObjectReader::as<std::string>(v, path);
  auto e = parse(s);
  if (!e) throw ConfigError(path, "unknown value '" + s + "', expected one of " + std::string(expected));
  return *e;
}

inline std::optional<SchedulerKind> parse_scheduler(std::string_view s) {
  for (auto k : kAllSchedulers)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& root) {
  using detail::ObjectReader;
  ExperimentConfig c = reference_config();
  ObjectReader top(root, "$");
  const json* version = top.get("version");
  if (!version) throw ConfigError("$.version", "required");
  if (ObjectReader::as<int>(*version, "$.version") != kConfigVersion)
    throw ConfigError("$.version", "unsupported version (expected " + std::to_string(kConfigVersion) + ")");

  if (const json* topo = top.get("topology")) {
    ObjectReader tr(*topo, "$.topology");
    const json* services = tr.get("services");
    if (!services || !services->is_array() || services->empty())
      throw ConfigError("$.topology.services", "expected a non-empty array");
    tr.finish();
    c.topology.clear();
    for (std::size_t i = 0; i < services->size(); ++i) {
      const std::string p = "$.topology.services[" + std::to_string(i) + "]";
      ObjectReader sr((*services)[i], p);
      TopologyService t;
      t.spec.name = "service" + std::to_string(i);
      sr.read("name", t.spec.name);
      sr.read("replicas", t.spec.replicas);
      sr.read("base_service_time_ms", t.spec.base_service_time_ms);
      if (const json* cap = sr.get("capacity")) {
        t.spec.capacity_per_replica = detail::read_resources(*cap, p + ".capacity");
      } else {
        throw ConfigError(p + ".capacity", "required");
      }
      if (const json* d = sr.get("demand")) {
        t.spec.demand_per_request = detail::read_resources(*d, p + ".demand");
        t.explicit_demand = true;
      }
      if (const json* ds = sr.get("downstream")) t.spec.downstream = detail::read_array<std::size_t>(*ds, p + ".downstream");
      sr.finish();
      if (t.spec.replicas == 0) throw ConfigError(p + ".replicas", "must be >= 1");
      if (!(t.spec.base_service_time_ms > 0.0)) throw ConfigError(p + ".base_service_time_ms", "must be > 0");
      c.topology.push_back(std::move(t));
    }
  }

  if (const json* w = top.get("workload")) {
    ObjectReader wr(*w, "$.workload");
    if (const json* l = wr.get("load_level"))
      c.workload.load_level =
          detail::read_enum<LoadLevel>(*l, "$.workload.load_level", parse_load_level, "low|medium|high|ultra_high");
    if (const json* t = wr.get("trace_path")) c.workload.trace_path = ObjectReader::as<std::string>(*t, "$.workload.trace_path");
    wr.read("base_rate_per_ms", c.workload.base_rate_per_ms);
    wr.read("horizon_ms", c.workload.horizon_ms);
    wr.read("train_horizon_ms", c.workload.train_horizon_ms);
    if (const json* p = wr.get("resource_profile"))
      c.workload.resource_profile = detail::read_enum<ResourceProfile>(
          *p, "$.workload.resource_profile", parse_resource_profile,
          "cpu_bound|memory_bound|storage_bound|network_bound");
    wr.read("demand_base", c.workload.demand_base);
    wr.read("demand_skew", c.workload.demand_skew);
    wr.finish();
    if (!(c.workload.base_rate_per_ms > 0.0)) throw ConfigError("$.workload.base_rate_per_ms", "must be > 0");
    if (!(c.workload.horizon_ms > 0.0)) throw ConfigError("$.workload.horizon_ms", "must be > 0");
    if (!(c.workload.train_horizon_ms > 0.0)) throw ConfigError("$.workload.train_horizon_ms", "must be > 0");
    if (!(c.workload.demand_base >= 0.0) || !(c.workload.demand_skew >= 0.0))
      throw ConfigError("$.workload.demand_skew", "demand_base and demand_skew must be >= 0");
  }

  if (const json* n = top.get("network")) {
    ObjectReader nr(*n, "$.network");
    nr.read("per_hop_latency_ms", c.network.per_hop_latency_ms);
    nr.read("jitter_fraction", c.network.jitter_fraction);
    nr.finish();
    if (!(c.network.per_hop_latency_ms >= 0.0)) throw ConfigError("$.network.per_hop_latency_ms", "must be >= 0");
    if (!(c.network.jitter_fraction >= 0.0 && c.network.jitter_fraction < 1.0))
      throw ConfigError("$.network.jitter_fraction", "must lie in [0, 1)");
  }

  if (const json* cl = top.get("cluster")) {
    ObjectReader cr(*cl, "$.cluster");
    cr.read("max_queue", c.max_queue);
    cr.finish();
  }

  if (const json* s = top.get("schedulers")) {
    if (!s->is_array()) throw ConfigError("$.schedulers", "expected an array");
    c.schedulers.clear();
    for (std::size_t i = 0; i < s->size(); ++i)
      c.schedulers.push_back(detail::read_enum<SchedulerKind>(
          (*s)[i], "$.schedulers[" + std::to_string(i) + "]", detail::parse_scheduler,
          "static|round_robin|least_loaded|random|qlearning|dqn"));
  }
  if (c.schedulers.empty()) throw ConfigError("$.schedulers", "at least one scheduler is required");

  if (const json* a = top.get("agent")) {
    ObjectReader ar(*a, "$.agent");
    if (const json* m = ar.get("mode"))
      c.agent.mode = detail::read_enum<ActionMode>(
          *m, "$.agent.mode",
          [](std::string_view v) -> std::optional<ActionMode> {
            if (v == "routing") return ActionMode::Routing;
            if (v == "allocation") return ActionMode::Allocation;
            return std::nullopt;
          },
          "routing|allocation");
    if (const json* e = ar.get("empty_window"))
      c.agent.empty_window = detail::read_enum<EmptyWindow>(
          *e, "$.agent.empty_window",
          [](std::string_view v) -> std::optional<EmptyWindow> {
            if (v == "auto") return EmptyWindow::Auto;
            if (v == "timeout_penalty") return EmptyWindow::TimeoutPenalty;
            if (v == "zero") return EmptyWindow::Zero;
            return std::nullopt;
          },
          "auto|timeout_penalty|zero");
    ar.read("epoch_ms", c.agent.epoch_ms);
    ar.read("train_episodes", c.agent.train_episodes);
    ar.read("alpha", c.agent.alpha);
    ar.read("bins", c.agent.bins);
    ar.read("gamma", c.agent.gamma);
    ar.read("epsilon_start", c.agent.epsilon_start);
    ar.read("epsilon_end", c.agent.epsilon_end);
    ar.read("epsilon_decay_steps", c.agent.epsilon_decay_steps);
    ar.read("learning_rate", c.agent.learning_rate);
    if (const json* h = ar.get("hidden")) c.agent.hidden = detail::read_array<std::size_t>(*h, "$.agent.hidden");
    ar.read("replay_capacity", c.agent.replay_capacity);
    ar.read("batch_size", c.agent.batch_size);
    ar.read("sync_interval", c.agent.sync_interval);
    ar.read("train_every", c.agent.train_every);
    ar.read("reward_scale", c.agent.reward_scale);
    ar.finish();
    if (!(c.agent.alpha > 0.0 && c.agent.alpha <= 1.0)) throw ConfigError("$.agent.alpha", "must lie in (0, 1]");
    if (!(c.agent.gamma >= 0.0 && c.agent.gamma < 1.0)) throw ConfigError("$.agent.gamma", "must lie in [0, 1)");
    if (!(c.agent.epsilon_start >= 0.0 && c.agent.epsilon_start <= 1.0))
      throw ConfigError("$.agent.epsilon_start", "must lie in [0, 1]");
    if (!(c.agent.epsilon_end >= 0.0 && c.agent.epsilon_end <= 1.0))
      throw ConfigError("$.agent.epsilon_end", "must lie in [0, 1]");
    if (c.agent.batch_size == 0) throw ConfigError("$.agent.batch_size", "must be >= 1");
    if (c.agent.replay_capacity == 0) throw ConfigError("$.agent.replay_capacity", "must be >= 1");
    if (!(c.agent.epoch_ms > 0.0)) throw ConfigError("$.agent.epoch_ms", "must be > 0");
    for (auto h : c.agent.hidden)
      if (h == 0) throw ConfigError("$.agent.hidden", "layer sizes must be >= 1");
  }

  if (const json* r = top.get("reward")) {
    ObjectReader rr(*r, "$.reward");
    if (const json* l = rr.get("lambda")) c.reward.lambda = detail::read_weights(*l, "$.reward.lambda");
    if (const json* al = rr.get("alpha")) c.reward.alpha = detail::read_weights(*al, "$.reward.alpha");
    rr.read("timeout_penalty_ms", c.reward.timeout_penalty_ms);
    rr.read("ewma_norm_ms", c.reward.ewma_norm_ms);
    rr.finish();
    for (double v : c.reward.lambda)
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("$.reward.lambda", "weights must be finite and >= 0");
    for (double v : c.reward.alpha)
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("$.reward.alpha", "weights must be finite and >= 0");
  }

  if (const json* e = top.get("energy")) {
    ObjectReader er(*e, "$.energy");
    er.read("p_idle_w", c.energy.p_idle);
    er.read("p_max_w", c.energy.p_max);
    er.finish();
    if (!(c.energy.p_idle >= 0.0 && c.energy.p_idle <= c.energy.p_max))
      throw ConfigError("$.energy", "require 0 <= p_idle_w <= p_max_w");
  }

  top.read("slo_ms", c.slo_ms);
  if (!(c.slo_ms > 0.0)) throw ConfigError("$.slo_ms", "must be > 0");
  if (const json* s = top.get("seeds")) c.seeds = detail::read_array<std::uint64_t>(*s, "$.seeds");
  if (c.seeds.empty()) throw ConfigError("$.seeds", "at least one seed is required");
  top.read("train_seed", c.train_seed);
  top.read("output_dir", c.output_dir);
  if (const json* ex = top.get("experiments")) {
    c.experiments = detail::read_array<std::string>(*ex, "$.experiments");
    for (std::size_t i = 0; i < c.experiments.size(); ++i) {
      const auto& e = c.experiments[i];
      if (e != "compare" && e != "sweep_load" && e != "sweep_latency" && e != "sweep_resource")
        throw ConfigError("$.experiments[" + std::to_string(i) + "]",
                          "unknown experiment '" + e + "', expected compare|sweep_load|sweep_latency|sweep_resource");
    }
  }

  if (const json* sw = top.get("sweeps")) {
    ObjectReader swr(*sw, "$.sweeps");
    if (const json* l = swr.get("load_levels")) {
      c.sweeps.load_levels.clear();
      for (std::size_t i = 0; i < l->size(); ++i)
        c.sweeps.load_levels.push_back(detail::read_enum<LoadLevel>((*l)[i], "$.sweeps.load_levels[" + std::to_string(i) + "]",
                                                                     parse_load_level, "low|medium|high|ultra_high"));
    }
    if (const json* l = swr.get("latencies_ms")) c.sweeps.latencies_ms = detail::read_array<double>(*l, "$.sweeps.latencies_ms");
    if (const json* l = swr.get("profiles")) {
      c.sweeps.profiles.clear();
      for (std::size_t i = 0; i < l->size(); ++i)
        c.sweeps.profiles.push_back(detail::read_enum<ResourceProfile>(
            (*l)[i], "$.sweeps.profiles[" + std::to_string(i) + "]", parse_resource_profile,
            "cpu_bound|memory_bound|storage_bound|network_bound"));
    }
    for (double v : c.sweeps.latencies_ms)
      if (!(v >= 0.0)) throw ConfigError("$.sweeps.latencies_ms", "latencies must be >= 0");
    swr.finish();
  }

  top.finish();

  const auto n = c.topology.size();
  auto check_weights = [n](std::vector<double>& w, const char* path) {
    if (w.size() == 1 && n > 1) w.assign(n, w.front());
    if (!w.empty() && w.size() != n) throw ConfigError(path, "need one weight per service");
  };
  check_weights(c.reward.lambda, "$.reward.lambda");
  check_weights(c.reward.alpha, "$.reward.alpha");

  try {
    validate_specs(c.services(), c.network);
    topological_order(c.services());
  } catch (const Error& e) {
    throw ConfigError("$.topology", e.what());
  }
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(root);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("$", "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline RewardWeights reward_weights(const ExperimentConfig& c) {
  const auto n = c.topology.size();
  RewardWeights w = RewardWeights::uniform(n);
  if (!c.reward.lambda.empty()) w.lambda = c.reward.lambda;
  if (!c.reward.alpha.empty()) w.alpha = c.reward.alpha;
  return w;
}

inline DqnConfig dqn_config(const ExperimentConfig& c) {
  DqnConfig d;
  d.hidden = c.agent.hidden;
  d.learning_rate = c.agent.learning_rate;
  d.gamma = c.agent.gamma;
  d.epsilon_start = c.agent.epsilon_start;
  d.epsilon_end = c.agent.epsilon_end;
  d.epsilon_decay_steps = c.agent.epsilon_decay_steps;
  d.replay_capacity = c.agent.replay_capacity;
  d.batch_size = c.agent.batch_size;
  d.sync_interval = c.agent.sync_interval;
  d.train_every = c.agent.train_every;
  d.reward_scale = c.agent.reward_scale;
  d.episodes = c.agent.train_episodes;
  d.seed = c.train_seed;
  return d;
}

inline LearningParams tabular_params(const ExperimentConfig& c) {
  LearningParams p;
  p.alpha = c.agent.alpha;
  p.gamma = c.agent.gamma;
  p.epsilon_start = c.agent.epsilon_start;
  p.epsilon_end = c.agent.epsilon_end;
  p.epsilon_decay_steps = c.agent.epsilon_decay_steps;
  return p;
}

}  // namespace msrl::bench
