#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "msrl/error.hpp"
#include "msrl/resource.hpp"
#include "msrl/rng.hpp"

namespace msrl {

/// Simulation time in integer microseconds. Integer ticks keep the event
/// ordering exact; everything user-facing is reported in milliseconds.
using SimTime = std::int64_t;

inline constexpr SimTime kTicksPerMs = 1000;

inline SimTime ms_to_ticks(double ms) { return static_cast<SimTime>(std::llround(ms * kTicksPerMs)); }
inline constexpr double ticks_to_ms(SimTime t) { return static_cast<double>(t) / kTicksPerMs; }

struct ServiceSpec {
  std::string name;
  std::size_t replicas = 1;
  ResourceVector capacity_per_replica;
  double base_service_time_ms = 1.0;
  ResourceVector demand_per_request;
  std::vector<std::size_t> downstream;
};

struct NetworkModel {
  double per_hop_latency_ms = 0.0;
  double jitter_fraction = 0.0;

  /// Hop delay drawn uniformly from latency * [1 - jitter, 1 + jitter].
  SimTime sample(Rng& rng) const {
    if (per_hop_latency_ms <= 0.0) return 0;
    const double lo = per_hop_latency_ms * (1.0 - jitter_fraction);
    const double hi = per_hop_latency_ms * (1.0 + jitter_fraction);
    return ms_to_ticks(jitter_fraction > 0.0 ? rng.uniform(lo, hi) : per_hop_latency_ms);
  }
};

struct Hop {
  std::size_t service = 0;
  std::size_t replica = 0;
  friend bool operator==(const Hop&, const Hop&) = default;
};

struct Request {
  std::uint64_t request_id = 0;
  SimTime arrival_time = 0;
  std::size_t current_stage = 0;
  std::vector<Hop> path_taken;
  std::optional<SimTime> completion_time;
  SimTime stage_ready = 0;  // when the current stage became ready for placement
};

struct ReplicaState {
  SimTime busy_until = 0;
  std::deque<std::uint64_t> queue;
  ResourceVector in_use;
  ResourceVector capacity;
  std::optional<ResourceVector> pending_capacity;
  ResourceVector busy_integral;  // in_use * ms
  ResourceVector util_integral;  // (in_use / capacity) * ms
  SimTime last_update = 0;
  std::size_t running = 0;

  double utilization(std::size_t dim) const {
    return capacity[dim] > 0.0 ? std::clamp(in_use[dim] / capacity[dim], 0.0, 1.0) : 0.0;
  }
  /// Largest per-dimension occupancy; the dimension that blocks admission first.
  double dominant_utilization() const {
    double u = 0.0;
    for (std::size_t d = 0; d < kResourceDims; ++d) u = std::max(u, utilization(d));
    return u;
  }
};

struct ClusterOptions {
  std::size_t max_queue = 64;
  bool unbounded_queue = false;
  bool contention = true;
  double ewma_weight = 0.2;
  bool keep_finished = false;  // retain full Request records after they leave
};

enum class EventKind { Arrival, StageReady, Completion, Timer };

struct Event {
  SimTime time = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Arrival;
  std::uint64_t request = 0;
  std::size_t service = 0;
  std::size_t replica = 0;
};

/// A request waiting for the scheduler to pick one of a service's replicas.
struct DecisionPoint {
  std::uint64_t request_id = 0;
  std::size_t service = 0;
  SimTime time = 0;
  std::vector<std::size_t> candidates;
};

struct AdvanceResult {
  Event event;
  std::optional<DecisionPoint> decision;
};

enum class PlaceOutcome { Started, Queued, Rejected };

/// Per-service activity accumulated since the last take_window().
struct ServiceWindow {
  double response_sum_ms = 0.0;
  std::size_t completions = 0;
  std::size_t rejections = 0;
};

/// Exponentially weighted mean; the first sample initializes it.
inline double ewma_update(std::optional<double> prev, double sample, double weight) {
  return prev ? weight * sample + (1.0 - weight) * *prev : sample;
}

/// Exponential service duration with mean `base_service_time_ms`, stretched
/// by the contention factor 1 + in_use_cpu / capacity_cpu of the replica at
/// admission. `draws` is anything with `double uniform()` on (0, 1].
template <class UniformSource>
double service_time_ms(const ServiceSpec& spec, const ReplicaState& replica, UniformSource& draws,
                       bool contention = true) {
  double factor = 1.0;
  if (contention && replica.capacity.cpu > 0.0) factor += replica.in_use.cpu / replica.capacity.cpu;
  return spec.base_service_time_ms * -std::log(draws.uniform()) * factor;
}

/// Kahn's algorithm, lowest index first among ready nodes. Throws
/// CyclicTopology when the downstream edges do not form a DAG.
inline std::vector<std::size_t> topological_order(const std::vector<ServiceSpec>& specs) {
  const std::size_t n = specs.size();
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& s : specs)
    for (auto d : s.downstream) {
      if (d >= n) throw Error(ErrorCode::InvalidSpec, "downstream index " + std::to_string(d) + " out of range");
      ++indegree[d];
    }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(i);
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    auto v = ready.top();
    ready.pop();
    order.push_back(v);
    for (auto d : specs[v].downstream)
      if (--indegree[d] == 0) ready.push(d);
  }
  if (order.size() != n) throw Error(ErrorCode::CyclicTopology, "service downstream edges contain a cycle");
  return order;
}

inline void validate_specs(const std::vector<ServiceSpec>& specs, const NetworkModel& network) {
  if (specs.empty()) throw Error(ErrorCode::InvalidSpec, "no services");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    const std::string where = "service " + std::to_string(i);
    if (s.replicas == 0) throw Error(ErrorCode::InvalidSpec, where + ": replicas must be >= 1");
    if (!(s.base_service_time_ms > 0.0) || !std::isfinite(s.base_service_time_ms))
      throw Error(ErrorCode::InvalidSpec, where + ": base_service_time_ms must be > 0");
    if (!s.capacity_per_replica.valid() || !s.demand_per_request.valid())
      throw Error(ErrorCode::InvalidSpec, where + ": resource vectors must be finite and non-negative");
    if (!s.demand_per_request.fits_within(s.capacity_per_replica))
      throw Error(ErrorCode::InvalidSpec, where + ": demand exceeds per-replica capacity");
    for (auto d : s.downstream)
      if (d == i) throw Error(ErrorCode::CyclicTopology, where + ": self edge");
  }
  if (!(network.per_hop_latency_ms >= 0.0) || !std::isfinite(network.per_hop_latency_ms))
    throw Error(ErrorCode::InvalidSpec, "per_hop_latency_ms must be >= 0");
  if (!(network.jitter_fraction >= 0.0 && network.jitter_fraction < 1.0))
    throw Error(ErrorCode::InvalidSpec, "jitter_fraction must lie in [0, 1)");
}

/// Discrete-event model of requests flowing through a DAG of replicated
/// services. Placement is left to the caller: advance() stops at every
/// request that needs a replica and place() resolves it.
class Cluster {
 public:
  Cluster(std::vector<ServiceSpec> specs, NetworkModel network, std::uint64_t seed, ClusterOptions options = {})
      : specs_(std::move(specs)), network_(network), options_(options), rng_seed_(seed), rng_(seed) {
    validate_specs(specs_, network_);
    topo_ = msrl::topological_order(specs_);
    std::vector<bool> has_parent(specs_.size(), false);
    for (const auto& s : specs_)
      for (auto d : s.downstream) has_parent[d] = true;
    entry_ = static_cast<std::size_t>(std::find(has_parent.begin(), has_parent.end(), false) - has_parent.begin());
    replicas_.resize(specs_.size());
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      replicas_[i].resize(specs_[i].replicas);
      for (auto& r : replicas_[i]) r.capacity = specs_[i].capacity_per_replica;
    }
    window_.resize(specs_.size());
    ewma_.assign(specs_.size(), std::nullopt);
  }

  SimTime clock() const { return clock_; }
  double clock_ms() const { return ticks_to_ms(clock_); }
  std::uint64_t rng_seed() const { return rng_seed_; }
  const std::vector<ServiceSpec>& services() const { return specs_; }
  const NetworkModel& network() const { return network_; }
  const ClusterOptions& options() const { return options_; }
  const std::vector<std::vector<ReplicaState>>& replicas() const { return replicas_; }
  const std::vector<std::size_t>& topological_order() const { return topo_; }
  std::size_t entry_service() const { return entry_; }

  std::size_t injected() const { return injected_; }
  std::size_t completed() const { return completed_; }
  std::size_t rejected() const { return rejected_; }
  std::size_t in_flight() const { return requests_.size(); }
  std::size_t pending_events() const { return events_.size(); }
  bool idle() const { return events_.empty() && !pending_; }
  const std::optional<DecisionPoint>& pending_decision() const { return pending_; }

  /// End-to-end response times of completed requests, in completion order.
  const std::vector<double>& response_times_ms() const { return responses_ms_; }
  const std::vector<Request>& finished() const { return finished_; }
  std::optional<double> ewma_response_ms(std::size_t service) const { return ewma_.at(service); }
  std::size_t queue_capacity() const { return options_.max_queue; }

  const Request* find_request(std::uint64_t id) const {
    auto it = requests_.find(id);
    return it == requests_.end() ? nullptr : &it->second;
  }

  void inject_arrival(Request request) {
    if (request.arrival_time < clock_)
      throw Error(ErrorCode::PastTimestamp, "arrival at " + std::to_string(request.arrival_time) +
                                                "us precedes clock " + std::to_string(clock_) + "us");
    if (requests_.contains(request.request_id))
      throw Error(ErrorCode::InvalidSpec, "duplicate request id " + std::to_string(request.request_id));
    request.current_stage = entry_;
    request.completion_time.reset();
    request.path_taken.clear();
    const auto id = request.request_id;
    const auto t = request.arrival_time;
    requests_.emplace(id, std::move(request));
    ++injected_;
    push({t, 0, EventKind::Arrival, id, entry_, 0});
  }

  /// Convenience overload that assigns the next free id.
  std::uint64_t inject_arrival(SimTime arrival_time) {
    Request r;
    r.request_id = next_auto_id_++;
    while (requests_.contains(r.request_id)) r.request_id = next_auto_id_++;
    r.arrival_time = arrival_time;
    const auto id = r.request_id;
    inject_arrival(std::move(r));
    return id;
  }

  void schedule_timer(SimTime at) {
    if (at < clock_) throw Error(ErrorCode::PastTimestamp, "timer precedes clock");
    push({at, 0, EventKind::Timer, 0, 0, 0});
  }

  /// Pops the earliest event and applies it. Returns a decision point when a
  /// request is ready for a service stage; the caller must place() it before
  /// advancing again.
  AdvanceResult advance() {
    if (pending_) throw Error(ErrorCode::PendingDecision, "place() the pending request before advancing");
    if (events_.empty()) throw Error(ErrorCode::EmptyQueue, "no events remain");
    Event ev = events_.top();
    events_.pop();
    clock_ = ev.time;
    AdvanceResult result{ev, std::nullopt};
    switch (ev.kind) {
      case EventKind::Arrival:
      case EventKind::StageReady: {
        auto& req = requests_.at(ev.request);
        req.current_stage = ev.service;
        req.stage_ready = clock_;
        DecisionPoint dp{ev.request, ev.service, clock_, {}};
        dp.candidates.resize(specs_[ev.service].replicas);
        for (std::size_t i = 0; i < dp.candidates.size(); ++i) dp.candidates[i] = i;
        pending_ = dp;
        result.decision = std::move(dp);
        break;
      }
      case EventKind::Completion:
        complete_stage(ev);
        break;
      case EventKind::Timer:
        break;
    }
    return result;
  }

  PlaceOutcome place(const DecisionPoint& dp, std::size_t replica) {
    if (!pending_ || pending_->request_id != dp.request_id || pending_->service != dp.service)
      throw Error(ErrorCode::PendingDecision, "decision point is not the pending one");
    if (replica >= replicas_[dp.service].size())
      throw Error(ErrorCode::InvalidReplica, "replica " + std::to_string(replica) + " out of range for service " +
                                                 std::to_string(dp.service));
    pending_.reset();
    auto& rep = replicas_[dp.service][replica];
    auto& req = requests_.at(dp.request_id);
    req.path_taken.push_back({dp.service, replica});
    const auto& demand = specs_[dp.service].demand_per_request;
    if (rep.queue.empty() && fits(rep.in_use + demand, rep.capacity)) {
      start_service(dp.service, replica, dp.request_id);
      return PlaceOutcome::Started;
    }
    if (options_.unbounded_queue || rep.queue.size() < options_.max_queue) {
      rep.queue.push_back(dp.request_id);
      return PlaceOutcome::Queued;
    }
    reject(dp.service, dp.request_id);
    return PlaceOutcome::Rejected;
  }

  /// Rescales a service's per-replica capacity. A replica whose current
  /// usage exceeds the new capacity keeps the old one until enough of its
  /// running requests finish.
  void set_capacity_scale(std::size_t service, double scale) {
    const auto& spec = specs_.at(service);
    ResourceVector cap = spec.capacity_per_replica * scale;
    for (std::size_t d = 0; d < kResourceDims; ++d) cap[d] = std::max(cap[d], spec.demand_per_request[d]);
    for (std::size_t r = 0; r < replicas_[service].size(); ++r) {
      auto& rep = replicas_[service][r];
      rep.pending_capacity = cap;
      apply_pending_capacity(service, r);
    }
  }

  /// Brings every replica's busy-time integrals up to the current clock.
  void sync_accounting() {
    for (auto& svc : replicas_)
      for (auto& rep : svc) touch(rep);
  }

  /// Returns the per-service window statistics and starts a new window.
  std::vector<ServiceWindow> take_window() {
    std::vector<ServiceWindow> out(specs_.size());
    out.swap(window_);
    return out;
  }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void push(Event ev) {
    ev.seq = next_seq_++;
    events_.push(ev);
  }

  void touch(ReplicaState& rep) {
    const SimTime dt = clock_ - rep.last_update;
    if (dt > 0) {
      const double dt_ms = ticks_to_ms(dt);
      for (std::size_t d = 0; d < kResourceDims; ++d) {
        rep.busy_integral[d] += rep.in_use[d] * dt_ms;
        rep.util_integral[d] += rep.utilization(d) * dt_ms;
      }
    }
    rep.last_update = clock_;
  }

  void start_service(std::size_t service, std::size_t replica, std::uint64_t id) {
    auto& rep = replicas_[service][replica];
    const auto& spec = specs_[service];
    const double duration = service_time_ms(spec, rep, rng_, options_.contention);
    touch(rep);
    rep.in_use += spec.demand_per_request;
    ++rep.running;
    const SimTime done = clock_ + ms_to_ticks(duration);
    rep.busy_until = std::max(rep.busy_until, done);
    push({done, 0, EventKind::Completion, id, service, replica});
  }

  void reject(std::size_t service, std::uint64_t id) {
    ++rejected_;
    ++window_[service].rejections;
    retire(id);
  }

  void retire(std::uint64_t id) {
    auto node = requests_.extract(id);
    if (options_.keep_finished) finished_.push_back(std::move(node.mapped()));
  }

  void record_stage_response(std::size_t service, double ms) {
    auto& w = window_[service];
    w.response_sum_ms += ms;
    ++w.completions;
    ewma_[service] = ewma_update(ewma_[service], ms, options_.ewma_weight);
  }

  void apply_pending_capacity(std::size_t service, std::size_t replica) {
    auto& rep = replicas_[service][replica];
    if (!rep.pending_capacity || !fits(rep.in_use, *rep.pending_capacity)) return;
    touch(rep);
    rep.capacity = *rep.pending_capacity;
    rep.pending_capacity.reset();
    drain_queue(service, replica);
  }

  void drain_queue(std::size_t service, std::size_t replica) {
    auto& rep = replicas_[service][replica];
    const auto& demand = specs_[service].demand_per_request;
    while (!rep.queue.empty() && fits(rep.in_use + demand, rep.capacity)) {
      const auto next = rep.queue.front();
      rep.queue.pop_front();
      start_service(service, replica, next);
    }
  }

  void complete_stage(const Event& ev) {
    auto& rep = replicas_[ev.service][ev.replica];
    touch(rep);
    rep.in_use -= specs_[ev.service].demand_per_request;
    for (std::size_t d = 0; d < kResourceDims; ++d)
      if (rep.in_use[d] < 1e-9) rep.in_use[d] = 0.0;
    --rep.running;

    auto& req = requests_.at(ev.request);
    record_stage_response(ev.service, ticks_to_ms(clock_ - req.stage_ready));
    const auto& next = specs_[ev.service].downstream;
    if (next.empty()) {
      req.completion_time = clock_;
      responses_ms_.push_back(ticks_to_ms(clock_ - req.arrival_time));
      ++completed_;
      retire(ev.request);
    } else {
      const std::size_t target = next.size() == 1 ? next.front() : next[rng_.below(next.size())];
      push({clock_ + network_.sample(rng_), 0, EventKind::StageReady, ev.request, target, 0});
    }

    if (rep.pending_capacity) apply_pending_capacity(ev.service, ev.replica);
    drain_queue(ev.service, ev.replica);
  }

  std::vector<ServiceSpec> specs_;
  NetworkModel network_;
  ClusterOptions options_;
  std::uint64_t rng_seed_;
  Rng rng_;
  std::vector<std::size_t> topo_;
  std::size_t entry_ = 0;
  SimTime clock_ = 0;
  std::vector<std::vector<ReplicaState>> replicas_;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_auto_id_ = 0;
  std::unordered_map<std::uint64_t, Request> requests_;
  std::optional<DecisionPoint> pending_;
  std::size_t injected_ = 0;
  std::size_t completed_ = 0;
  std::size_t rejected_ = 0;
  std::vector<double> responses_ms_;
  std::vector<Request> finished_;
  std::vector<ServiceWindow> window_;
  std::vector<std::optional<double>> ewma_;
};

inline Cluster init_cluster(std::vector<ServiceSpec> specs, NetworkModel network, std::uint64_t seed,
                            ClusterOptions options = {}) {
  return Cluster(std::move(specs), network, seed, options);
}

/// Single-server FIFO queue with Poisson arrivals and exponential service,
/// driven through the full event machinery. Rates are per millisecond;
/// returns the empirical mean response time in ms.
inline double run_mm1_validation(double arrival_rate, double service_rate, std::size_t requests,
                                 std::uint64_t seed = 42) {
  if (!(arrival_rate > 0.0) || !(service_rate > 0.0))
    throw Error(ErrorCode::InvalidSpec, "rates must be positive");
  if (arrival_rate >= service_rate)
    throw Error(ErrorCode::UnstableSystem, "arrival rate must be below service rate");
  ServiceSpec spec;
  spec.name = "mm1";
  spec.replicas = 1;
  spec.capacity_per_replica = ResourceVector::uniform(1.0);
  spec.demand_per_request = ResourceVector::uniform(1.0);
  spec.base_service_time_ms = 1.0 / service_rate;
  ClusterOptions opts;
  opts.unbounded_queue = true;
  opts.contention = false;
  Cluster cluster({spec}, NetworkModel{}, derive_seed(seed, 0), opts);

  Rng arrivals(derive_seed(seed, 1));
  double t_ms = 0.0;
  for (std::size_t i = 0; i < requests; ++i) {
    t_ms += arrivals.exponential(1.0 / arrival_rate);
    Request r;
    r.request_id = i;
    r.arrival_time = ms_to_ticks(t_ms);
    cluster.inject_arrival(std::move(r));
  }
  while (cluster.pending_events() > 0) {
    auto step = cluster.advance();
    if (step.decision) cluster.place(*step.decision, 0);
  }
  const auto& rt = cluster.response_times_ms();
  if (rt.empty()) throw Error(ErrorCode::EmptySample, "no completed requests");
  double sum = 0.0;
  for (double v : rt) sum += v;
  return sum / static_cast<double>(rt.size());
}

}  // namespace msrl
