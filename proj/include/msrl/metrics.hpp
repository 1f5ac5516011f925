#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "msrl/error.hpp"
#include "msrl/resource.hpp"
#include "msrl/simcore.hpp"

namespace msrl {

struct EnergyModel {
  double p_idle = 10.0;  // W per replica
  double p_max = 20.0;   // W per replica
};

struct UtilizationPct {
  std::array<double, kResourceDims> per_dimension{};
  double overall = 0.0;
};

struct MetricsReport {
  double mean_response_ms = 0.0;
  double p95_response_ms = 0.0;
  double throughput_rps = 0.0;
  UtilizationPct utilization_pct;
  double energy_joules = 0.0;
  double cost_efficiency_pct = 0.0;
  double scheduling_efficiency_pct = 0.0;
  std::size_t offered = 0;
  std::size_t completed = 0;
  std::size_t rejected = 0;
  std::size_t in_flight_at_end = 0;

  bool conserved() const { return offered == completed + rejected + in_flight_at_end; }
};

struct ResponseStats {
  double mean = 0.0;
  double p95 = 0.0;
};

inline double throughput(std::size_t completed, double wall_time_s) {
  if (!(wall_time_s > 0.0)) throw Error(ErrorCode::ZeroWindow, "wall time must be positive");
  return static_cast<double>(completed) / wall_time_s;
}

/// Percent utilization per dimension from busy-time integrals (usage x time,
/// summed over the given replicas). `capacities` holds one entry per replica.
inline UtilizationPct utilization(std::span<const ResourceVector> busy_integrals,
                                  std::span<const ResourceVector> capacities, double wall_time) {
  if (!(wall_time > 0.0)) throw Error(ErrorCode::ZeroWindow, "wall time must be positive");
  if (busy_integrals.size() != capacities.size())
    throw Error(ErrorCode::LengthMismatch, "one capacity per replica required");
  UtilizationPct out;
  if (busy_integrals.empty()) return out;
  for (std::size_t d = 0; d < kResourceDims; ++d) {
    double used = 0.0;
    double avail = 0.0;
    for (std::size_t r = 0; r < busy_integrals.size(); ++r) {
      used += busy_integrals[r][d];
      avail += capacities[r][d] * wall_time;
    }
    out.per_dimension[d] = avail > 0.0 ? std::clamp(100.0 * used / avail, 0.0, 100.0) : 0.0;
  }
  double sum = 0.0;
  for (double v : out.per_dimension) sum += v;
  out.overall = sum / kResourceDims;
  return out;
}

/// Linear idle-to-peak power on CPU utilization, integrated over the run.
/// `mean_cpu_util` holds each replica's time-averaged CPU fraction; by
/// linearity this equals integrating the instantaneous power.
inline double energy(std::span<const double> mean_cpu_util, const EnergyModel& model, double wall_time_s) {
  if (!(wall_time_s > 0.0)) throw Error(ErrorCode::ZeroWindow, "wall time must be positive");
  double joules = 0.0;
  for (double u : mean_cpu_util)
    joules += (model.p_idle + (model.p_max - model.p_idle) * std::clamp(u, 0.0, 1.0)) * wall_time_s;
  return joules;
}

/// Cost per request relative to the cheapest scheduler in the set; the
/// cheapest scores 100.
inline std::vector<double> cost_efficiency(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::NoCompletions, "no reports");
  std::vector<double> cost(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (reports[i].completed == 0) throw Error(ErrorCode::NoCompletions, "report " + std::to_string(i));
    cost[i] = reports[i].energy_joules / static_cast<double>(reports[i].completed);
  }
  const double best = *std::min_element(cost.begin(), cost.end());
  std::vector<double> out(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i)
    out[i] = cost[i] == best ? 100.0 : (cost[i] > 0.0 ? 100.0 * best / cost[i] : 100.0);
  return out;
}

inline double scheduling_efficiency(std::size_t completed_within_slo, std::size_t offered) {
  if (offered == 0) throw Error(ErrorCode::ZeroOffered, "no offered requests");
  return 100.0 * static_cast<double>(completed_within_slo) / static_cast<double>(offered);
}

/// Arithmetic mean and nearest-rank 95th percentile.
inline ResponseStats response_stats(std::span<const double> samples) {
  if (samples.empty()) throw Error(ErrorCode::EmptySample, "no completed requests");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return {sum / static_cast<double>(n), sorted[rank - 1]};
}

/// Builds the report for a finished (or truncated) simulation. Cost
/// efficiency is relative and filled in by the caller across a scheduler set.
inline MetricsReport summarize(Cluster& cluster, double slo_ms, const EnergyModel& energy_model) {
  cluster.sync_accounting();
  MetricsReport rep;
  rep.offered = cluster.injected();
  rep.completed = cluster.completed();
  rep.rejected = cluster.rejected();
  rep.in_flight_at_end = cluster.in_flight();
  const auto& rt = cluster.response_times_ms();
  if (!rt.empty()) {
    auto stats = response_stats(rt);
    rep.mean_response_ms = stats.mean;
    rep.p95_response_ms = stats.p95;
  }
  const double wall_ms = cluster.clock_ms();
  if (wall_ms > 0.0) {
    rep.throughput_rps = throughput(rep.completed, wall_ms / 1000.0);
    // util_integral is already normalized by each replica's capacity, so
    // unit capacities turn it into the usage fraction.
    std::vector<ResourceVector> integrals;
    std::vector<double> cpu;
    for (const auto& svc : cluster.replicas())
      for (const auto& r : svc) {
        integrals.push_back(r.util_integral);
        cpu.push_back(r.util_integral.cpu / wall_ms);
      }
    std::vector<ResourceVector> unit(integrals.size(), ResourceVector::uniform(1.0));
    rep.utilization_pct = utilization(integrals, unit, wall_ms);
    rep.energy_joules = energy(cpu, energy_model, wall_ms / 1000.0);
  }
  if (rep.offered > 0) {
    const auto within = static_cast<std::size_t>(
        std::count_if(rt.begin(), rt.end(), [slo_ms](double v) { return v <= slo_ms; }));
    rep.scheduling_efficiency_pct = scheduling_efficiency(within, rep.offered);
  }
  rep.cost_efficiency_pct = 100.0;
  return rep;
}

}  // namespace msrl
