#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <tuple>
#include <vector>

#include "msrl/error.hpp"
#include "msrl/rng.hpp"
#include "msrl/simcore.hpp"

namespace msrl {

// Non-learning routing policies. Each maps a decision point to a replica
// index among its candidates.

inline std::size_t baseline_static(const DecisionPoint& dp) {
  if (dp.candidates.empty()) throw Error(ErrorCode::EmptyActionSet, "no candidate replicas");
  return dp.candidates.front();
}

/// Candidate with the lexicographically smallest (queue length, cpu in use);
/// ties go to the lowest index.
inline std::size_t baseline_least_loaded(const Cluster& cluster, const DecisionPoint& dp) {
  if (dp.candidates.empty()) throw Error(ErrorCode::EmptyActionSet, "no candidate replicas");
  const auto& reps = cluster.replicas()[dp.service];
  std::size_t best = dp.candidates.front();
  auto key = [&](std::size_t r) { return std::tuple(reps[r].queue.size(), reps[r].in_use.cpu); };
  for (auto c : dp.candidates)
    if (key(c) < key(best)) best = c;
  return best;
}

/// Same rule over raw (queue length, cpu) pairs.
inline std::size_t least_loaded_index(const std::vector<std::pair<std::size_t, double>>& loads) {
  if (loads.empty()) throw Error(ErrorCode::EmptyActionSet, "no candidate replicas");
  std::size_t best = 0;
  for (std::size_t i = 1; i < loads.size(); ++i)
    if (loads[i] < loads[best]) best = i;
  return best;
}

class RoundRobin {
 public:
  std::size_t operator()(const DecisionPoint& dp) {
    if (dp.candidates.empty()) throw Error(ErrorCode::EmptyActionSet, "no candidate replicas");
    if (dp.service >= counters_.size()) counters_.resize(dp.service + 1, 0);
    auto& c = counters_[dp.service];
    const auto pick = dp.candidates[c % dp.candidates.size()];
    ++c;
    return pick;
  }

 private:
  std::vector<std::size_t> counters_;
};

class RandomRouter {
 public:
  explicit RandomRouter(std::uint64_t seed) : rng_(seed) {}

  std::size_t operator()(const DecisionPoint& dp) {
    if (dp.candidates.empty()) throw Error(ErrorCode::EmptyActionSet, "no candidate replicas");
    return dp.candidates[rng_.below(dp.candidates.size())];
  }

 private:
  Rng rng_;
};

}  // namespace msrl
