#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "msrl/error.hpp"
#include "msrl/resource.hpp"
#include "msrl/rng.hpp"
#include "msrl/simcore.hpp"

namespace msrl {

enum class LoadLevel { Low, Medium, High, UltraHigh };

inline constexpr std::array<LoadLevel, 4> kLoadLevels = {LoadLevel::Low, LoadLevel::Medium, LoadLevel::High,
                                                         LoadLevel::UltraHigh};

constexpr double arrival_rate_multiplier(LoadLevel level) {
  switch (level) {
    case LoadLevel::Low: return 1.0;
    case LoadLevel::Medium: return 2.0;
    case LoadLevel::High: return 4.0;
    case LoadLevel::UltraHigh: return 8.0;
  }
  return 1.0;
}

constexpr std::string_view to_string(LoadLevel level) {
  switch (level) {
    case LoadLevel::Low: return "low";
    case LoadLevel::Medium: return "medium";
    case LoadLevel::High: return "high";
    case LoadLevel::UltraHigh: return "ultra_high";
  }
  return "low";
}

inline std::optional<LoadLevel> parse_load_level(std::string_view s) {
  for (auto l : kLoadLevels)
    if (to_string(l) == s) return l;
  return std::nullopt;
}

enum class ResourceProfile { CpuBound, MemoryBound, StorageBound, NetworkBound };

inline constexpr std::array<ResourceProfile, 4> kResourceProfiles = {
    ResourceProfile::CpuBound, ResourceProfile::MemoryBound, ResourceProfile::StorageBound,
    ResourceProfile::NetworkBound};

constexpr std::string_view to_string(ResourceProfile p) {
  switch (p) {
    case ResourceProfile::CpuBound: return "cpu_bound";
    case ResourceProfile::MemoryBound: return "memory_bound";
    case ResourceProfile::StorageBound: return "storage_bound";
    case ResourceProfile::NetworkBound: return "network_bound";
  }
  return "cpu_bound";
}

inline std::optional<ResourceProfile> parse_resource_profile(std::string_view s) {
  for (auto p : kResourceProfiles)
    if (to_string(p) == s) return p;
  return std::nullopt;
}

constexpr Resource dominant_resource(ResourceProfile p) { return static_cast<Resource>(static_cast<std::size_t>(p)); }

/// Per-request demand where the profile's dimension is `skew` times `base`
/// and every other dimension equals `base`.
inline ResourceVector profile_demand(ResourceProfile profile, double base, double skew = 4.0) {
  ResourceVector v = ResourceVector::uniform(base);
  v[static_cast<std::size_t>(dominant_resource(profile))] = base * skew;
  return v;
}

/// Poisson arrivals at base_rate * multiplier (requests per ms) over
/// [0, horizon_ms), sorted by arrival time with ids 0..N-1.
inline std::vector<Request> generate_arrivals(double base_rate, LoadLevel level, double horizon_ms,
                                              std::uint64_t seed) {
  if (!(base_rate > 0.0)) throw Error(ErrorCode::InvalidSpec, "base_rate must be positive");
  std::vector<Request> out;
  if (!(horizon_ms > 0.0)) return out;
  const double rate = base_rate * arrival_rate_multiplier(level);
  out.reserve(static_cast<std::size_t>(rate * horizon_ms * 1.05) + 16);
  Rng rng(seed);
  double t = 0.0;
  for (;;) {
    t += rng.exponential(1.0 / rate);
    if (t >= horizon_ms) break;
    Request r;
    r.request_id = out.size();
    r.arrival_time = ms_to_ticks(t);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace files

struct TraceRecord {
  double timestamp_ms = 0.0;
  Resource resource_type = Resource::Cpu;
  double utilization = 0.0;
  double requested_capacity = 0.0;
  std::uint64_t current_load = 0;
  double response_time_ms = 0.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

inline constexpr std::array<std::string_view, 6> kTraceColumns = {
    "timestamp_ms", "resource_type", "utilization", "requested_capacity", "current_load", "response_time_ms"};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> parse_uint(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline std::vector<TraceRecord> parse_trace(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaError, "empty trace: header required");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv(line);
  for (std::size_t i = 0; i < kTraceColumns.size(); ++i) {
    if (std::find(header.begin(), header.end(), kTraceColumns[i]) == header.end())
      throw Error(ErrorCode::SchemaError, "missing column '" + std::string(kTraceColumns[i]) + "'");
  }
  if (header.size() != kTraceColumns.size() || !std::equal(header.begin(), header.end(), kTraceColumns.begin()))
    throw Error(ErrorCode::SchemaError, "columns must be exactly: timestamp_ms,resource_type,utilization,"
                                        "requested_capacity,current_load,response_time_ms");

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != kTraceColumns.size())
      throw ParseError(lineno, "expected 6 fields, got " + std::to_string(f.size()));
    TraceRecord r;
    auto ts = detail::parse_double(f[0]);
    if (!ts || *ts < 0.0) throw ParseError(lineno, "bad timestamp_ms '" + std::string(f[0]) + "'");
    r.timestamp_ms = *ts;
    bool known = false;
    for (std::size_t d = 0; d < kResourceDims; ++d)
      if (f[1] == kResourceNames[d]) {
        r.resource_type = static_cast<Resource>(d);
        known = true;
      }
    if (!known) throw ParseError(lineno, "unknown resource_type '" + std::string(f[1]) + "'");
    auto util = detail::parse_double(f[2]);
    if (!util || *util < 0.0 || *util > 1.0)
      throw ParseError(lineno, "utilization '" + std::string(f[2]) + "' outside [0,1]");
    r.utilization = *util;
    auto cap = detail::parse_double(f[3]);
    if (!cap || *cap < 0.0) throw ParseError(lineno, "bad requested_capacity '" + std::string(f[3]) + "'");
    r.requested_capacity = *cap;
    auto load = detail::parse_uint(f[4]);
    if (!load) throw ParseError(lineno, "bad current_load '" + std::string(f[4]) + "'");
    r.current_load = *load;
    auto rt = detail::parse_double(f[5]);
    if (!rt || *rt < 0.0) throw ParseError(lineno, "bad response_time_ms '" + std::string(f[5]) + "'");
    r.response_time_ms = *rt;
    if (!out.empty() && r.timestamp_ms < out.back().timestamp_ms)
      throw Error(ErrorCode::OrderError, "line " + std::to_string(lineno) + ": timestamp decreases");
    out.push_back(r);
  }
  return out;
}

inline std::vector<TraceRecord> load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open trace '" + path + "'");
  return parse_trace(in);
}

/// Canonical serialization: header, LF endings, shortest round-trip numbers.
inline std::string format_trace(const std::vector<TraceRecord>& records) {
  std::string out;
  for (std::size_t i = 0; i < kTraceColumns.size(); ++i) {
    if (i) out += ',';
    out += kTraceColumns[i];
  }
  out += '\n';
  for (const auto& r : records) {
    out += detail::format_double(r.timestamp_ms);
    out += ',';
    out += kResourceNames[static_cast<std::size_t>(r.resource_type)];
    out += ',';
    out += detail::format_double(r.utilization);
    out += ',';
    out += detail::format_double(r.requested_capacity);
    out += ',';
    out += std::to_string(r.current_load);
    out += ',';
    out += detail::format_double(r.response_time_ms);
    out += '\n';
  }
  return out;
}

inline void save_trace(const std::string& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write trace '" + path + "'");
  out << format_trace(records);
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

/// Expands each record into `current_load` requests at its timestamp. The
/// simulator always admits arrivals at its entry service, so
/// `target_service` is recorded as the first stage.
inline std::vector<Request> trace_to_arrivals(const std::vector<TraceRecord>& records,
                                              std::size_t target_service = 0) {
  std::vector<Request> out;
  for (const auto& rec : records) {
    for (std::uint64_t k = 0; k < rec.current_load; ++k) {
      Request r;
      r.request_id = out.size();
      r.arrival_time = ms_to_ticks(rec.timestamp_ms);
      r.current_stage = target_service;
      out.push_back(std::move(r));
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Request& a, const Request& b) { return a.arrival_time < b.arrival_time; });
  return out;
}

/// Synthetic schema-conformant trace: one record per `interval_ms` whose
/// current_load is a Poisson count at the level's rate, with utilization and
/// response time from a single-server approximation of the offered load.
inline std::vector<TraceRecord> generate_trace(double base_rate, LoadLevel level, double horizon_ms,
                                               double interval_ms, std::uint64_t seed) {
  std::vector<TraceRecord> out;
  if (!(horizon_ms > 0.0) || !(interval_ms > 0.0)) return out;
  const auto arrivals = generate_arrivals(base_rate, level, horizon_ms, seed);
  const auto bins = static_cast<std::size_t>(std::ceil(horizon_ms / interval_ms));
  std::vector<std::uint64_t> counts(bins, 0);
  for (const auto& a : arrivals) {
    auto b = static_cast<std::size_t>(ticks_to_ms(a.arrival_time) / interval_ms);
    ++counts[std::min(b, bins - 1)];
  }
  Rng rng(derive_seed(seed, 7));
  for (std::size_t b = 0; b < bins; ++b) {
    TraceRecord r;
    r.timestamp_ms = static_cast<double>(b) * interval_ms;
    r.resource_type = static_cast<Resource>(rng.below(kResourceDims));
    const double offered = static_cast<double>(counts[b]) / (interval_ms * base_rate * 10.0);
    r.utilization = std::clamp(offered, 0.0, 1.0);
    r.requested_capacity = static_cast<double>(counts[b]);
    r.current_load = counts[b];
    r.response_time_ms = 10.0 / std::max(0.05, 1.0 - std::min(r.utilization, 0.95));
    out.push_back(r);
  }
  return out;
}

}  // namespace msrl
