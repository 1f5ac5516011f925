#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "msrl/bench/config.hpp"
#include "msrl/bench/experiment.hpp"
#include "msrl/error.hpp"
#include "msrl/metrics.hpp"
#include "msrl/workload.hpp"

namespace msrl::bench {

/// Flat column names of a MetricsReport, in row order.
inline std::vector<std::string> metrics_columns() {
  std::vector<std::string> cols = {"mean_response_ms", "p95_response_ms", "throughput_rps", "utilization_pct"};
  for (auto name : kResourceNames) cols.push_back("utilization_pct_" + std::string(name));
  for (const char* c : {"energy_joules", "cost_efficiency_pct", "scheduling_efficiency_pct", "offered", "completed",
                        "rejected", "in_flight_at_end"})
    cols.emplace_back(c);
  return cols;
}

/// Values matching metrics_columns(), formatted as shortest round-trip text.
inline std::vector<std::string> metrics_values(const MetricsReport& r) {
  using msrl::detail::format_double;
  std::vector<std::string> v = {format_double(r.mean_response_ms), format_double(r.p95_response_ms),
                                format_double(r.throughput_rps), format_double(r.utilization_pct.overall)};
  for (double d : r.utilization_pct.per_dimension) v.push_back(format_double(d));
  v.push_back(format_double(r.energy_joules));
  v.push_back(format_double(r.cost_efficiency_pct));
  v.push_back(format_double(r.scheduling_efficiency_pct));
  for (auto n : {r.offered, r.completed, r.rejected, r.in_flight_at_end}) v.push_back(std::to_string(n));
  return v;
}

inline std::string csv_header(const std::vector<std::string>& leading) {
  std::string out;
  auto cols = leading;
  for (auto& c : metrics_columns()) cols.push_back(c);
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  return out + "\n";
}

inline std::string csv_row(const std::vector<std::string>& leading, const MetricsReport& r) {
  std::string out;
  auto cols = leading;
  for (auto& c : metrics_values(r)) cols.push_back(std::move(c));
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  return out + "\n";
}

inline json to_json(const MetricsReport& r) {
  json util = json::object();
  for (std::size_t d = 0; d < kResourceDims; ++d) util[std::string(kResourceNames[d])] = r.utilization_pct.per_dimension[d];
  util["overall"] = r.utilization_pct.overall;
  return json{{"mean_response_ms", r.mean_response_ms},
              {"p95_response_ms", r.p95_response_ms},
              {"throughput_rps", r.throughput_rps},
              {"utilization_pct", util},
              {"energy_joules", r.energy_joules},
              {"cost_efficiency_pct", r.cost_efficiency_pct},
              {"scheduling_efficiency_pct", r.scheduling_efficiency_pct},
              {"offered", r.offered},
              {"completed", r.completed},
              {"rejected", r.rejected},
              {"in_flight_at_end", r.in_flight_at_end}};
}

inline json to_json(const SweepResult& s) {
  json cells = json::array();
  for (const auto& c : s.cells) {
    json runs = json::array();
    for (const auto& r : c.runs) runs.push_back({{"seed", r.seed}, {"report", to_json(r.report)}});
    cells.push_back({{"axis_value", c.axis_value},
                     {"scheduler", std::string(to_string(c.scheduler))},
                     {"mean", to_json(c.mean)},
                     {"stddev", to_json(c.stddev)},
                     {"runs", runs}});
  }
  return json{{"axis", s.axis}, {"values", s.values}, {"cells", cells}};
}

/// comparison.csv body: one seed-aggregated row per scheduler.
inline std::string comparison_csv(const SweepResult& compare) {
  std::string out = csv_header({"scheduler"});
  for (const auto& c : compare.cells) out += csv_row({std::string(to_string(c.scheduler))}, c.mean);
  return out;
}

/// Long format: one line per (axis value, scheduler, seed, metric).
inline std::string sweep_csv(const SweepResult& s) {
  std::string out = "axis_value,scheduler,seed,metric,value\n";
  const auto cols = metrics_columns();
  for (const auto& c : s.cells)
    for (const auto& r : c.runs) {
      const auto vals = metrics_values(r.report);
      for (std::size_t i = 0; i < cols.size(); ++i)
        out += c.axis_value + "," + std::string(to_string(c.scheduler)) + "," + std::to_string(r.seed) + "," +
               cols[i] + "," + vals[i] + "\n";
    }
  return out;
}

/// Scheduling efficiency per axis value and scheduler, ready to plot.
inline std::string plot_csv(const SweepResult& s) {
  using msrl::detail::format_double;
  std::string out = s.axis + ",scheduler,efficiency_pct_mean,efficiency_pct_std\n";
  for (const auto& c : s.cells)
    out += c.axis_value + "," + std::string(to_string(c.scheduler)) + "," +
           format_double(c.mean.scheduling_efficiency_pct) + "," + format_double(c.stddev.scheduling_efficiency_pct) +
           "\n";
  return out;
}

inline std::string plot_file_name(const std::string& axis) {
  if (axis == "load") return "plotdata_fig2.csv";
  if (axis == "latency") return "plotdata_fig3.csv";
  if (axis == "resource") return "plotdata_fig4.csv";
  return {};
}

inline json report_json(const ExperimentConfig& c, const std::vector<SweepResult>& results) {
  json schedulers = json::array();
  for (auto k : c.schedulers) schedulers.push_back(std::string(to_string(k)));
  json experiments = json::array();
  for (const auto& r : results) experiments.push_back(to_json(r));
  return json{{"version", kConfigVersion},
              {"seeds", c.seeds},
              {"train_seed", c.train_seed},
              {"eval_seed_offset", kEvalSeedOffset},
              {"slo_ms", c.slo_ms},
              {"schedulers", schedulers},
              {"experiments", experiments}};
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

}  // namespace detail

/// Writes comparison.csv, sweep_<axis>.csv, plotdata_fig{2,3,4}.csv and
/// report.json into `dir`. Returns the written paths in write order.
inline std::vector<std::filesystem::path> emit_reports(const ExperimentConfig& c, const std::vector<SweepResult>& results,
                                                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw Error(ErrorCode::IoError, "cannot create output directory '" + dir.string() + "'");
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    written.push_back(dir / name);
    detail::write_file(written.back(), text);
  };
  for (const auto& r : results) {
    if (r.axis == "compare") {
      emit("comparison.csv", comparison_csv(r));
    } else {
      emit("sweep_" + r.axis + ".csv", sweep_csv(r));
      emit(plot_file_name(r.axis), plot_csv(r));
    }
  }
  emit("report.json", report_json(c, results).dump(2) + "\n");
  return written;
}

}  // namespace msrl::bench
