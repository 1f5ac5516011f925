#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "msrl/bench/config.hpp"
#include "msrl/bench/experiment.hpp"
#include "msrl/bench/report.hpp"

using namespace msrl;
using namespace msrl::bench;
namespace fs = std::filesystem;

namespace {

std::string config_error_path(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

// Short horizons keep these runs well under a second.
ExperimentConfig small_config() {
  ExperimentConfig c = reference_config();
  c.workload.horizon_ms = 3000.0;
  c.workload.train_horizon_ms = 2000.0;
  c.agent.train_episodes = 1;
  c.seeds = {1, 2};
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("msrl_bench_test_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(Config, MinimalDocumentUsesReferenceDefaults) {
  const auto c = parse_config_text(R"({"version": 1})");
  EXPECT_EQ(c.topology.size(), 4u);
  EXPECT_EQ(c.schedulers.size(), kAllSchedulers.size());
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_DOUBLE_EQ(c.slo_ms, 250.0);
  EXPECT_DOUBLE_EQ(c.network.per_hop_latency_ms, 10.0);
}

TEST(Config, VersionIsRequired) {
  EXPECT_EQ(config_error_path("{}"), "$.version");
  EXPECT_EQ(config_error_path(R"({"version": 2})"), "$.version");
  EXPECT_EQ(config_error_path("{"), "$");
}

TEST(Config, UnknownFieldsNameTheirPath) {
  EXPECT_EQ(config_error_path(R"({"version": 1, "sedes": [1]})"), "$.sedes");
  EXPECT_EQ(config_error_path(R"({"version": 1, "agent": {"gama": 0.9}})"), "$.agent.gama");
  EXPECT_EQ(config_error_path(R"({"version": 1, "topology": {"services": [
      {"name": "a", "capacity": {"cpu": 1, "memroy": 1}}]}})"),
            "$.topology.services[0].capacity.memroy");
}

TEST(Config, EmptySchedulerSetIsRejected) {
  EXPECT_EQ(config_error_path(R"({"version": 1, "schedulers": []})"), "$.schedulers");
  EXPECT_EQ(config_error_path(R"({"version": 1, "schedulers": ["fifo"]})"), "$.schedulers[0]");
}

TEST(Config, EmptySeedsAndBadValuesAreRejected) {
  EXPECT_EQ(config_error_path(R"({"version": 1, "seeds": []})"), "$.seeds");
  EXPECT_EQ(config_error_path(R"({"version": 1, "workload": {"horizon_ms": 0}})"), "$.workload.horizon_ms");
  EXPECT_EQ(config_error_path(R"({"version": 1, "workload": {"load_level": "extreme"}})"), "$.workload.load_level");
  EXPECT_EQ(config_error_path(R"({"version": 1, "seeds": [-1]})"), "$.seeds[0]");
  EXPECT_EQ(config_error_path(R"({"version": 1, "agent": {"gamma": 1.0}})"), "$.agent.gamma");
}

TEST(Config, CyclicTopologyIsAConfigError) {
  EXPECT_EQ(config_error_path(R"({"version": 1, "topology": {"services": [
      {"name": "a", "capacity": {"cpu": 2, "memory": 2, "storage": 2, "network": 2}, "downstream": [1]},
      {"name": "b", "capacity": {"cpu": 2, "memory": 2, "storage": 2, "network": 2}, "downstream": [0]}]}})"),
            "$.topology");
}

TEST(Config, ParsesFullDocument) {
  const auto c = parse_config_text(R"({
    "version": 1,
    "topology": {"services": [
      {"name": "front", "replicas": 2, "base_service_time_ms": 5,
       "capacity": {"cpu": 4, "memory": 4, "storage": 4, "network": 4},
       "demand": {"cpu": 1, "memory": 1, "storage": 1, "network": 1}, "downstream": [1]},
      {"name": "back", "replicas": 1, "base_service_time_ms": 7,
       "capacity": {"cpu": 8, "memory": 8, "storage": 8, "network": 8}}]},
    "workload": {"load_level": "high", "base_rate_per_ms": 0.05, "horizon_ms": 1000,
                 "resource_profile": "memory_bound"},
    "network": {"per_hop_latency_ms": 3, "jitter_fraction": 0.1},
    "cluster": {"max_queue": 16},
    "schedulers": ["static", "dqn"],
    "agent": {"mode": "allocation", "epoch_ms": 250, "hidden": [32], "empty_window": "zero"},
    "reward": {"lambda": 0.02, "alpha": [0.4, 0.6]},
    "energy": {"p_idle_w": 5, "p_max_w": 12},
    "slo_ms": 100, "seeds": [7], "train_seed": 9, "output_dir": "x",
    "experiments": ["compare", "sweep_latency"],
    "sweeps": {"latencies_ms": [0, 5]}
  })");
  ASSERT_EQ(c.topology.size(), 2u);
  EXPECT_TRUE(c.topology[0].explicit_demand);
  EXPECT_FALSE(c.topology[1].explicit_demand);
  const auto specs = c.services();
  EXPECT_EQ(specs[1].demand_per_request, profile_demand(ResourceProfile::MemoryBound, 1.0, 4.0));
  EXPECT_EQ(c.workload.load_level, LoadLevel::High);
  EXPECT_EQ(c.max_queue, 16u);
  EXPECT_EQ(c.agent.mode, ActionMode::Allocation);
  EXPECT_EQ(c.agent.empty_window, EmptyWindow::Zero);
  EXPECT_EQ(c.reward.lambda, (std::vector<double>{0.02, 0.02}));
  EXPECT_EQ(c.reward.alpha, (std::vector<double>{0.4, 0.6}));
  EXPECT_EQ(dqn_config(c).seed, 9u);
  EXPECT_EQ(dqn_config(c).hidden, (std::vector<std::size_t>{32}));
  EXPECT_EQ(c.sweeps.latencies_ms, (std::vector<double>{0.0, 5.0}));
}

TEST(Compare, BaselinesGiveOneDeterministicRowEach) {
  auto c = small_config();
  c.schedulers = {SchedulerKind::Static, SchedulerKind::RoundRobin, SchedulerKind::LeastLoaded, SchedulerKind::Random};
  const auto a = run_compare(c);
  const auto b = run_compare(c);
  ASSERT_EQ(a.cells.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a.cells[i].scheduler, c.schedulers[i]);
    ASSERT_EQ(a.cells[i].runs.size(), 2u);
    for (std::size_t s = 0; s < 2; ++s) {
      EXPECT_TRUE(a.cells[i].runs[s].report.conserved());
      EXPECT_EQ(to_json(a.cells[i].runs[s].report), to_json(b.cells[i].runs[s].report));
    }
    EXPECT_TRUE(a.cells[i].mean.conserved());
  }
  double best = 0.0;
  for (const auto& cell : a.cells)
    for (const auto& r : cell.runs) best = std::max(best, r.report.cost_efficiency_pct);
  EXPECT_EQ(best, 100.0);
}

TEST(Compare, EvaluationSeedsDoNotChangeTraining) {
  auto c = small_config();
  c.schedulers = {SchedulerKind::Dqn, SchedulerKind::QLearning};
  c.seeds = {1};
  const auto one = run_compare(c);
  c.seeds = {5, 1};
  const auto two = run_compare(c);
  for (std::size_t k = 0; k < 2; ++k)
    EXPECT_EQ(to_json(one.cells[k].runs[0].report), to_json(two.cells[k].runs[1].report));
}

TEST(Sweeps, SingleValueGivesSinglePoint) {
  auto c = small_config();
  c.schedulers = {SchedulerKind::LeastLoaded};
  c.sweeps.load_levels = {LoadLevel::Low};
  c.sweeps.latencies_ms = {5.0};
  const auto load = sweep_load(c);
  EXPECT_EQ(load.values, (std::vector<std::string>{"low"}));
  EXPECT_EQ(load.cells.size(), 1u);
  const auto lat = sweep_latency(c);
  EXPECT_EQ(lat.values, (std::vector<std::string>{"5"}));
  EXPECT_EQ(lat.cells.size(), 1u);
}

TEST(Sweeps, ThreeSeedsCarryMeanAndStd) {
  auto c = small_config();
  c.schedulers = {SchedulerKind::Random};
  c.seeds = {1, 2, 3};
  c.sweeps.load_levels = {LoadLevel::Medium};
  const auto r = sweep_load(c);
  const auto& cell = r.at(0, 0);
  ASSERT_EQ(cell.runs.size(), 3u);
  double mean = 0.0;
  for (const auto& run : cell.runs) mean += run.report.scheduling_efficiency_pct / 3.0;
  EXPECT_NEAR(cell.mean.scheduling_efficiency_pct, mean, 1e-9);
  EXPECT_GE(cell.stddev.scheduling_efficiency_pct, 0.0);
}

TEST(Sweeps, UniformDemandMakesProfileIrrelevant) {
  auto c = small_config();
  c.schedulers = {SchedulerKind::LeastLoaded};
  c.seeds = {1};
  c.workload.demand_skew = 1.0;
  const auto r = sweep_resource(c);
  ASSERT_EQ(r.values.size(), 4u);
  for (std::size_t v = 1; v < 4; ++v) EXPECT_EQ(to_json(r.at(v, 0).mean), to_json(r.at(0, 0).mean));
}

TEST(Reports, FilesHeadersAndDeterminism) {
  auto c = small_config();
  c.schedulers = {SchedulerKind::Static, SchedulerKind::LeastLoaded};
  c.sweeps.load_levels = {LoadLevel::Low, LoadLevel::Medium};
  const std::vector<SweepResult> results{run_compare(c), sweep_load(c)};
  const auto d1 = scratch_dir("a"), d2 = scratch_dir("b");
  emit_reports(c, results, d1);
  emit_reports(c, std::vector<SweepResult>{run_compare(c), sweep_load(c)}, d2);
  for (const char* f : {"comparison.csv", "sweep_load.csv", "plotdata_fig2.csv", "report.json"}) {
    ASSERT_TRUE(fs::exists(d1 / f)) << f;
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  }
  const auto csv = slurp(d1 / "comparison.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "scheduler,mean_response_ms,p95_response_ms,throughput_rps,utilization_pct,utilization_pct_cpu,"
            "utilization_pct_memory,utilization_pct_storage,utilization_pct_network,energy_joules,"
            "cost_efficiency_pct,scheduling_efficiency_pct,offered,completed,rejected,in_flight_at_end");
  const auto sweep = slurp(d1 / "sweep_load.csv");
  EXPECT_EQ(sweep.substr(0, sweep.find('\n')), "axis_value,scheduler,seed,metric,value");
  // 2 levels x 2 schedulers x 2 seeds, one line per metric, plus the header.
  EXPECT_EQ(static_cast<std::size_t>(std::count(sweep.begin(), sweep.end(), '\n')), 2 * 2 * 2 * metrics_columns().size() + 1);
  const auto json = nlohmann::json::parse(slurp(d1 / "report.json"));
  EXPECT_EQ(json["experiments"].size(), 2u);
  EXPECT_EQ(json["experiments"][1]["axis"], "load");
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Reports, UnwritableDirectoryIsIoError) {
  const auto blocker = fs::temp_directory_path() / "msrl_bench_test_blocker";
  { std::ofstream(blocker) << "file"; }
  try {
    emit_reports(small_config(), {}, blocker / "sub");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
  fs::remove(blocker);
}

#ifdef MSRL_BENCH_EXE
namespace {
int run_cli(const std::string& args) {
  const std::string cmd = std::string(MSRL_BENCH_EXE) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}
}  // namespace

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("cli");
  fs::create_directories(dir);
  EXPECT_EQ(run_cli("validate-mm1 --lambda 0.5 --mu 1 --requests 1000"), 0);
  EXPECT_EQ(run_cli("validate-mm1 --lambda 1 --mu 1"), 1);
  EXPECT_EQ(run_cli("no-such-command"), 1);
  { std::ofstream(dir / "bad.json") << R"({"version": 1, "schedulers": []})"; }
  EXPECT_EQ(run_cli("compare --config " + (dir / "bad.json").string()), 1);
  { std::ofstream(dir / "ok.json") << R"({"version": 1, "schedulers": ["static"], "seeds": [1],
                                          "workload": {"horizon_ms": 500}})"; }
  EXPECT_EQ(run_cli("compare --config " + (dir / "ok.json").string() + " --out " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "comparison.csv"));
  { std::ofstream(dir / "blocked") << "file"; }
  EXPECT_EQ(run_cli("compare --config " + (dir / "ok.json").string() + " --out " + (dir / "blocked" / "x").string()),
            2);
  fs::remove_all(dir);
}
#endif
