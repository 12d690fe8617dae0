#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "svmpc/experiment.hpp"
#include "svmpc/metrics.hpp"
#include "svmpc/records.hpp"
#include "svmpc/sampling.hpp"
#include "svmpc/scenario.hpp"
#include "test_helpers.hpp"

using namespace svmpc;
using svmpc::test::vec;

namespace {

RolloutSummary row(std::uint64_t seed, Variant v, int h, bool safe, double cost) {
  RolloutSummary r;
  r.seed = seed;
  r.variant = v;
  r.horizon = h;
  r.safe = safe;
  r.cost = cost;
  r.min_l = safe ? 0.1 : -0.1;
  return r;
}

Scenario free_scenario() {
  Scenario s;
  s.obstacles.clear();
  s.grid_counts = {9, 9, 8, 5};
  return s;
}

// V(x) = x on the free scenario grid.
std::shared_ptr<const ValueField> x_field(const Scenario& s) {
  const Grid grid = make_grid(s);
  ValueField f(grid);
  for (std::size_t i = 0; i < grid.node_count(); ++i) f.values[i] = grid.node(i)[0];
  return std::make_shared<const ValueField>(f);
}

bool bit_equal(const State& a, const State& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Sampling

TEST_CASE("philox4x32-10 known answers") {
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) ==
        PhiloxBlock{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        PhiloxBlock{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        PhiloxBlock{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("uniform bits map into [0, 1)") {
  CHECK(uniform_from_bits(0, 0) == 0.0);
  CHECK(uniform_from_bits(0xffffffff, 0xffffffff) == 1.0 - 0x1.0p-53);
  CHECK(uniform_from_bits(0x80000000, 0) == 0.5);
}

TEST_CASE("first draws without rejection match the generator snapshot") {
  const Scenario s = free_scenario();
  const SafetyOracle oracle(x_field(s));
  const auto starts =
      sample_initial_states(s, oracle, 3, 0, -std::numeric_limits<double>::infinity());
  REQUIRE(starts.size() == 3);
  // Independent reimplementation of the generator and the box map.
  CHECK(bit_equal(starts[0], vec({-0.807628233208284, 1.8857022758675397, 0.10479825775124185,
                                  0.27106138146365477})));
  CHECK(bit_equal(starts[1], vec({3.1220733838056853, 0.6858075870410874, -2.9691051758425147,
                                  0.7461041959798815})));
  CHECK(bit_equal(starts[2], vec({-0.596420873892904, 3.79935498051252, 2.0768678245166026,
                                  0.590318786011185})));
}

TEST_CASE("samples respect the value threshold and the box") {
  const Scenario s = free_scenario();
  const SafetyOracle oracle(x_field(s));
  const auto starts = sample_initial_states(s, oracle, 200, 11, 1.5);
  for (const State& x : starts) {
    CHECK(oracle.value(x) >= 1.5);
    CHECK(x[1] >= -4.0);
    CHECK(x[1] < 4.0);
    CHECK(x[2] >= -std::numbers::pi);
    CHECK(x[2] < std::numbers::pi);
    CHECK(x[3] >= 0.1);
    CHECK(x[3] < 3.0);
  }
}

TEST_CASE("sampling is deterministic and prefix-stable") {
  const Scenario s = free_scenario();
  const SafetyOracle oracle(x_field(s));
  const auto a = sample_initial_states(s, oracle, 8, 7, 0.0);
  const auto b = sample_initial_states(s, oracle, 8, 7, 0.0);
  const auto c = sample_initial_states(s, oracle, 3, 7, 0.0);
  for (int i = 0; i < 8; ++i) CHECK(bit_equal(a[i], b[i]));
  for (int i = 0; i < 3; ++i) CHECK(bit_equal(a[i], c[i]));
  const auto d = sample_initial_states(s, oracle, 8, 8, 0.0);
  CHECK(bit_equal(a[1], d[0]));
}

TEST_CASE("sampling gives up when almost everything is rejected") {
  const Scenario s = free_scenario();
  const SafetyOracle oracle(std::make_shared<const ValueField>(make_grid(s), -1.0));
  CHECK_THROWS_AS(sample_initial_states(s, oracle, 1, 0, 0.0), SamplingError);
  CHECK_THROWS_AS(sample_initial_states(s, oracle, 0, 0, 0.0), ContractViolation);
}

// ---------------------------------------------------------------------------
// Metrics

TEST_CASE("success rate counts safe rollouts") {
  std::vector<RolloutSummary> rows;
  const bool flags[] = {true, true, false, true};
  for (int i = 0; i < 4; ++i) rows.push_back(row(i, Variant::SafetyValue, 20, flags[i], 1.0));
  const MetricsReport m = compute_metrics(rows, {Variant::SafetyValue, 20, 1});
  CHECK(m.rows.size() == 1);
  CHECK(m.rows[0].success_rate == 75.0);
  CHECK(m.rows[0].n == 4);
}

TEST_CASE("success rate allows a small numerical violation") {
  std::vector<RolloutSummary> rows;
  const double min_l[] = {0.2, -1e-11, -5e-4, -2e-3};
  for (int i = 0; i < 4; ++i) {
    RolloutSummary r = row(i, Variant::SafetyValue, 20, min_l[i] >= 0.0, 1.0);
    r.min_l = min_l[i];
    rows.push_back(r);
  }
  CHECK(compute_metrics(rows, {Variant::SafetyValue, 20, 1}).rows[0].success_rate == 75.0);
  CHECK(compute_metrics(rows, {Variant::SafetyValue, 20, 1}, 0.0).rows[0].success_rate == 25.0);
  CHECK(compute_metrics(rows, {Variant::SafetyValue, 20, 1}, 1e-2).rows[0].success_rate == 100.0);
  rows[0].min_l = std::numeric_limits<double>::quiet_NaN();
  CHECK(compute_metrics(rows, {Variant::SafetyValue, 20, 1}).rows[0].success_rate == 50.0);
  CHECK_THROWS_AS(compute_metrics(rows, {Variant::SafetyValue, 20, 1}, -1.0), MetricsError);
}

TEST_CASE("higher-cost column uses strict inequality on comparable trials") {
  std::vector<RolloutSummary> rows;
  const double ours[] = {2, 2, 2};
  const double ref[] = {1, 2, 3};
  for (int i = 0; i < 3; ++i) {
    rows.push_back(row(i, Variant::Baseline, 20, true, ours[i]));
    rows.push_back(row(i, Variant::SafetyValue, 20, true, ref[i]));
  }
  const MetricsReport m = compute_metrics(rows, {Variant::SafetyValue, 20, 1});
  const ConfigMetrics& b = m.at({Variant::Baseline, 20, 1});
  CHECK(b.higher_cost_rate == doctest::Approx(100.0 / 3.0));
  CHECK(b.comparable == 3);
  CHECK(b.excluded == 0);
  CHECK(m.at({Variant::SafetyValue, 20, 1}).higher_cost_rate == 0.0);
}

TEST_CASE("unsafe trials are excluded from the cost comparison") {
  std::vector<RolloutSummary> rows = {
      row(0, Variant::Baseline, 10, false, 9), row(0, Variant::SafetyValue, 20, true, 1),
      row(1, Variant::Baseline, 10, true, 9),  row(1, Variant::SafetyValue, 20, true, 1),
      row(2, Variant::Baseline, 10, true, 0),  row(2, Variant::SafetyValue, 20, false, 1),
  };
  const MetricsReport m = compute_metrics(rows, {Variant::SafetyValue, 20, 1});
  const ConfigMetrics& b = m.at({Variant::Baseline, 10, 1});
  CHECK(b.comparable == 1);
  CHECK(b.excluded == 2);
  CHECK(b.higher_cost_rate == 100.0);
  CHECK(b.mean_cost == doctest::Approx(6.0));
  CHECK(b.median_cost == 9.0);
}

TEST_CASE("no comparable trials leaves the cost column undefined") {
  const std::vector<RolloutSummary> rows = {row(0, Variant::Baseline, 10, false, 1),
                                            row(0, Variant::SafetyValue, 20, true, 1)};
  const MetricsReport m = compute_metrics(rows, {Variant::SafetyValue, 20, 1});
  CHECK(std::isnan(m.at({Variant::Baseline, 10, 1}).higher_cost_rate));
  const auto js = nlohmann::json::parse(report_json(m));
  CHECK(js["rows"][0]["higher_cost_rate"].is_null());
}

TEST_CASE("metrics reject inconsistent seed sets") {
  std::vector<RolloutSummary> rows = {row(0, Variant::Baseline, 10, true, 1),
                                      row(1, Variant::SafetyValue, 20, true, 1)};
  CHECK_THROWS_AS(compute_metrics(rows, {Variant::SafetyValue, 20, 1}), MetricsError);
  rows = {row(0, Variant::SafetyValue, 20, true, 1), row(0, Variant::SafetyValue, 20, true, 2)};
  CHECK_THROWS_AS(compute_metrics(rows, {Variant::SafetyValue, 20, 1}), MetricsError);
  rows = {row(0, Variant::Baseline, 10, true, 1)};
  CHECK_THROWS_AS(compute_metrics(rows, {Variant::SafetyValue, 20, 1}), MetricsError);
}

TEST_CASE("six configurations give a six-row table") {
  std::vector<RolloutSummary> rows;
  for (Variant v : {Variant::Baseline, Variant::SafetyValue}) {
    for (int h : {10, 20, 40}) {
      for (int i = 0; i < 4; ++i) rows.push_back(row(i, v, h, i != 2, 10.0 + h + i));
    }
  }
  const MetricsReport m = compute_metrics(rows, {Variant::SafetyValue, 20, 1});
  REQUIRE(m.rows.size() == 6);
  CHECK(m.rows.front().id == ConfigId{Variant::Baseline, 10, 1});
  CHECK(m.rows.back().id == ConfigId{Variant::SafetyValue, 40, 1});
  const std::string table = format_table(m);
  int lines = 0;
  for (char c : table) lines += c == '\n';
  CHECK(lines == 8);
  CHECK(table.find("safety-value:20") != std::string::npos);
  const auto js = nlohmann::json::parse(report_json(m));
  CHECK(js["reference"] == "safety-value:20");
  CHECK(js["rows"].size() == 6);
}

TEST_CASE("config ids parse and print") {
  CHECK(parse_config_id("baseline:40") == ConfigId{Variant::Baseline, 40, 1});
  CHECK(parse_config_id("safety-value:20:5") == ConfigId{Variant::SafetyValue, 20, 5});
  CHECK(ConfigId{Variant::SafetyValue, 20, 5}.label() == "safety-value:20:5");
  CHECK_THROWS_AS(parse_config_id("baseline"), ContractViolation);
  CHECK_THROWS_AS(parse_config_id("baseline:x"), ContractViolation);
  CHECK_THROWS_AS(parse_config_id("baseline:0"), ContractViolation);
}

// ---------------------------------------------------------------------------
// Records

TEST_CASE("records csv round trips bit for bit") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(-1e3, 1e3);
  std::vector<RolloutSummary> rows;
  for (int i = 0; i < 50; ++i) {
    RolloutSummary r;
    r.seed = rng();
    r.variant = i % 2 ? Variant::Baseline : Variant::SafetyValue;
    r.horizon = 1 + i;
    r.controls_per_plan = 1 + i % 3;
    r.safe = i % 3 == 0;
    r.goal_reached = i % 5 == 0;
    r.cost = unit(rng) * 1e-7;
    r.min_l = unit(rng);
    r.fallback_count = i;
    rows.push_back(r);
  }
  rows[0].cost = 0.1;
  rows[1].min_l = -0.0;
  const std::string text = records_csv(rows);
  CHECK(text.rfind(std::string(kRecordsHeader) + "\n", 0) == 0);
  const auto back = parse_records_csv(text);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i] == rows[i]);
    CHECK(std::memcmp(&back[i].cost, &rows[i].cost, sizeof(double)) == 0);
    CHECK(std::memcmp(&back[i].min_l, &rows[i].min_l, sizeof(double)) == 0);
  }
  CHECK(records_csv(back) == text);
}

TEST_CASE("malformed records are rejected with a line number") {
  const std::string header = std::string(kRecordsHeader) + "\n";
  CHECK_THROWS_AS(parse_records_csv(""), RecordsError);
  CHECK_THROWS_AS(parse_records_csv("seed,variant\n"), RecordsError);
  CHECK_THROWS_AS(parse_records_csv(header + "0,baseline,10,1,1,0,1.5,0.2\n"), RecordsError);
  CHECK_THROWS_AS(parse_records_csv(header + "0,ours,10,1,1,0,1.5,0.2,0\n"), RecordsError);
  CHECK_THROWS_AS(parse_records_csv(header + "0,baseline,10,1,yes,0,1.5,0.2,0\n"), RecordsError);
  CHECK_THROWS_AS(parse_records_csv(header + "0,baseline,10,1,1,0,abc,0.2,0\n"), RecordsError);
  try {
    parse_records_csv(header + "0,baseline,10,1,1,0,1.5,0.2,0\n1,baseline,0,1,1,0,1,1,0\n");
    FAIL("expected an error");
  } catch (const RecordsError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK(parse_records_csv(header + "0,baseline,10,1,1,0,1.5,0.2,0\r\n").size() == 1);
}

TEST_CASE("trajectory csv has one row per state") {
  RolloutRecord r;
  r.seed = 4;
  r.variant = Variant::Baseline;
  r.horizon = 10;
  for (int k = 0; k < 3; ++k) {
    r.states.push_back(vec({0.1 * k, 0.0, 0.0, 1.0}));
    r.constraint_values.push_back(1.0);
    r.safety_values.push_back(0.5);
  }
  r.controls = {svmpc::test::ctrl({0.5, -1.0}), svmpc::test::ctrl({0.0, 0.0})};
  const std::string csv = trajectory_csv(r, 0.01);
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "k,t,x,y,theta,v,u_turn,u_accel,l,V_s");
  CHECK(lines[1] == "0,0,0,0,0,1,0.5,-1,1,0.5");
  CHECK(lines[3] == "2,0.02,0.20000000000000001,0,0,1,,,1,0.5");
  CHECK(trajectory_file_name(r) == "baseline_h10_hc1_seed4.csv");
}

// ---------------------------------------------------------------------------
// Scenario

TEST_CASE("scenario json round trip") {
  Scenario s;
  s.name = "custom";
  s.margin = 0.125;
  s.obstacles.push_back({2.0, -2.0, 0.3});
  s.reachability.dissipation = Dissipation::Global;
  const Scenario back = parse_scenario(to_json(s));
  CHECK(back.name == "custom");
  CHECK(back.margin == 0.125);
  CHECK(back.obstacles.size() == 4);
  CHECK(back.obstacles[3].radius == 0.3);
  CHECK(back.reachability.dissipation == Dissipation::Global);
  CHECK(to_json(back) == to_json(s));
  CHECK(back.steps() == 200);
}

TEST_CASE("shipped scenario files parse") {
  const std::filesystem::path dir = SVMPC_SCENARIO_DIR;
  const Scenario d = load_scenario(dir / "default.json");
  CHECK(to_json(d) == to_json(Scenario{}));
  CHECK(read_file(dir / "default.json") == to_json(Scenario{}));
  const Scenario f = load_scenario(dir / "obstacle_free.json");
  CHECK(f.obstacles.empty());
}

TEST_CASE("missing keys keep the defaults") {
  const Scenario s = parse_scenario(R"({"schema": 1, "goal": {"x": -3}})");
  CHECK(s.goal_x == -3.0);
  CHECK(s.goal_y == 2.5);
  CHECK(s.obstacles.size() == 3);
}

TEST_CASE("scenario validation") {
  CHECK(validate_scenario(Scenario{}).empty());

  Scenario inside;
  inside.goal_x = -1.2;
  inside.goal_y = 0.8;
  CHECK_FALSE(validate_scenario(inside).empty());

  Scenario ragged;
  ragged.dt = 0.03;
  CHECK_FALSE(validate_scenario(ragged).empty());

  Scenario small;
  small.grid_x = {-3.0, 4.0};
  CHECK_FALSE(validate_scenario(small).empty());

  Scenario outside;
  outside.obstacles.push_back({5.0, 0.0, 0.5});
  CHECK_FALSE(validate_scenario(outside).empty());

  CHECK_THROWS_AS(parse_scenario(R"({"schema": 1, "task": {"dt": 0.03}})"), ScenarioError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema": 2})"), ScenarioError);
  CHECK_THROWS_AS(parse_scenario(R"({"goal": {"x": 1}})"), ScenarioError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema": 1, "golf": {}})"), ScenarioError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema": 1, "goal": {"x": "far"}})"), ScenarioError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema": 1, "reachability": {"dissipation": "wide"}})"),
                  ScenarioError);
  CHECK_THROWS_AS(parse_scenario("{"), ScenarioError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ScenarioError);
}

TEST_CASE("scenario builds the task and the grid presets") {
  const Scenario s;
  const Task task = make_task(s);
  CHECK(task.steps == 200);
  CHECK(task.dt == 0.01);
  CHECK(task.obstacles.circles().size() == 3);
  CHECK(task.goal_tolerance == 0.2);
  const Grid ci = make_grid(s);
  CHECK(ci.node_count() == 41u * 41u * 41u * 21u);
  CHECK(ci.axis(2).periodic);
  CHECK(ci.axis(3).lo == 0.1);
  CHECK(ci.axis(3).hi == 3.0);
  CHECK(make_grid(s, true).node_count() == 50u * 50u * 50u * 30u);
}

// ---------------------------------------------------------------------------
// Experiment

TEST_CASE("experiment output is sorted and independent of the worker count") {
  Scenario s = free_scenario();
  s.duration = 0.3;
  const auto field = std::make_shared<const ValueField>(make_grid(s), kFreeSpaceDistance);
  ExperimentConfig config;
  config.horizons = {6, 3};
  config.variants = {Variant::SafetyValue, Variant::Baseline};
  config.n = 3;
  config.seed = 40;
  config.workers = 1;
  const ExperimentResult serial = run_experiment(s, field, config);
  config.workers = 3;
  const ExperimentResult parallel = run_experiment(s, field, config);
  REQUIRE(serial.records.size() == 12);
  CHECK(serial.failures.empty());
  std::vector<RolloutSummary> a, b;
  for (const auto& r : serial.records) a.push_back(summarize(r));
  for (const auto& r : parallel.records) b.push_back(summarize(r));
  CHECK(records_csv(a) == records_csv(b));
  CHECK(a[0].variant == Variant::Baseline);
  CHECK(a[0].horizon == 3);
  CHECK(a[0].seed == 40);
  CHECK(a[2].seed == 42);
  CHECK(a[3].horizon == 6);
  CHECK(a[11].variant == Variant::SafetyValue);
  for (std::size_t i = 0; i < 3; ++i) CHECK(bit_equal(serial.records[i].states[0], serial.starts[i]));
}

TEST_CASE("worker count comes from the environment") {
  ::setenv("SVMPC_WORKERS", "6", 1);
  CHECK(worker_count_from_env(1) == 6);
  ::setenv("SVMPC_WORKERS", "zero", 1);
  CHECK(worker_count_from_env(2) == 2);
  ::unsetenv("SVMPC_WORKERS");
  CHECK(worker_count_from_env(3) == 3);
}
