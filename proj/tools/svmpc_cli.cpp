#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "svmpc/experiment.hpp"
#include "svmpc/metrics.hpp"
#include "svmpc/reachability.hpp"
#include "svmpc/records.hpp"
#include "svmpc/scenario.hpp"
#include "svmpc/valuefn.hpp"

using namespace svmpc;
using nlohmann::json;

namespace {

constexpr int kExitBadInput = 1;
constexpr int kExitNotConverged = 2;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json grid_counts(const Grid& grid) {
  json out = json::array();
  for (const Axis& a : grid.axes()) out.push_back(a.count);
  return out;
}

struct PrecomputeArgs {
  std::string scenario;
  std::string out;
  double tol = 0.0;
  int max_iters = 0;
  bool paper_scale = false;
};

int precompute(const PrecomputeArgs& args) {
  const Scenario s = load_scenario(args.scenario);
  ReachabilityOptions options = s.reachability;
  if (args.tol > 0.0) options.tol = args.tol;
  if (args.max_iters > 0) options.max_iters = args.max_iters;
  options.workers = worker_count_from_env(1);
  const Grid grid = make_grid(s, args.paper_scale);
  const auto model = make_model(s);
  const SafetyValueSolution sol = solve_safety_value(*model, grid, make_obstacles(s), options);
  save_value_field(sol.value, args.out);

  const SolveReport& r = sol.report;
  const json line = {{"status", r.status()},
                     {"converged", r.converged},
                     {"iterations", r.iterations},
                     {"final_change", r.final_change},
                     {"tol", options.tol},
                     {"dt", r.dt},
                     {"cfl", r.cfl},
                     {"dissipation", to_string(options.dissipation)},
                     {"grid", grid_counts(grid)},
                     {"nodes", grid.node_count()},
                     {"out", args.out},
                     {"timing", {{"wall_time_s", r.wall_time_s}}}};
  std::cout << line.dump() << std::endl;
  if (!r.converged) {
    std::cerr << "warning: not converged after " << r.iterations << " iterations (last change "
              << r.final_change << "); value file written anyway\n";
    return kExitNotConverged;
  }
  return 0;
}

struct RolloutArgs {
  std::string scenario;
  std::string value;
  std::string variants = "safety-value,baseline";
  std::string horizons = "10,20,40";
  int n = 100;
  std::uint64_t seed = 0;
  int controls_per_plan = 1;
  std::string warm_start = "shift";
  bool baseline_fallback = false;
  std::string out;
  std::string trajectories;
};

int rollout(const RolloutArgs& args) {
  const Scenario s = load_scenario(args.scenario);
  auto field = std::make_shared<const ValueField>(load_value_field(args.value));
  if (!(field->grid == make_grid(s, false)) && !(field->grid == make_grid(s, true))) {
    throw ContractViolation("value file grid matches neither grid preset of the scenario");
  }

  ExperimentConfig config;
  config.variants.clear();
  for (const std::string& v : split_list(args.variants)) config.variants.push_back(parse_variant(v));
  config.horizons.clear();
  for (const std::string& h : split_list(args.horizons)) {
    std::size_t used = 0;
    const int value = std::stoi(h, &used);
    if (used != h.size()) throw ContractViolation("bad horizon '" + h + "'");
    config.horizons.push_back(value);
  }
  config.n = args.n;
  config.seed = args.seed;
  config.controls_per_plan = args.controls_per_plan;
  if (args.warm_start == "shift") {
    config.warm_start = WarmStart::Shift;
  } else if (args.warm_start == "cold") {
    config.warm_start = WarmStart::Cold;
  } else {
    throw ContractViolation("warm start must be shift or cold");
  }
  config.baseline_fallback = args.baseline_fallback;
  config.workers = worker_count_from_env(1);

  const ExperimentResult result = run_experiment(s, field, config);

  std::vector<RolloutSummary> rows;
  rows.reserve(result.records.size());
  for (const RolloutRecord& r : result.records) rows.push_back(summarize(r));
  write_text_file(args.out, records_csv(rows));
  if (!args.trajectories.empty()) {
    std::filesystem::create_directories(args.trajectories);
    for (const RolloutRecord& r : result.records) {
      write_text_file(std::filesystem::path(args.trajectories) / trajectory_file_name(r),
                      trajectory_csv(r, s.dt));
    }
  }
  for (const std::string& f : result.failures) std::cerr << "rollout failed: " << f << "\n";

  int safe = 0;
  for (const RolloutSummary& r : rows) safe += r.safe;
  const json line = {{"rollouts", rows.size()},
                     {"safe", safe},
                     {"failures", result.failures.size()},
                     {"seed", args.seed},
                     {"out", args.out},
                     {"timing", {{"wall_time_s", result.wall_time_s}, {"workers", config.workers}}}};
  std::cout << line.dump() << std::endl;
  return 0;
}

struct ReportArgs {
  std::string records;
  std::string reference;
  std::string format = "both";
  std::string json_out;
  double safety_tolerance = kSafetyTolerance;
};

int report(const ReportArgs& args) {
  const std::vector<RolloutSummary> rows = load_records(args.records);
  if (rows.empty()) throw RecordsError("records file has no rows");
  ConfigId reference;
  if (!args.reference.empty()) {
    reference = parse_config_id(args.reference);
  } else {
    reference = ConfigId{Variant::SafetyValue, 20, 1};
    bool present = false;
    for (const RolloutSummary& r : rows) present = present || config_of(r) == reference;
    if (!present) reference = config_of(rows.front());
  }
  const MetricsReport m = compute_metrics(rows, reference, args.safety_tolerance);
  const std::string js = report_json(m);
  if (args.format == "table" || args.format == "both") std::cout << format_table(m);
  if (args.format == "json" || args.format == "both") std::cout << js << "\n";
  if (!args.json_out.empty()) write_text_file(args.json_out, js + "\n");
  return 0;
}

int validate(const std::string& path, bool print) {
  const Scenario s = load_scenario(path);
  if (print) {
    std::cout << to_json(s);
    return 0;
  }
  const Grid ci = make_grid(s, false);
  const Grid paper = make_grid(s, true);
  std::cout << "ok " << s.name << ": K = " << s.steps() << " steps, " << s.obstacles.size()
            << " obstacles, grid " << grid_counts(ci).dump() << " (" << ci.node_count()
            << " nodes), paper-scale grid " << grid_counts(paper).dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safety value MPC on the Dubins car: value precomputation, rollouts, reports"};
  app.require_subcommand(1);

  PrecomputeArgs pre;
  auto* pre_cmd = app.add_subcommand("precompute", "Solve the safety value function and write an HJVF file");
  pre_cmd->add_option("--scenario", pre.scenario, "Scenario JSON")->required();
  pre_cmd->add_option("--out", pre.out, "Output value file")->required();
  pre_cmd->add_option("--tol", pre.tol, "Convergence tolerance (sup norm)");
  pre_cmd->add_option("--max-iters", pre.max_iters, "Iteration cap");
  pre_cmd->add_flag("--paper-scale", pre.paper_scale, "Use the 50x50x50x30 grid preset");

  RolloutArgs ro;
  auto* ro_cmd = app.add_subcommand("rollout", "Run seeded closed-loop rollouts");
  ro_cmd->add_option("--scenario", ro.scenario, "Scenario JSON")->required();
  ro_cmd->add_option("--value", ro.value, "HJVF value file")->required();
  ro_cmd->add_option("--variants", ro.variants, "Comma-separated: safety-value, baseline");
  ro_cmd->add_option("--horizons", ro.horizons, "Comma-separated planning horizons");
  ro_cmd->add_option("--n", ro.n, "Rollouts per configuration")->check(CLI::PositiveNumber);
  ro_cmd->add_option("--seed", ro.seed, "Base seed; rollout i uses seed + i");
  ro_cmd->add_option("--h-c", ro.controls_per_plan, "Controls applied per plan")->check(CLI::PositiveNumber);
  ro_cmd->add_option("--warm-start", ro.warm_start, "shift or cold");
  ro_cmd->add_flag("--baseline-fallback", ro.baseline_fallback, "Let the baseline use the fallback too");
  ro_cmd->add_option("--out", ro.out, "Records CSV")->required();
  ro_cmd->add_option("--trajectories", ro.trajectories, "Directory for per-rollout trajectory CSVs");

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Summarize a records CSV");
  rep_cmd->add_option("--records", rep.records, "Records CSV")->required();
  rep_cmd->add_option("--reference", rep.reference, "Reference config, e.g. safety-value:20");
  rep_cmd->add_option("--format", rep.format, "table, json or both")
      ->check(CLI::IsMember({"table", "json", "both"}));
  rep_cmd->add_option("--json", rep.json_out, "Also write the JSON report here");
  rep_cmd->add_option("--safety-tolerance", rep.safety_tolerance, "Count min l >= -tol as safe")
      ->check(CLI::NonNegativeNumber);

  std::string val_path;
  bool val_print = false;
  auto* val_cmd = app.add_subcommand("validate", "Check a scenario file");
  val_cmd->add_option("--scenario", val_path, "Scenario JSON")->required();
  val_cmd->add_flag("--print", val_print, "Print the scenario with every default filled in");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitBadInput;
  }

  try {
    if (*pre_cmd) return precompute(pre);
    if (*ro_cmd) return rollout(ro);
    if (*rep_cmd) return report(rep);
    if (*val_cmd) return validate(val_path, val_print);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitBadInput;
}
