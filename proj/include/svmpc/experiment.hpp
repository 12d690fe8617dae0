#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "svmpc/mpc.hpp"
#include "svmpc/scenario.hpp"

namespace svmpc {

struct ExperimentConfig {
  std::vector<Variant> variants{Variant::SafetyValue, Variant::Baseline};
  std::vector<int> horizons{10, 20, 40};
  int n = 100;
  std::uint64_t seed = 0;  // rollout i uses seed + i
  int controls_per_plan = 1;
  WarmStart warm_start = WarmStart::Shift;
  bool baseline_fallback = false;
  int workers = 1;
};

struct ExperimentResult {
  std::vector<State> starts;            // shared by every configuration
  std::vector<RolloutRecord> records;   // sorted by (variant, h, seed)
  std::vector<std::string> failures;    // rollouts that threw; their records are marked unsafe
  double wall_time_s = 0.0;
};

ControllerConfig controller_config(const Scenario& scenario, Variant variant, int horizon,
                                   const ExperimentConfig& config);

/// Samples n starts with V_s >= scenario.start_margin and runs every
/// (variant, h) pair from them. Output does not depend on the worker count.
ExperimentResult run_experiment(const Scenario& scenario, std::shared_ptr<const ValueField> value,
                                const ExperimentConfig& config);

/// SVMPC_WORKERS when set to a positive integer, otherwise `fallback`.
int worker_count_from_env(int fallback);

}  // namespace svmpc
