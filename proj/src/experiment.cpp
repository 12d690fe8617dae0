#include "svmpc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <limits>
#include <map>
#include <thread>

#include "svmpc/sampling.hpp"

namespace svmpc {

ControllerConfig controller_config(const Scenario& scenario, Variant variant, int horizon,
                                   const ExperimentConfig& config) {
  ControllerConfig c;
  c.variant = variant;
  c.horizon = horizon;
  c.controls_per_plan = config.controls_per_plan;
  c.margin = scenario.margin;
  c.warm_start = config.warm_start;
  c.baseline_fallback = config.baseline_fallback;
  c.validate();
  return c;
}

ExperimentResult run_experiment(const Scenario& scenario, std::shared_ptr<const ValueField> value,
                                const ExperimentConfig& config) {
  if (config.n < 1) throw ContractViolation("experiment: n must be >= 1");
  if (config.variants.empty() || config.horizons.empty()) {
    throw ContractViolation("experiment: need at least one variant and one horizon");
  }
  std::vector<Variant> variants = config.variants;
  std::vector<int> horizons = config.horizons;
  std::sort(variants.begin(), variants.end());
  variants.erase(std::unique(variants.begin(), variants.end()), variants.end());
  std::sort(horizons.begin(), horizons.end());
  horizons.erase(std::unique(horizons.begin(), horizons.end()), horizons.end());
  for (Variant v : variants) {
    for (int h : horizons) controller_config(scenario, v, h, config);
  }

  const auto start = std::chrono::steady_clock::now();
  const Task task = make_task(scenario);
  const SafetyOracle oracle(value, scenario.margin);

  ExperimentResult result;
  result.starts =
      sample_initial_states(scenario, oracle, config.n, config.seed, scenario.start_margin);

  struct Job {
    Variant variant;
    int horizon;
    int trial;
  };
  std::vector<Job> jobs;
  for (Variant v : variants) {
    for (int h : horizons) {
      for (int i = 0; i < config.n; ++i) jobs.push_back({v, h, i});
    }
  }
  result.records.resize(jobs.size());
  std::vector<std::string> errors(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    std::map<std::pair<Variant, int>, std::unique_ptr<MpcController>> controllers;
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job& job = jobs[j];
      auto& ctl = controllers[{job.variant, job.horizon}];
      if (!ctl) {
        ctl = std::make_unique<MpcController>(
            controller_config(scenario, job.variant, job.horizon, config), task, value);
      }
      const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(job.trial);
      try {
        result.records[j] = run_rollout(*ctl, task, result.starts[job.trial], seed);
      } catch (const std::exception& e) {
        RolloutRecord& r = result.records[j];
        r = RolloutRecord{};
        r.seed = seed;
        r.variant = job.variant;
        r.horizon = job.horizon;
        r.controls_per_plan = config.controls_per_plan;
        r.safe = false;
        r.cost = std::numeric_limits<double>::quiet_NaN();
        r.min_constraint = std::numeric_limits<double>::quiet_NaN();
        errors[j] = to_string(job.variant) + " h=" + std::to_string(job.horizon) + " seed " +
                    std::to_string(seed) + ": " + e.what();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(config.workers, static_cast<int>(jobs.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::string& e : errors) {
    if (!e.empty()) result.failures.push_back(std::move(e));
  }
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

int worker_count_from_env(int fallback) {
  const char* text = std::getenv("SVMPC_WORKERS");
  if (!text) return fallback;
  char* end = nullptr;
  const long n = std::strtol(text, &end, 10);
  if (end == text || *end != '\0' || n < 1 || n > 1024) return fallback;
  return static_cast<int>(n);
}

}  // namespace svmpc
