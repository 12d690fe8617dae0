#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "svmpc/obstacles.hpp"
#include "svmpc/trajopt.hpp"
#include "svmpc/valuefn.hpp"

namespace svmpc {

enum class Variant { Baseline, SafetyValue };

std::string to_string(Variant variant);
/// Accepts "baseline" and "safety-value". Throws ContractViolation otherwise.
Variant parse_variant(std::string_view text);

enum class WarmStart { Shift, Cold };

/// Closed-loop task: reach the goal from x0 within `steps` steps of length dt
/// while keeping clear of the obstacles.
struct Task {
  std::shared_ptr<const DynamicsModel> model;
  ObstacleSet obstacles;
  double goal_x = 0.0;
  double goal_y = 0.0;
  double dt = 0.01;
  int steps = 200;               // K
  double control_weight = 1e-3;  // solver-only regularizer
  double goal_tolerance = 0.2;   // goal reached within this x-y distance
};

struct ControllerConfig {
  Variant variant = Variant::SafetyValue;
  int horizon = 20;            // h
  int controls_per_plan = 1;   // h_c, 1 <= h_c < h
  double margin = 0.0;         // terminal constraint V_s >= margin
  WarmStart warm_start = WarmStart::Shift;
  bool baseline_fallback = false;  // the safety-value variant always falls back
  SolverOptions solver;

  bool fallback_enabled() const { return variant == Variant::SafetyValue || baseline_fallback; }
  void validate() const;
};

/// Control maximizing dV/dt = grad V(x) . f(x, u) over the control box.
Control fallback_control(const SafetyOracle& oracle, const DynamicsModel& model, const State& x);

/// Receding-horizon planner for one task. Holds the solver workspace, so an
/// instance serves one rollout at a time.
///
/// Objective: sum_{k<h} [d(x_k) + w |u_k|^2] + 2 d(x_h) with d the x-y
/// distance to the goal; the terminal term carries both the last running cost
/// and the terminal cost. Baseline plans constrain l(x_k) >= 0 for k = 1..h;
/// safety-value plans for k = 1..h-1 plus V_s(x_h) >= margin.
class MpcController {
 public:
  MpcController(ControllerConfig config, const Task& task, std::shared_ptr<const ValueField> value);

  const ControllerConfig& config() const { return config_; }
  const SafetyOracle& oracle() const { return oracle_; }

  /// Plans from x. `previous` seeds the warm start when the policy is Shift.
  SolveResult plan(const State& x, const SolveResult* previous = nullptr);

  /// Builds the optimal control problem solved by plan().
  OcpSpec problem(const State& x) const;

 private:
  ControllerConfig config_;
  const Task& task_;
  SafetyOracle oracle_;
  std::shared_ptr<const GoalDistanceCost> running_;
  std::shared_ptr<const GoalDistanceCost> terminal_;
  std::shared_ptr<const ObstacleConstraint> obstacles_;
  std::shared_ptr<const SafetyValueConstraint> terminal_constraint_;
  TrajectoryOptimizer solver_;
};

struct RolloutRecord {
  std::uint64_t seed = 0;
  Variant variant = Variant::SafetyValue;
  int horizon = 0;
  int controls_per_plan = 1;

  std::vector<State> states;               // K + 1
  std::vector<Control> controls;           // K
  std::vector<double> constraint_values;   // l(x_k), K + 1
  std::vector<double> safety_values;       // V_s(x_k), K + 1
  std::vector<SolveStatus> plan_statuses;  // one per plan
  int fallback_count = 0;                  // plans answered by the fallback
  int clamp_events = 0;                    // steps where a clamped state hit its bound

  bool safe = false;          // min_k l(x_k) >= 0
  bool goal_reached = false;  // within goal_tolerance at some k
  double cost = 0.0;          // sum_{k=1..K} d(x_k) + d(x_K), no regularizer
  double min_constraint = 0.0;
};

/// Closed loop: plan, apply the first h_c controls (or the fallback when the
/// plan is unusable and the fallback is enabled), repeat until K steps.
RolloutRecord run_rollout(MpcController& controller, const Task& task, const State& x0,
                          std::uint64_t seed);

}  // namespace svmpc
