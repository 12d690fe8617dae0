#include "svmpc/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace svmpc {

std::string to_string(Variant variant) {
  return variant == Variant::Baseline ? "baseline" : "safety-value";
}

Variant parse_variant(std::string_view text) {
  if (text == "baseline") return Variant::Baseline;
  if (text == "safety-value") return Variant::SafetyValue;
  throw ContractViolation("unknown controller variant '" + std::string(text) +
                          "' (expected baseline or safety-value)");
}

void ControllerConfig::validate() const {
  if (horizon < 1) throw ContractViolation("controller: horizon must be >= 1");
  if (controls_per_plan < 1 || (horizon > 1 && controls_per_plan >= horizon)) {
    throw ContractViolation("controller: controls per plan must satisfy 1 <= h_c < h");
  }
  if (!std::isfinite(margin)) throw ContractViolation("controller: margin must be finite");
}

Control fallback_control(const SafetyOracle& oracle, const DynamicsModel& model, const State& x) {
  const ValueAndGradient vg = oracle.value_and_gradient(x);
  return hamiltonian_max(model, x, vg.gradient).control;
}

MpcController::MpcController(ControllerConfig config, const Task& task,
                             std::shared_ptr<const ValueField> value)
    : config_(std::move(config)),
      task_(task),
      oracle_(std::move(value), config_.margin),
      running_(std::make_shared<GoalDistanceCost>(task.goal_x, task.goal_y, 1.0)),
      terminal_(std::make_shared<GoalDistanceCost>(task.goal_x, task.goal_y, 2.0)),
      obstacles_(std::make_shared<ObstacleConstraint>(task.obstacles)),
      terminal_constraint_(std::make_shared<SafetyValueConstraint>(oracle_)),
      solver_(config_.solver) {
  config_.validate();
  if (!task.model) throw ContractViolation("controller: task has no model");
  if (oracle_.field().grid.ndims() != task.model->state_dim()) {
    throw ContractViolation("controller: value field dimension does not match the model");
  }
}

OcpSpec MpcController::problem(const State& x) const {
  OcpSpec spec;
  spec.model = task_.model;
  spec.dt = task_.dt;
  spec.horizon = config_.horizon;
  spec.x0 = x;
  spec.running = running_;
  spec.terminal = terminal_;
  spec.control_weight = task_.control_weight;
  spec.path_constraint = obstacles_;
  spec.path_first = 1;
  if (config_.variant == Variant::SafetyValue) {
    spec.path_last = config_.horizon - 1;
    spec.terminal_constraint = terminal_constraint_;
  } else {
    spec.path_last = config_.horizon;
  }
  return spec;
}

SolveResult MpcController::plan(const State& x, const SolveResult* previous) {
  const OcpSpec spec = problem(x);
  if (config_.warm_start == WarmStart::Shift && previous &&
      static_cast<int>(previous->controls.size()) == config_.horizon) {
    const auto& prev = previous->controls;
    const int shift = config_.controls_per_plan;
    std::vector<Control> guess;
    guess.reserve(prev.size());
    for (int k = 0; k < config_.horizon; ++k) {
      guess.push_back(prev[std::min(k + shift, config_.horizon - 1)]);
    }
    return solver_.solve(spec, guess);
  }
  return solver_.solve(spec);
}

RolloutRecord run_rollout(MpcController& controller, const Task& task, const State& x0,
                          std::uint64_t seed) {
  const ControllerConfig& config = controller.config();
  const DynamicsModel& model = *task.model;
  const SafetyOracle& oracle = controller.oracle();
  const int steps = task.steps;
  if (steps < 1) throw ContractViolation("rollout: task needs at least one step");
  if (x0.size() != model.state_dim()) throw ContractViolation("rollout: x0 dimension mismatch");

  RolloutRecord rec;
  rec.seed = seed;
  rec.variant = config.variant;
  rec.horizon = config.horizon;
  rec.controls_per_plan = config.controls_per_plan;
  rec.states.reserve(static_cast<std::size_t>(steps) + 1);
  rec.controls.reserve(steps);
  rec.states.push_back(x0);

  SolveResult previous;
  bool have_previous = false;
  int k = 0;
  while (k < steps) {
    const State& x = rec.states.back();
    SolveResult plan = controller.plan(x, have_previous ? &previous : nullptr);
    rec.plan_statuses.push_back(plan.status);
    const bool use_fallback = !plan.usable() && config.fallback_enabled();
    if (use_fallback) ++rec.fallback_count;

    const int apply = std::min(config.controls_per_plan, steps - k);
    for (int i = 0; i < apply; ++i, ++k) {
      const State& current = rec.states.back();
      Control u;
      if (use_fallback) {
        u = fallback_control(oracle, model, current);
      } else if (static_cast<int>(plan.controls.size()) > i && plan.controls[i].allFinite()) {
        u = plan.controls[i];
      } else {
        u = Control::Zero(model.control_dim());
      }
      const StepResult next = step_ex(model, current, u, task.dt);
      if (next.clamped) ++rec.clamp_events;
      rec.controls.push_back(u);
      rec.states.push_back(next.next);
    }
    if (plan.controls.size() == static_cast<std::size_t>(config.horizon)) {
      previous = std::move(plan);
      have_previous = true;
    }
  }

  rec.constraint_values.reserve(rec.states.size());
  rec.safety_values.reserve(rec.states.size());
  double min_l = std::numeric_limits<double>::infinity();
  double cost = 0.0;
  for (std::size_t j = 0; j < rec.states.size(); ++j) {
    const State& x = rec.states[j];
    const double l = task.obstacles.signed_distance(x[0], x[1]);
    rec.constraint_values.push_back(l);
    rec.safety_values.push_back(oracle.value(x));
    min_l = std::min(min_l, l);
    const double d = std::hypot(x[0] - task.goal_x, x[1] - task.goal_y);
    if (d <= task.goal_tolerance) rec.goal_reached = true;
    if (j >= 1) cost += d;
  }
  const State& last = rec.states.back();
  cost += std::hypot(last[0] - task.goal_x, last[1] - task.goal_y);
  rec.min_constraint = min_l;
  rec.safe = min_l >= 0.0;
  rec.cost = cost;
  return rec;
}

}  // namespace svmpc
