#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "svmpc/dynamics.hpp"
#include "svmpc/obstacles.hpp"
#include "svmpc/valuefn.hpp"

namespace svmpc {

// ---------------------------------------------------------------------------
// Cost and constraint terms

/// Second-order expansion of a stage cost; terms accumulate with +=.
struct CostExpansion {
  State lx;
  Control lu;
  StateMatrix lxx;
  ControlMatrix luu;
  GainMatrix lux;

  void reset(int n, int m);
};

/// Running cost r(x, u).
class RunningCost {
 public:
  virtual ~RunningCost() = default;
  virtual double value(const State& x, const Control& u) const = 0;
  /// Adds gradient and Hessian (or a PSD approximation of it) into `e`.
  virtual void expand(const State& x, const Control& u, CostExpansion& e) const = 0;
};

/// Terminal cost phi(x).
class TerminalCost {
 public:
  virtual ~TerminalCost() = default;
  virtual double value(const State& x) const = 0;
  virtual void expand(const State& x, State& lx, StateMatrix& lxx) const = 0;
};

/// Inequality g(x) >= 0 on the state.
class StateConstraint {
 public:
  virtual ~StateConstraint() = default;
  virtual double value(const State& x) const = 0;
  virtual double value_and_gradient(const State& x, State& grad) const = 0;
};

/// weight * |(x0, x1) - goal|, usable as running and terminal cost.
class GoalDistanceCost final : public RunningCost, public TerminalCost {
 public:
  GoalDistanceCost(double gx, double gy, double weight = 1.0);

  double value(const State& x) const override;
  double value(const State& x, const Control&) const override { return value(x); }
  void expand(const State& x, State& lx, StateMatrix& lxx) const override;
  void expand(const State& x, const Control&, CostExpansion& e) const override {
    expand(x, e.lx, e.lxx);
  }

 private:
  double gx_;
  double gy_;
  double weight_;
};

/// (x - x_ref)' Q (x - x_ref) + u' R u; the terminal form drops the control term.
class QuadraticCost final : public RunningCost, public TerminalCost {
 public:
  QuadraticCost(StateMatrix q, ControlMatrix r, State x_ref);

  double value(const State& x) const override;
  double value(const State& x, const Control& u) const override;
  void expand(const State& x, State& lx, StateMatrix& lxx) const override;
  void expand(const State& x, const Control& u, CostExpansion& e) const override;

 private:
  StateMatrix q_;
  ControlMatrix r_;
  State x_ref_;
};

/// Signed x-y distance to a set of circular obstacles.
class ObstacleConstraint final : public StateConstraint {
 public:
  explicit ObstacleConstraint(ObstacleSet obstacles) : obstacles_(std::move(obstacles)) {}

  double value(const State& x) const override;
  double value_and_gradient(const State& x, State& grad) const override;

 private:
  ObstacleSet obstacles_;
};

/// V_s(x) - margin, from the multilinear interpolant of a safety value field.
class SafetyValueConstraint final : public StateConstraint {
 public:
  explicit SafetyValueConstraint(SafetyOracle oracle) : oracle_(std::move(oracle)) {}

  double value(const State& x) const override;
  double value_and_gradient(const State& x, State& grad) const override;

 private:
  SafetyOracle oracle_;
};

/// a . x - b.
class LinearStateConstraint final : public StateConstraint {
 public:
  LinearStateConstraint(State a, double b) : a_(std::move(a)), b_(b) {}

  double value(const State& x) const override { return a_.dot(x) - b_; }
  double value_and_gradient(const State& x, State& grad) const override;

 private:
  State a_;
  double b_;
};

// ---------------------------------------------------------------------------
// Problem and result

/// min_u sum_{k<h} [r(x_k, u_k) + w_u |u_k|^2] + phi(x_h)
/// s.t. x_{k+1} = f_d(x_k, u_k), path g(x_k) >= 0 for k in [path_first, path_last],
///      terminal g_T(x_h) >= 0, control bounds of the model.
/// x_0 is fixed, so constraints are only imposed for k >= 1.
struct OcpSpec {
  std::shared_ptr<const DynamicsModel> model;
  double dt = 0.01;
  int horizon = 1;
  State x0;
  std::shared_ptr<const RunningCost> running;    // null: zero
  std::shared_ptr<const TerminalCost> terminal;  // null: zero
  double control_weight = 0.0;
  std::shared_ptr<const StateConstraint> path_constraint;  // null: none
  int path_first = 1;
  int path_last = 1;
  std::shared_ptr<const StateConstraint> terminal_constraint;  // null: none
};

enum class SolveStatus { Optimal, FeasibleSuboptimal, Infeasible, IterationLimit, NumericalFailure };

std::string to_string(SolveStatus status);

struct SolverOptions {
  double stationarity_tol = 1e-6;
  double feasibility_tol = 1e-4;
  double multiplier_tol = 1e-6;  // largest multiplier update accepted as converged
  int max_outer_iterations = 10;
  int max_inner_iterations = 100;
  double penalty_init = 10.0;
  double penalty_scale = 10.0;
  double penalty_max = 1e7;
  double armijo = 1e-4;
  int max_line_search_steps = 12;
  double regularization_max = 1e10;
};

/// Multipliers of the augmented Lagrangian, one per constrained step.
struct Multipliers {
  std::vector<double> path;  // size horizon + 1, entries k < path_first stay zero
  double terminal = 0.0;
  double penalty = 0.0;

  static Multipliers zeros(int horizon);
};

struct SolveResult {
  std::vector<State> states;      // horizon + 1
  std::vector<Control> controls;  // horizon
  double cost = 0.0;              // including the control regularizer
  double task_cost = 0.0;         // without the control regularizer
  SolveStatus status = SolveStatus::IterationLimit;
  double stationarity = 0.0;
  double max_violation = 0.0;
  Multipliers multipliers;
  int outer_iterations = 0;
  int inner_iterations = 0;

  bool usable() const {
    return status == SolveStatus::Optimal || status == SolveStatus::FeasibleSuboptimal;
  }
};

struct CostEvaluation {
  double cost = 0.0;
  double task_cost = 0.0;
  std::vector<State> states;
};

/// Rolls out f_d from x0 under `controls` (clamped to the bounds) and
/// accumulates the objective.
CostEvaluation evaluate_cost(const OcpSpec& spec, const std::vector<Control>& controls);

/// Largest violation max(0, -g) over the constrained steps of a trajectory.
double max_constraint_violation(const OcpSpec& spec, const std::vector<State>& states);

/// Gradient of the augmented Lagrangian with respect to the stacked controls,
/// by an adjoint pass. Components pinned at an active control bound are
/// projected out.
std::vector<Control> merit_gradient(const OcpSpec& spec, const std::vector<Control>& controls,
                                    const Multipliers& multipliers, bool project = true);

/// Euclidean norm of merit_gradient().
double stationarity_residual(const OcpSpec& spec, const std::vector<Control>& controls,
                             const Multipliers& multipliers);
double stationarity_residual(const OcpSpec& spec, const SolveResult& result);

/// Called with the merit value after every accepted inner iteration.
using MeritObserver = std::function<void(int outer, double merit)>;

/// Augmented-Lagrangian iterative LQR over a single-shooting parameterization.
/// An instance owns its workspace and is not thread-safe; use one per thread.
class TrajectoryOptimizer {
 public:
  explicit TrajectoryOptimizer(SolverOptions options = {}) : options_(options) {}

  const SolverOptions& options() const { return options_; }
  void set_observer(MeritObserver observer) { observer_ = std::move(observer); }

  SolveResult solve(const OcpSpec& spec,
                    const std::optional<std::vector<Control>>& warm_start = std::nullopt);

 private:
  SolverOptions options_;
  MeritObserver observer_;
};

}  // namespace svmpc
