#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "svmpc/dynamics.hpp"
#include "svmpc/grid.hpp"
#include "svmpc/obstacles.hpp"

namespace svmpc {

/// Stability limit of the explicit Lax-Friedrichs sweep: dt * sum_i(alpha_i / dx_i) <= 1.
inline constexpr double kCflLimit = 1.0;

class CflViolation : public ContractViolation {
 public:
  CflViolation(double dt, double cfl_number);
  double dt() const { return dt_; }

 private:
  double dt_;
};

/// Stand-in for l in obstacle-free space so that value fields stay finite.
inline constexpr double kFreeSpaceDistance = 1e3;

/// l(x) at every node: signed x-y distance to the obstacle union, capped at
/// kFreeSpaceDistance. Requires a grid whose first two axes are x and y.
ValueField constraint_field(const ObstacleSet& obstacles, const Grid& grid);

/// Global Lax-Friedrichs dissipation coefficients alpha_i = max |f_i| over the
/// grid box and the control box.
State dissipation_coefficients(const DynamicsModel& model, const Grid& grid);

/// dt * sum_i(alpha_i / dx_i) for the given step.
double cfl_number(const DynamicsModel& model, const Grid& grid, double dt);

/// Largest dt with cfl_number(dt) == cfl. Returns 1 for dynamics with zero
/// dissipation (nothing propagates, any step is stable).
double cfl_time_step(const DynamicsModel& model, const Grid& grid, double cfl);

/// Global: alpha_i from dissipation_coefficients(). Local: alpha_i = max_u |f_i(x, u)|
/// at each node, which is still monotone under the same CFL step.
enum class Dissipation { Global, Local };

std::string to_string(Dissipation dissipation);
/// Accepts "global" and "local". Throws ContractViolation otherwise.
Dissipation parse_dissipation(std::string_view text);

/// One backward-time update V+ = min(l, V + dt * H_LF(x, DV)). Throws
/// CflViolation when dt exceeds the stability limit.
///
/// Non-periodic boundaries use linear-extrapolation ghost nodes, and boundary
/// nodes additionally take min(V+, V). Along a clamped model dimension whose
/// grid axis ends on the clamp bound, only inward flow enters the Hamiltonian.
ValueField vi_step(const DynamicsModel& model, const ValueField& value, const ValueField& constraint,
                   double dt, int workers = 1, Dissipation dissipation = Dissipation::Global);

struct ReachabilityOptions {
  double tol = 1e-4;
  int max_iters = 2000;
  double cfl = 0.5;
  int workers = 1;
  Dissipation dissipation = Dissipation::Global;
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  double final_change = 0.0;  // sup-norm change of the last iteration
  double dt = 0.0;            // CFL step used at every iteration
  double cfl = 0.0;
  double wall_time_s = 0.0;

  std::string status() const { return converged ? "converged" : "not_converged"; }
};

/// Called after each iteration with the previous and the new iterate.
using IterateObserver =
    std::function<void(int iteration, const ValueField& previous, const ValueField& next)>;

struct SafetyValueSolution {
  ValueField value;
  SolveReport report;
};

/// Iterates vi_step from V0 = l until the sup-norm change drops below tol or
/// max_iters is reached. The field is returned either way.
SafetyValueSolution solve_safety_value(const DynamicsModel& model, const ValueField& constraint,
                                       const ReachabilityOptions& options = {},
                                       const IterateObserver& observer = {});

SafetyValueSolution solve_safety_value(const DynamicsModel& model, const Grid& grid,
                                       const ObstacleSet& obstacles,
                                       const ReachabilityOptions& options = {},
                                       const IterateObserver& observer = {});

}  // namespace svmpc
