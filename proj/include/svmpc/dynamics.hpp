#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "svmpc/types.hpp"

namespace svmpc {

/// Wraps an angle to [-pi, pi).
double wrap_angle(double angle);

/// Continuous-time, control-affine system dx/dt = drift(x) + G u with a
/// constant input matrix G and box-bounded controls.
///
/// Periodic state dimensions are wrapped to [-pi, pi) after each discrete
/// step. Clamped dimensions are projected onto [state_lo, state_hi] after each
/// step; the remaining entries of the state box only describe the region where
/// initial states are sampled.
class DynamicsModel {
 public:
  struct Limits {
    Control control_lo;
    Control control_hi;
    State state_lo;
    State state_hi;
    std::vector<int> periodic_dims;
    std::vector<int> clamped_dims;
  };

  DynamicsModel(std::string name, InputMatrix input_matrix, Limits limits);
  virtual ~DynamicsModel() = default;

  DynamicsModel(const DynamicsModel&) = delete;
  DynamicsModel& operator=(const DynamicsModel&) = delete;

  const std::string& name() const { return name_; }
  int state_dim() const { return static_cast<int>(input_matrix_.rows()); }
  int control_dim() const { return static_cast<int>(input_matrix_.cols()); }

  const Control& control_lo() const { return limits_.control_lo; }
  const Control& control_hi() const { return limits_.control_hi; }
  const State& state_lo() const { return limits_.state_lo; }
  const State& state_hi() const { return limits_.state_hi; }
  const std::vector<int>& periodic_dims() const { return limits_.periodic_dims; }
  const std::vector<int>& clamped_dims() const { return limits_.clamped_dims; }
  bool is_periodic(int dim) const;

  const InputMatrix& input_matrix() const { return input_matrix_; }

  /// Control-independent part of the vector field. `x` and `out` have
  /// state_dim() entries.
  virtual void drift(std::span<const double> x, std::span<double> out) const = 0;

  /// Jacobian of drift() with respect to the state.
  virtual void drift_jacobian(std::span<const double> x, StateMatrix& out) const = 0;

  /// sum_i weights[i] * Hessian(drift_i)(x). Zero unless overridden, which is
  /// exact for affine drift.
  virtual void weighted_drift_hessian(std::span<const double> x, std::span<const double> weights,
                                      StateMatrix& out) const;

  /// Per-dimension upper bound on |f_i(x, u)| over the box [lo, hi] and all
  /// admissible controls. Used as Lax-Friedrichs dissipation coefficients.
  virtual State flow_bound(const State& lo, const State& hi) const = 0;

 private:
  std::string name_;
  InputMatrix input_matrix_;
  Limits limits_;
};

/// 4D Dubins car: (x, y, heading, speed) with controls (turn rate, acceleration).
class Dubins4D final : public DynamicsModel {
 public:
  struct Params {
    double turn_rate_max = 2.0;
    double accel_max = 1.0;
    double speed_lo = 0.1;
    double speed_hi = 3.0;
    double x_lo = -4.0;
    double x_hi = 4.0;
    double y_lo = -4.0;
    double y_hi = 4.0;
  };

  explicit Dubins4D(const Params& params);

  const Params& params() const { return params_; }

  void drift(std::span<const double> x, std::span<double> out) const override;
  void drift_jacobian(std::span<const double> x, StateMatrix& out) const override;
  void weighted_drift_hessian(std::span<const double> x, std::span<const double> weights,
                              StateMatrix& out) const override;
  State flow_bound(const State& lo, const State& hi) const override;

 private:
  Params params_;
};

/// Double integrator dx/dt = v, dv/dt = u with |u| <= u_max.
class DoubleIntegrator final : public DynamicsModel {
 public:
  DoubleIntegrator(double u_max, const State& box_lo, const State& box_hi);

  void drift(std::span<const double> x, std::span<double> out) const override;
  void drift_jacobian(std::span<const double> x, StateMatrix& out) const override;
  State flow_bound(const State& lo, const State& hi) const override;
};

/// Linear time-invariant system dx/dt = A x + B u.
class LinearSystem final : public DynamicsModel {
 public:
  LinearSystem(const StateMatrix& a, const InputMatrix& b, Limits limits);

  const StateMatrix& a() const { return a_; }

  void drift(std::span<const double> x, std::span<double> out) const override;
  void drift_jacobian(std::span<const double> x, StateMatrix& out) const override;
  State flow_bound(const State& lo, const State& hi) const override;

 private:
  StateMatrix a_;
};

/// f(x, u) = 0 for every state and control.
class ZeroDynamics final : public DynamicsModel {
 public:
  ZeroDynamics(const State& box_lo, const State& box_hi, int control_dim = 1);

  void drift(std::span<const double> x, std::span<double> out) const override;
  void drift_jacobian(std::span<const double> x, StateMatrix& out) const override;
  State flow_bound(const State& lo, const State& hi) const override;
};

/// Evaluates dx/dt = f(x, u).
State flow(const DynamicsModel& model, const State& x, const Control& u);

struct StepJacobians {
  StateMatrix fx;  // d x_next / d x
  InputMatrix fu;  // d x_next / d u
};

struct StepResult {
  State next;
  bool clamped = false;  // a clamped dimension hit its bound
};

/// One RK4 step with zero-order-hold control, followed by wrapping of periodic
/// dimensions and projection of clamped dimensions. When `jac` is non-null the
/// exact Jacobians of the composite map are written to it.
StepResult step_ex(const DynamicsModel& model, const State& x, const Control& u, double dt,
                   StepJacobians* jac = nullptr);

/// Discrete-time dynamics f_d(x, u).
State step(const DynamicsModel& model, const State& x, const Control& u, double dt);

struct HamiltonianMax {
  double value = 0.0;
  Control control;
};

/// max over admissible u of p . f(x, u), with an attaining control. Each
/// channel is bang-bang; a zero coefficient selects the lower bound.
HamiltonianMax hamiltonian_max(const DynamicsModel& model, const State& x, const Costate& p);

/// a - b with periodic dimensions wrapped to [-pi, pi).
State state_difference(const DynamicsModel& model, const State& a, const State& b);

/// Clamps each control channel onto the model's bounds.
Control clamp_control(const DynamicsModel& model, const Control& u);

}  // namespace svmpc
