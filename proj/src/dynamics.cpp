#include "svmpc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace svmpc {

namespace {

void require_dims(const DynamicsModel& model, Eigen::Index nx, Eigen::Index nu) {
  if (nx != model.state_dim() || nu != model.control_dim()) {
    std::ostringstream msg;
    msg << model.name() << ": expected state/control dims " << model.state_dim() << "/"
        << model.control_dim() << ", got " << nx << "/" << nu;
    throw ContractViolation(msg.str());
  }
}

State evaluate_flow(const DynamicsModel& model, const State& x, const Control& u) {
  State dx(model.state_dim());
  model.drift({x.data(), static_cast<size_t>(x.size())}, {dx.data(), static_cast<size_t>(dx.size())});
  dx.noalias() += model.input_matrix() * u;
  return dx;
}

StateMatrix evaluate_fx(const DynamicsModel& model, const State& x) {
  StateMatrix fx(model.state_dim(), model.state_dim());
  model.drift_jacobian({x.data(), static_cast<size_t>(x.size())}, fx);
  return fx;
}

}  // namespace

double wrap_angle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double wrapped = angle - kTwoPi * std::floor((angle + std::numbers::pi) / kTwoPi);
  if (wrapped >= std::numbers::pi) wrapped -= kTwoPi;
  if (wrapped < -std::numbers::pi) wrapped = -std::numbers::pi;
  return wrapped;
}

DynamicsModel::DynamicsModel(std::string name, InputMatrix input_matrix, Limits limits)
    : name_(std::move(name)), input_matrix_(std::move(input_matrix)), limits_(std::move(limits)) {
  const int n = state_dim();
  const int m = control_dim();
  if (n < 1 || n > kMaxStateDim || m < 1 || m > kMaxControlDim) {
    throw ContractViolation(name_ + ": unsupported state/control dimension");
  }
  if (limits_.control_lo.size() != m || limits_.control_hi.size() != m ||
      limits_.state_lo.size() != n || limits_.state_hi.size() != n) {
    throw ContractViolation(name_ + ": bound vectors do not match model dimensions");
  }
  for (int i = 0; i < m; ++i) {
    if (!(limits_.control_lo[i] < limits_.control_hi[i])) {
      throw ContractViolation(name_ + ": control_lo must be < control_hi");
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!(limits_.state_lo[i] < limits_.state_hi[i])) {
      throw ContractViolation(name_ + ": state_lo must be < state_hi");
    }
  }
  auto check_dims = [&](const std::vector<int>& dims) {
    for (int d : dims) {
      if (d < 0 || d >= n) throw ContractViolation(name_ + ": state index out of range");
    }
  };
  check_dims(limits_.periodic_dims);
  check_dims(limits_.clamped_dims);
}

bool DynamicsModel::is_periodic(int dim) const {
  return std::find(limits_.periodic_dims.begin(), limits_.periodic_dims.end(), dim) !=
         limits_.periodic_dims.end();
}

// ---------------------------------------------------------------------------
// Dubins4D

namespace {

DynamicsModel::Limits dubins_limits(const Dubins4D::Params& p) {
  DynamicsModel::Limits lim;
  lim.control_lo = Control(2);
  lim.control_lo << -p.turn_rate_max, -p.accel_max;
  lim.control_hi = Control(2);
  lim.control_hi << p.turn_rate_max, p.accel_max;
  lim.state_lo = State(4);
  lim.state_lo << p.x_lo, p.y_lo, -std::numbers::pi, p.speed_lo;
  lim.state_hi = State(4);
  lim.state_hi << p.x_hi, p.y_hi, std::numbers::pi, p.speed_hi;
  lim.periodic_dims = {2};
  lim.clamped_dims = {3};
  return lim;
}

InputMatrix dubins_input_matrix() {
  InputMatrix g = InputMatrix::Zero(4, 2);
  g(2, 0) = 1.0;
  g(3, 1) = 1.0;
  return g;
}

}  // namespace

Dubins4D::Dubins4D(const Params& params)
    : DynamicsModel("dubins4d", dubins_input_matrix(), dubins_limits(params)), params_(params) {}

void DynamicsModel::weighted_drift_hessian(std::span<const double> x, std::span<const double>,
                                           StateMatrix& out) const {
  out.setZero(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(x.size()));
}

void Dubins4D::drift(std::span<const double> x, std::span<double> out) const {
  out[0] = x[3] * std::cos(x[2]);
  out[1] = x[3] * std::sin(x[2]);
  out[2] = 0.0;
  out[3] = 0.0;
}

void Dubins4D::drift_jacobian(std::span<const double> x, StateMatrix& out) const {
  const double c = std::cos(x[2]);
  const double s = std::sin(x[2]);
  out.setZero(4, 4);
  out(0, 2) = -x[3] * s;
  out(0, 3) = c;
  out(1, 2) = x[3] * c;
  out(1, 3) = s;
}

void Dubins4D::weighted_drift_hessian(std::span<const double> x, std::span<const double> w,
                                      StateMatrix& out) const {
  const double c = std::cos(x[2]);
  const double s = std::sin(x[2]);
  out.setZero(4, 4);
  out(2, 2) = -x[3] * (w[0] * c + w[1] * s);
  out(2, 3) = w[1] * c - w[0] * s;
  out(3, 2) = out(2, 3);
}

State Dubins4D::flow_bound(const State& lo, const State& hi) const {
  const double speed = std::max(std::abs(lo[3]), std::abs(hi[3]));
  State bound(4);
  bound << speed, speed, params_.turn_rate_max, params_.accel_max;
  return bound;
}

// ---------------------------------------------------------------------------
// DoubleIntegrator

namespace {

DynamicsModel::Limits box_limits(const State& lo, const State& hi, const Control& ulo,
                                 const Control& uhi) {
  DynamicsModel::Limits lim;
  lim.control_lo = ulo;
  lim.control_hi = uhi;
  lim.state_lo = lo;
  lim.state_hi = hi;
  return lim;
}

InputMatrix double_integrator_input() {
  InputMatrix g = InputMatrix::Zero(2, 1);
  g(1, 0) = 1.0;
  return g;
}

}  // namespace

DoubleIntegrator::DoubleIntegrator(double u_max, const State& box_lo, const State& box_hi)
    : DynamicsModel("double_integrator", double_integrator_input(),
                    box_limits(box_lo, box_hi, Control::Constant(1, -u_max),
                               Control::Constant(1, u_max))) {}

void DoubleIntegrator::drift(std::span<const double> x, std::span<double> out) const {
  out[0] = x[1];
  out[1] = 0.0;
}

void DoubleIntegrator::drift_jacobian(std::span<const double>, StateMatrix& out) const {
  out.setZero(2, 2);
  out(0, 1) = 1.0;
}

State DoubleIntegrator::flow_bound(const State& lo, const State& hi) const {
  State bound(2);
  bound << std::max(std::abs(lo[1]), std::abs(hi[1])),
      std::max(std::abs(control_lo()[0]), std::abs(control_hi()[0]));
  return bound;
}

// ---------------------------------------------------------------------------
// LinearSystem

LinearSystem::LinearSystem(const StateMatrix& a, const InputMatrix& b, Limits limits)
    : DynamicsModel("linear", b, std::move(limits)), a_(a) {
  if (a.rows() != b.rows() || a.cols() != b.rows()) {
    throw ContractViolation("linear: A must be n x n with n = rows(B)");
  }
}

void LinearSystem::drift(std::span<const double> x, std::span<double> out) const {
  const int n = state_dim();
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += a_(i, j) * x[j];
    out[i] = acc;
  }
}

void LinearSystem::drift_jacobian(std::span<const double>, StateMatrix& out) const { out = a_; }

State LinearSystem::flow_bound(const State& lo, const State& hi) const {
  const int n = state_dim();
  State bound = State::Zero(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      bound[i] += std::abs(a_(i, j)) * std::max(std::abs(lo[j]), std::abs(hi[j]));
    }
    for (int j = 0; j < control_dim(); ++j) {
      bound[i] += std::abs(input_matrix()(i, j)) *
                  std::max(std::abs(control_lo()[j]), std::abs(control_hi()[j]));
    }
  }
  return bound;
}

// ---------------------------------------------------------------------------
// ZeroDynamics

ZeroDynamics::ZeroDynamics(const State& box_lo, const State& box_hi, int control_dim)
    : DynamicsModel("zero", InputMatrix::Zero(box_lo.size(), control_dim),
                    box_limits(box_lo, box_hi, Control::Constant(control_dim, -1.0),
                               Control::Constant(control_dim, 1.0))) {}

void ZeroDynamics::drift(std::span<const double>, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
}

void ZeroDynamics::drift_jacobian(std::span<const double>, StateMatrix& out) const {
  out.setZero(state_dim(), state_dim());
}

State ZeroDynamics::flow_bound(const State&, const State&) const {
  return State::Zero(state_dim());
}

// ---------------------------------------------------------------------------
// Free functions

State flow(const DynamicsModel& model, const State& x, const Control& u) {
  require_dims(model, x.size(), u.size());
  return evaluate_flow(model, x, u);
}

StepResult step_ex(const DynamicsModel& model, const State& x, const Control& u, double dt,
                   StepJacobians* jac) {
  require_dims(model, x.size(), u.size());
  if (!(dt > 0.0)) throw ContractViolation("step: dt must be positive");

  const int n = model.state_dim();
  const double half = 0.5 * dt;

  const State k1 = evaluate_flow(model, x, u);
  const State x2 = x + half * k1;
  const State k2 = evaluate_flow(model, x2, u);
  const State x3 = x + half * k2;
  const State k3 = evaluate_flow(model, x3, u);
  const State x4 = x + dt * k3;
  const State k4 = evaluate_flow(model, x4, u);

  StepResult result;
  result.next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  if (jac != nullptr) {
    const InputMatrix& g = model.input_matrix();
    const StateMatrix eye = StateMatrix::Identity(n, n);
    // Stage sensitivities dk_i/dx and dk_i/du by the chain rule.
    const StateMatrix a1 = evaluate_fx(model, x);
    const StateMatrix j1x = a1;
    const InputMatrix j1u = g;
    const StateMatrix a2 = evaluate_fx(model, x2);
    const StateMatrix j2x = a2 * (eye + half * j1x);
    const InputMatrix j2u = a2 * (half * j1u) + g;
    const StateMatrix a3 = evaluate_fx(model, x3);
    const StateMatrix j3x = a3 * (eye + half * j2x);
    const InputMatrix j3u = a3 * (half * j2u) + g;
    const StateMatrix a4 = evaluate_fx(model, x4);
    const StateMatrix j4x = a4 * (eye + dt * j3x);
    const InputMatrix j4u = a4 * (dt * j3u) + g;
    jac->fx = eye + (dt / 6.0) * (j1x + 2.0 * j2x + 2.0 * j3x + j4x);
    jac->fu = (dt / 6.0) * (j1u + 2.0 * j2u + 2.0 * j3u + j4u);
  }

  for (int d : model.periodic_dims()) result.next[d] = wrap_angle(result.next[d]);
  for (int d : model.clamped_dims()) {
    const double lo = model.state_lo()[d];
    const double hi = model.state_hi()[d];
    if (result.next[d] < lo || result.next[d] > hi) {
      result.next[d] = std::clamp(result.next[d], lo, hi);
      result.clamped = true;
      if (jac != nullptr) {
        jac->fx.row(d).setZero();
        jac->fu.row(d).setZero();
      }
    }
  }
  return result;
}

State step(const DynamicsModel& model, const State& x, const Control& u, double dt) {
  return step_ex(model, x, u, dt).next;
}

HamiltonianMax hamiltonian_max(const DynamicsModel& model, const State& x, const Costate& p) {
  const int n = model.state_dim();
  const int m = model.control_dim();
  if (x.size() != n || p.size() != n) {
    throw ContractViolation(model.name() + ": hamiltonian_max expects state and costate of size n");
  }
  State drift(n);
  model.drift({x.data(), static_cast<size_t>(n)}, {drift.data(), static_cast<size_t>(n)});

  HamiltonianMax out;
  out.value = p.dot(drift);
  out.control = Control(m);
  const Control coeff = model.input_matrix().transpose() * p;
  for (int j = 0; j < m; ++j) {
    const double u = coeff[j] > 0.0 ? model.control_hi()[j] : model.control_lo()[j];
    out.control[j] = u;
    out.value += coeff[j] * u;
  }
  return out;
}

State state_difference(const DynamicsModel& model, const State& a, const State& b) {
  State d = a - b;
  for (int i : model.periodic_dims()) d[i] = wrap_angle(d[i]);
  return d;
}

Control clamp_control(const DynamicsModel& model, const Control& u) {
  return u.cwiseMax(model.control_lo()).cwiseMin(model.control_hi());
}

}  // namespace svmpc
