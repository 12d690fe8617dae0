#include "svmpc/trajopt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>

namespace svmpc {

// ---------------------------------------------------------------------------
// Terms

void CostExpansion::reset(int n, int m) {
  lx.setZero(n);
  lu.setZero(m);
  lxx.setZero(n, n);
  luu.setZero(m, m);
  lux.setZero(m, n);
}

GoalDistanceCost::GoalDistanceCost(double gx, double gy, double weight)
    : gx_(gx), gy_(gy), weight_(weight) {}

double GoalDistanceCost::value(const State& x) const {
  return weight_ * std::hypot(x[0] - gx_, x[1] - gy_);
}

void GoalDistanceCost::expand(const State& x, State& lx, StateMatrix& lxx) const {
  // Hessian of the norm is (I - n n') / rho; rho is floored to keep it bounded
  // next to the goal.
  constexpr double kRhoFloor = 1e-3;
  const double dx = x[0] - gx_;
  const double dy = x[1] - gy_;
  const double rho = std::hypot(dx, dy);
  if (rho == 0.0) return;
  const double nx = dx / rho;
  const double ny = dy / rho;
  lx[0] += weight_ * nx;
  lx[1] += weight_ * ny;
  const double s = weight_ / std::max(rho, kRhoFloor);
  lxx(0, 0) += s * (1.0 - nx * nx);
  lxx(0, 1) += -s * nx * ny;
  lxx(1, 0) += -s * nx * ny;
  lxx(1, 1) += s * (1.0 - ny * ny);
}

QuadraticCost::QuadraticCost(StateMatrix q, ControlMatrix r, State x_ref)
    : q_(std::move(q)), r_(std::move(r)), x_ref_(std::move(x_ref)) {}

double QuadraticCost::value(const State& x) const {
  const State d = x - x_ref_;
  return d.dot(q_ * d);
}

double QuadraticCost::value(const State& x, const Control& u) const {
  return value(x) + u.dot(r_ * u);
}

void QuadraticCost::expand(const State& x, State& lx, StateMatrix& lxx) const {
  const State d = x - x_ref_;
  lx += (q_ + q_.transpose()) * d;
  lxx += q_ + q_.transpose();
}

void QuadraticCost::expand(const State& x, const Control& u, CostExpansion& e) const {
  expand(x, e.lx, e.lxx);
  e.lu += (r_ + r_.transpose()) * u;
  e.luu += r_ + r_.transpose();
}

double ObstacleConstraint::value(const State& x) const {
  return std::min(obstacles_.signed_distance(x[0], x[1]), std::numeric_limits<double>::max());
}

double ObstacleConstraint::value_and_gradient(const State& x, State& grad) const {
  double gx = 0.0;
  double gy = 0.0;
  const double v = obstacles_.signed_distance(x[0], x[1], gx, gy);
  grad.setZero(x.size());
  grad[0] = gx;
  grad[1] = gy;
  return std::min(v, std::numeric_limits<double>::max());
}

double SafetyValueConstraint::value(const State& x) const {
  return oracle_.value(x) - oracle_.margin();
}

double SafetyValueConstraint::value_and_gradient(const State& x, State& grad) const {
  const ValueAndGradient vg = oracle_.value_and_gradient(x);
  grad = vg.gradient;
  return vg.value - oracle_.margin();
}

double LinearStateConstraint::value_and_gradient(const State& x, State& grad) const {
  grad = a_;
  return value(x);
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::FeasibleSuboptimal: return "feasible-suboptimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::IterationLimit: return "iteration-limit";
    case SolveStatus::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

Multipliers Multipliers::zeros(int horizon) {
  Multipliers m;
  m.path.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
  return m;
}

// ---------------------------------------------------------------------------
// Shared evaluation machinery

namespace {

void validate(const OcpSpec& spec) {
  if (!spec.model) throw ContractViolation("ocp: model is null");
  if (spec.horizon < 1) throw ContractViolation("ocp: horizon must be >= 1");
  if (!(spec.dt > 0.0)) throw ContractViolation("ocp: dt must be positive");
  if (spec.x0.size() != spec.model->state_dim()) {
    throw ContractViolation("ocp: x0 dimension does not match the model");
  }
  if (!spec.x0.allFinite()) throw ContractViolation("ocp: x0 must be finite");
  if (spec.control_weight < 0.0) throw ContractViolation("ocp: control weight must be >= 0");
}

bool path_active(const OcpSpec& spec, int k) {
  return spec.path_constraint && k >= 1 && k >= spec.path_first && k <= spec.path_last &&
         k <= spec.horizon;
}

// Augmented-Lagrangian contribution of g(x) >= 0 written as c = -g <= 0.
double al_value(double g, double lambda, double mu) {
  if (mu <= 0.0) return -lambda * g;
  const double t = std::max(0.0, lambda - mu * g);
  return (t * t - lambda * lambda) / (2.0 * mu);
}

// Returns d(al)/dg and the Gauss-Newton curvature in g.
std::pair<double, double> al_derivatives(double g, double lambda, double mu) {
  if (mu <= 0.0) return {-lambda, 0.0};
  const double t = lambda - mu * g;
  if (t <= 0.0) return {0.0, 0.0};
  return {-t, mu};
}

double updated_multiplier(double g, double lambda, double mu) {
  return std::max(0.0, lambda - mu * g);
}

struct Trajectory {
  std::vector<State> xs;
  std::vector<Control> us;
  double cost = 0.0;
  double task_cost = 0.0;
  double merit = 0.0;
};

bool rollout(const OcpSpec& spec, Trajectory& traj) {
  const DynamicsModel& model = *spec.model;
  traj.xs.resize(static_cast<std::size_t>(spec.horizon) + 1);
  traj.xs[0] = spec.x0;
  for (int k = 0; k < spec.horizon; ++k) {
    traj.us[k] = clamp_control(model, traj.us[k]);
    traj.xs[k + 1] = step(model, traj.xs[k], traj.us[k], spec.dt);
    if (!traj.xs[k + 1].allFinite()) return false;
  }
  return true;
}

void accumulate_cost(const OcpSpec& spec, Trajectory& traj) {
  double task = 0.0;
  double reg = 0.0;
  for (int k = 0; k < spec.horizon; ++k) {
    if (spec.running) task += spec.running->value(traj.xs[k], traj.us[k]);
    reg += spec.control_weight * traj.us[k].squaredNorm();
  }
  if (spec.terminal) task += spec.terminal->value(traj.xs[spec.horizon]);
  traj.task_cost = task;
  traj.cost = task + reg;
}

double constraint_merit(const OcpSpec& spec, const std::vector<State>& xs, const Multipliers& mult) {
  double total = 0.0;
  for (int k = 1; k <= spec.horizon; ++k) {
    if (path_active(spec, k)) {
      total += al_value(spec.path_constraint->value(xs[k]), mult.path[k], mult.penalty);
    }
  }
  if (spec.terminal_constraint) {
    total += al_value(spec.terminal_constraint->value(xs[spec.horizon]), mult.terminal, mult.penalty);
  }
  return total;
}

void evaluate_merit(const OcpSpec& spec, const Multipliers& mult, Trajectory& traj) {
  accumulate_cost(spec, traj);
  traj.merit = traj.cost + constraint_merit(spec, traj.xs, mult);
}

// Largest |lambda+ - lambda| of a multiplier update at the current trajectory.
double multiplier_step(const OcpSpec& spec, const std::vector<State>& xs, const Multipliers& mult) {
  double step_size = 0.0;
  for (int k = 1; k <= spec.horizon; ++k) {
    if (path_active(spec, k)) {
      const double g = spec.path_constraint->value(xs[k]);
      step_size = std::max(step_size, std::abs(updated_multiplier(g, mult.path[k], mult.penalty) - mult.path[k]));
    }
  }
  if (spec.terminal_constraint) {
    const double g = spec.terminal_constraint->value(xs[spec.horizon]);
    step_size = std::max(step_size,
                         std::abs(updated_multiplier(g, mult.terminal, mult.penalty) - mult.terminal));
  }
  return step_size;
}

void update_multipliers(const OcpSpec& spec, const std::vector<State>& xs, Multipliers& mult) {
  for (int k = 1; k <= spec.horizon; ++k) {
    if (path_active(spec, k)) {
      mult.path[k] = updated_multiplier(spec.path_constraint->value(xs[k]), mult.path[k], mult.penalty);
    }
  }
  if (spec.terminal_constraint) {
    mult.terminal = updated_multiplier(spec.terminal_constraint->value(xs[spec.horizon]),
                                       mult.terminal, mult.penalty);
  }
}

// First and Gauss-Newton second-order information of the merit along a trajectory.
struct Expansion {
  std::vector<StateMatrix> fx;
  std::vector<InputMatrix> fu;
  std::vector<CostExpansion> stage;
  State terminal_lx;
  StateMatrix terminal_lxx;
};

void add_constraint_terms(const StateConstraint& constraint, const State& x, double lambda,
                          double mu, State& lx, StateMatrix& lxx) {
  State grad;
  const double g = constraint.value_and_gradient(x, grad);
  const auto [dg, curvature] = al_derivatives(g, lambda, mu);
  if (dg != 0.0) lx.noalias() += dg * grad;
  if (curvature != 0.0) lxx.noalias() += curvature * grad * grad.transpose();
}

void expand(const OcpSpec& spec, const Multipliers& mult, const Trajectory& traj, Expansion& ex) {
  const DynamicsModel& model = *spec.model;
  const int n = model.state_dim();
  const int m = model.control_dim();
  const int h = spec.horizon;
  ex.fx.resize(h);
  ex.fu.resize(h);
  ex.stage.resize(h);
  StepJacobians jac;
  for (int k = 0; k < h; ++k) {
    step_ex(model, traj.xs[k], traj.us[k], spec.dt, &jac);
    ex.fx[k] = jac.fx;
    ex.fu[k] = jac.fu;
    CostExpansion& e = ex.stage[k];
    e.reset(n, m);
    if (spec.running) spec.running->expand(traj.xs[k], traj.us[k], e);
    if (spec.control_weight > 0.0) {
      e.lu.noalias() += 2.0 * spec.control_weight * traj.us[k];
      e.luu.diagonal().array() += 2.0 * spec.control_weight;
    }
    if (path_active(spec, k)) {
      add_constraint_terms(*spec.path_constraint, traj.xs[k], mult.path[k], mult.penalty, e.lx, e.lxx);
    }
  }
  ex.terminal_lx.setZero(n);
  ex.terminal_lxx.setZero(n, n);
  const State& xh = traj.xs[h];
  if (spec.terminal) spec.terminal->expand(xh, ex.terminal_lx, ex.terminal_lxx);
  if (path_active(spec, h)) {
    add_constraint_terms(*spec.path_constraint, xh, mult.path[h], mult.penalty, ex.terminal_lx,
                         ex.terminal_lxx);
  }
  if (spec.terminal_constraint) {
    add_constraint_terms(*spec.terminal_constraint, xh, mult.terminal, mult.penalty, ex.terminal_lx,
                         ex.terminal_lxx);
  }
}

std::vector<Control> adjoint_gradient(const OcpSpec& spec, const Trajectory& traj,
                                      const Expansion& ex, bool project) {
  const DynamicsModel& model = *spec.model;
  const int h = spec.horizon;
  std::vector<Control> grad(h);
  State costate = ex.terminal_lx;
  for (int k = h - 1; k >= 0; --k) {
    grad[k] = ex.stage[k].lu + ex.fu[k].transpose() * costate;
    costate = ex.stage[k].lx + ex.fx[k].transpose() * costate;
    if (project) {
      for (int j = 0; j < model.control_dim(); ++j) {
        const double u = traj.us[k][j];
        if ((u >= model.control_hi()[j] && grad[k][j] < 0.0) ||
            (u <= model.control_lo()[j] && grad[k][j] > 0.0)) {
          grad[k][j] = 0.0;
        }
      }
    }
  }
  return grad;
}

double gradient_norm(const std::vector<Control>& grad) {
  double sq = 0.0;
  for (const Control& g : grad) sq += g.squaredNorm();
  return std::sqrt(sq);
}

// Projected-Newton solve of min 0.5 x'Hx + g'x s.t. lower <= x <= upper.
// On success `free` marks the unclamped coordinates and `hff_llt` holds the
// factorization of H restricted to them.
struct BoxQpResult {
  bool ok = false;
  Control x;
  std::array<bool, kMaxControlDim> free{};
  int nfree = 0;
  ControlMatrix hff_inverse;  // inverse of H on the free block, in free-index order
};

BoxQpResult solve_box_qp(const ControlMatrix& hess, const Control& g, const Control& lower,
                         const Control& upper, const Control& x0) {
  const int m = static_cast<int>(g.size());
  BoxQpResult res;
  res.x = x0.cwiseMax(lower).cwiseMin(upper);
  auto objective = [&](const Control& x) { return g.dot(x) + 0.5 * x.dot(hess * x); };

  bool refresh_only = false;
  for (int iter = 0; iter < 50; ++iter) {
    const Control grad = g + hess * res.x;
    std::array<int, kMaxControlDim> free_idx{};
    int nfree = 0;
    for (int i = 0; i < m; ++i) {
      const bool clamped = (res.x[i] <= lower[i] && grad[i] > 0.0) ||
                           (res.x[i] >= upper[i] && grad[i] < 0.0);
      res.free[i] = !clamped;
      if (!clamped) free_idx[nfree++] = i;
    }
    res.nfree = nfree;
    if (nfree == 0) {
      res.ok = true;
      res.hff_inverse.resize(0, 0);
      return res;
    }
    ControlMatrix hff(nfree, nfree);
    Control rhs(nfree);
    for (int a = 0; a < nfree; ++a) {
      rhs[a] = grad[free_idx[a]];
      for (int b = 0; b < nfree; ++b) hff(a, b) = hess(free_idx[a], free_idx[b]);
    }
    Eigen::LLT<ControlMatrix> llt(hff);
    if (llt.info() != Eigen::Success) return res;
    res.hff_inverse = llt.solve(ControlMatrix::Identity(nfree, nfree));
    if (refresh_only || rhs.norm() < 1e-13 * (1.0 + g.norm())) {
      res.ok = true;
      return res;
    }

    const Control newton = -llt.solve(rhs);
    Control dir = Control::Zero(m);
    for (int a = 0; a < nfree; ++a) dir[free_idx[a]] = newton[a];

    const double f0 = objective(res.x);
    const double slope = grad.dot(dir);
    double step = 1.0;
    bool moved = false;
    Control candidate;
    for (int ls = 0; ls < 30; ++ls) {
      candidate = (res.x + step * dir).cwiseMax(lower).cwiseMin(upper);
      if (objective(candidate) - f0 <= 0.1 * step * slope) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) {
      res.ok = true;
      return res;
    }
    const double improvement = f0 - objective(candidate);
    res.x = candidate;
    // One more pass refreshes the active set and factorization at the final point.
    if (improvement <= 1e-14 * (1.0 + std::abs(f0))) refresh_only = true;
  }
  res.ok = true;
  return res;
}

struct Gains {
  std::vector<Control> k;
  std::vector<GainMatrix> K;
  std::vector<Control> pinned;  // bound value for coordinates clamped by the QP, NaN when free
  double dv1 = 0.0;  // linear term of the expected merit change
  double dv2 = 0.0;  // quadratic term
};

bool backward_pass(const OcpSpec& spec, const Trajectory& traj, const Expansion& ex, double reg,
                   Gains& gains) {
  const DynamicsModel& model = *spec.model;
  const int n = model.state_dim();
  const int m = model.control_dim();
  const int h = spec.horizon;
  gains.k.resize(h);
  gains.K.resize(h);
  gains.pinned.resize(h);
  gains.dv1 = 0.0;
  gains.dv2 = 0.0;

  State vx = ex.terminal_lx;
  StateMatrix vxx = ex.terminal_lxx;
  StateMatrix curvature;
  for (int k = h - 1; k >= 0; --k) {
    const StateMatrix& a = ex.fx[k];
    const InputMatrix& b = ex.fu[k];
    const CostExpansion& e = ex.stage[k];
    const State qx = e.lx + a.transpose() * vx;
    const Control qu = e.lu + b.transpose() * vx;
    const StateMatrix vxx_a = vxx * a;
    const InputMatrix vxx_b = vxx * b;
    StateMatrix qxx = e.lxx + a.transpose() * vxx_a;
    // Second-order dynamics term, with the step Hessian approximated by dt * f_xx.
    model.weighted_drift_hessian({traj.xs[k].data(), static_cast<std::size_t>(n)},
                                 {vx.data(), static_cast<std::size_t>(n)}, curvature);
    qxx.noalias() += spec.dt * curvature;
    const ControlMatrix quu = e.luu + b.transpose() * vxx_b;
    const GainMatrix qux = e.lux + b.transpose() * vxx_a;

    ControlMatrix quu_reg = quu;
    quu_reg.diagonal().array() += reg;

    const Control lower = model.control_lo() - traj.us[k];
    const Control upper = model.control_hi() - traj.us[k];
    const Control start = gains.k[k].size() == m ? gains.k[k] : Control(Control::Zero(m));
    const BoxQpResult qp = solve_box_qp(quu_reg, qu, lower, upper, start);
    if (!qp.ok) return false;

    GainMatrix big_k = GainMatrix::Zero(m, n);
    if (qp.nfree > 0) {
      std::array<int, kMaxControlDim> free_idx{};
      int nf = 0;
      for (int i = 0; i < m; ++i) {
        if (qp.free[i]) free_idx[nf++] = i;
      }
      GainMatrix qux_free(nf, n);
      for (int a2 = 0; a2 < nf; ++a2) qux_free.row(a2) = qux.row(free_idx[a2]);
      const GainMatrix k_free = -qp.hff_inverse * qux_free;
      for (int a2 = 0; a2 < nf; ++a2) big_k.row(free_idx[a2]) = k_free.row(a2);
    }
    const Control& kff = qp.x;
    Control& pin = gains.pinned[k];
    pin = Control::Constant(m, std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < m; ++i) {
      if (qp.free[i]) continue;
      pin[i] = kff[i] <= lower[i] ? model.control_lo()[i] : model.control_hi()[i];
    }
    gains.k[k] = kff;
    gains.K[k] = big_k;
    gains.dv1 += kff.dot(qu);
    gains.dv2 += 0.5 * kff.dot(quu * kff);

    vx = qx + big_k.transpose() * (quu * kff) + big_k.transpose() * qu + qux.transpose() * kff;
    vxx = qxx + big_k.transpose() * quu * big_k + big_k.transpose() * qux + qux.transpose() * big_k;
    vxx = 0.5 * (vxx + vxx.transpose()).eval();
    if (!vx.allFinite() || !vxx.allFinite()) return false;
  }
  return true;
}

bool forward_pass(const OcpSpec& spec, const Trajectory& nominal, const Gains& gains, double alpha,
                  Trajectory& out) {
  const DynamicsModel& model = *spec.model;
  const int h = spec.horizon;
  out.xs.resize(static_cast<std::size_t>(h) + 1);
  out.us.resize(h);
  out.xs[0] = spec.x0;
  for (int k = 0; k < h; ++k) {
    const State dx = state_difference(model, out.xs[k], nominal.xs[k]);
    Control u = nominal.us[k] + alpha * gains.k[k] + gains.K[k] * dx;
    const Control& pin = gains.pinned[k];
    for (int j = 0; j < u.size(); ++j) {
      if (!std::isnan(pin[j])) u[j] = pin[j];
    }
    out.us[k] = clamp_control(model, u);
    out.xs[k + 1] = step(model, out.xs[k], out.us[k], spec.dt);
    if (!out.xs[k + 1].allFinite()) return false;
  }
  return true;
}

enum class InnerOutcome { Converged, Stalled, IterationLimit, NumericalFailure };

struct InnerResult {
  InnerOutcome outcome = InnerOutcome::IterationLimit;
  double stationarity = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

InnerResult minimize_merit(const OcpSpec& spec, const SolverOptions& opt, const Multipliers& mult,
                           Trajectory& traj, const std::function<void(double)>& on_accept) {
  InnerResult result;
  Expansion ex;
  Gains gains;
  Trajectory candidate;
  double reg = 0.0;
  evaluate_merit(spec, mult, traj);
  if (!std::isfinite(traj.merit)) {
    result.outcome = InnerOutcome::NumericalFailure;
    return result;
  }

  for (int it = 0; it < opt.max_inner_iterations; ++it) {
    expand(spec, mult, traj, ex);
    result.stationarity = gradient_norm(adjoint_gradient(spec, traj, ex, true));
    if (!std::isfinite(result.stationarity)) {
      result.outcome = InnerOutcome::NumericalFailure;
      return result;
    }
    if (result.stationarity <= opt.stationarity_tol) {
      result.outcome = InnerOutcome::Converged;
      return result;
    }

    bool accepted = false;
    while (!accepted) {
      if (!backward_pass(spec, traj, ex, reg, gains)) {
        reg = std::max(1e-6, reg * 10.0);
        if (reg > opt.regularization_max) break;
        continue;
      }
      double alpha = 1.0;
      for (int ls = 0; ls < opt.max_line_search_steps; ++ls, alpha *= 0.5) {
        if (!forward_pass(spec, traj, gains, alpha, candidate)) continue;
        evaluate_merit(spec, mult, candidate);
        if (!std::isfinite(candidate.merit)) continue;
        const double expected = -(alpha * gains.dv1 + alpha * alpha * gains.dv2);
        const double actual = traj.merit - candidate.merit;
        if (actual > 0.0 && (expected <= 0.0 || actual >= opt.armijo * expected)) {
          accepted = true;
          break;
        }
      }
      if (accepted) break;
      reg = std::max(1e-6, reg * 10.0);
      if (reg > opt.regularization_max) break;
    }
    ++result.iterations;
    if (!accepted) {
      result.outcome = InnerOutcome::Stalled;
      return result;
    }
    const double improvement = traj.merit - candidate.merit;
    std::swap(traj, candidate);
    if (on_accept) on_accept(traj.merit);
    reg = reg > 1e-6 ? reg / 10.0 : 0.0;
    if (improvement <= 1e-13 * (1.0 + std::abs(traj.merit))) {
      expand(spec, mult, traj, ex);
      result.stationarity = gradient_norm(adjoint_gradient(spec, traj, ex, true));
      result.outcome = result.stationarity <= opt.stationarity_tol ? InnerOutcome::Converged
                                                                   : InnerOutcome::Stalled;
      return result;
    }
  }
  expand(spec, mult, traj, ex);
  result.stationarity = gradient_norm(adjoint_gradient(spec, traj, ex, true));
  result.outcome = result.stationarity <= opt.stationarity_tol ? InnerOutcome::Converged
                                                               : InnerOutcome::IterationLimit;
  return result;
}

Trajectory make_trajectory(const OcpSpec& spec, const std::vector<Control>& controls) {
  if (static_cast<int>(controls.size()) != spec.horizon) {
    throw ContractViolation("ocp: expected one control per horizon step");
  }
  for (const Control& u : controls) {
    if (u.size() != spec.model->control_dim()) {
      throw ContractViolation("ocp: control dimension does not match the model");
    }
  }
  Trajectory traj;
  traj.us = controls;
  return traj;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API

CostEvaluation evaluate_cost(const OcpSpec& spec, const std::vector<Control>& controls) {
  validate(spec);
  Trajectory traj = make_trajectory(spec, controls);
  rollout(spec, traj);
  accumulate_cost(spec, traj);
  return {traj.cost, traj.task_cost, std::move(traj.xs)};
}

double max_constraint_violation(const OcpSpec& spec, const std::vector<State>& states) {
  double viol = 0.0;
  for (int k = 1; k <= spec.horizon; ++k) {
    if (path_active(spec, k)) viol = std::max(viol, -spec.path_constraint->value(states[k]));
  }
  if (spec.terminal_constraint) {
    viol = std::max(viol, -spec.terminal_constraint->value(states[spec.horizon]));
  }
  return viol;
}

std::vector<Control> merit_gradient(const OcpSpec& spec, const std::vector<Control>& controls,
                                    const Multipliers& multipliers, bool project) {
  validate(spec);
  Trajectory traj = make_trajectory(spec, controls);
  rollout(spec, traj);
  Multipliers mult = multipliers;
  mult.path.resize(static_cast<std::size_t>(spec.horizon) + 1, 0.0);
  Expansion ex;
  expand(spec, mult, traj, ex);
  return adjoint_gradient(spec, traj, ex, project);
}

double stationarity_residual(const OcpSpec& spec, const std::vector<Control>& controls,
                             const Multipliers& multipliers) {
  return gradient_norm(merit_gradient(spec, controls, multipliers, true));
}

double stationarity_residual(const OcpSpec& spec, const SolveResult& result) {
  return stationarity_residual(spec, result.controls, result.multipliers);
}

SolveResult TrajectoryOptimizer::solve(const OcpSpec& spec,
                                       const std::optional<std::vector<Control>>& warm_start) {
  validate(spec);
  const DynamicsModel& model = *spec.model;
  const int h = spec.horizon;
  const SolverOptions& opt = options_;

  std::vector<Control> initial;
  if (warm_start && static_cast<int>(warm_start->size()) == h) {
    initial = *warm_start;
  } else {
    initial.assign(h, Control::Zero(model.control_dim()));
  }
  Trajectory traj = make_trajectory(spec, initial);

  SolveResult result;
  result.multipliers = Multipliers::zeros(h);
  result.multipliers.penalty = opt.penalty_init;
  Multipliers& mult = result.multipliers;

  auto finish = [&](SolveStatus status) {
    result.status = status;
    result.states = traj.xs;
    result.controls = traj.us;
    accumulate_cost(spec, traj);
    result.cost = traj.cost;
    result.task_cost = traj.task_cost;
    if (status != SolveStatus::NumericalFailure) {
      result.max_violation = max_constraint_violation(spec, traj.xs);
    } else {
      result.max_violation = std::numeric_limits<double>::infinity();
    }
    return result;
  };

  if (!rollout(spec, traj)) return finish(SolveStatus::NumericalFailure);

  bool stalled = false;
  for (int outer = 0; outer < opt.max_outer_iterations; ++outer) {
    std::function<void(double)> on_accept;
    if (observer_) on_accept = [&, outer](double merit) { observer_(outer, merit); };
    const InnerResult inner = minimize_merit(spec, opt, mult, traj, on_accept);
    result.outer_iterations = outer + 1;
    result.inner_iterations += inner.iterations;
    result.stationarity = inner.stationarity;
    if (inner.outcome == InnerOutcome::NumericalFailure) return finish(SolveStatus::NumericalFailure);
    stalled = inner.outcome != InnerOutcome::Converged;

    const double violation = max_constraint_violation(spec, traj.xs);
    const double dual_step = multiplier_step(spec, traj.xs, mult);
    if (violation <= opt.feasibility_tol && dual_step <= opt.multiplier_tol) {
      if (!stalled) return finish(SolveStatus::Optimal);
      return finish(SolveStatus::FeasibleSuboptimal);
    }
    if (outer + 1 == opt.max_outer_iterations) break;
    update_multipliers(spec, traj.xs, mult);
    mult.penalty = std::min(mult.penalty * opt.penalty_scale, opt.penalty_max);
  }

  result.stationarity = stationarity_residual(spec, traj.us, mult);
  const double violation = max_constraint_violation(spec, traj.xs);
  if (violation <= opt.feasibility_tol) {
    return finish(result.stationarity <= opt.stationarity_tol && !stalled
                      ? SolveStatus::Optimal
                      : SolveStatus::FeasibleSuboptimal);
  }
  return finish(mult.penalty >= opt.penalty_max ? SolveStatus::Infeasible
                                                : SolveStatus::IterationLimit);
}

}  // namespace svmpc
