#include "svmpc/reachability.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

namespace svmpc {

namespace {

std::string cfl_message(double dt, double cfl_number) {
  std::ostringstream msg;
  msg.precision(17);
  msg << "CFL violation: dt = " << dt << " gives dt*sum(alpha/dx) = " << cfl_number
      << " > limit " << kCflLimit;
  return msg.str();
}

// A clamped state dimension whose grid axis ends on the clamp bound. At those
// boundary nodes the flow along the axis can only point inward, so the axis
// contributes p * clip(d + g * u) to the Hamiltonian. The axis must be driven
// by a single input that moves no other dimension.
struct ClampedAxis {
  int axis = 0;
  int control = 0;
  double gain = 0.0;
  bool lower = false;
  bool upper = false;
};

// Precomputed per-solve data for the Lax-Friedrichs sweep. The drift is
// evaluated once per node; the input matrix is constant for every model.
class LaxFriedrichsKernel {
 public:
  LaxFriedrichsKernel(const DynamicsModel& model, const Grid& grid, Dissipation dissipation)
      : grid_(grid), n_(grid.ndims()), m_(model.control_dim()),
        local_(dissipation == Dissipation::Local) {
    if (model.state_dim() != n_) {
      throw ContractViolation("reachability: grid dimension does not match model state dimension");
    }
    alpha_ = dissipation_coefficients(model, grid);
    for (int i = 0; i < n_; ++i) {
      inv_dx_[i] = 1.0 / grid.spacing(i);
      count_[i] = grid.axis(i).count;
      stride_[i] = grid.stride(i);
      periodic_[i] = grid.axis(i).periodic;
    }
    for (int j = 0; j < m_; ++j) {
      u_lo_[j] = model.control_lo()[j];
      u_hi_[j] = model.control_hi()[j];
      for (int i = 0; i < n_; ++i) gain_[i * m_ + j] = model.input_matrix()(i, j);
    }
    for (int d : model.clamped_dims()) {
      if (periodic_[d]) continue;
      ClampedAxis ca;
      ca.axis = d;
      const Axis& a = grid.axis(d);
      const double tol = 1e-12 * std::max(1.0, a.hi - a.lo);
      ca.lower = std::abs(a.lo - model.state_lo()[d]) <= tol;
      ca.upper = std::abs(a.hi - model.state_hi()[d]) <= tol;
      if (!ca.lower && !ca.upper) continue;
      int driving = -1;
      for (int j = 0; j < m_; ++j) {
        if (gain_[d * m_ + j] == 0.0) continue;
        if (driving >= 0) throw ContractViolation("reachability: clamped dimension driven by several inputs");
        driving = j;
      }
      if (driving < 0) continue;
      for (int i = 0; i < n_; ++i) {
        if (i != d && gain_[i * m_ + driving] != 0.0) {
          throw ContractViolation("reachability: input driving a clamped dimension also moves another");
        }
      }
      ca.control = driving;
      ca.gain = gain_[d * m_ + driving];
      clamped_.push_back(ca);
    }
    const std::size_t nodes = grid.node_count();
    drift_.resize(nodes * n_);
    for (std::size_t f = 0; f < nodes; ++f) {
      const State x = grid.node(f);
      model.drift({x.data(), static_cast<std::size_t>(n_)},
                  {drift_.data() + f * n_, static_cast<std::size_t>(n_)});
    }
  }

  const State& alpha() const { return alpha_; }

  // Writes the updated field into `out` and returns the sup-norm change.
  double sweep(const std::vector<double>& value, const std::vector<double>& constraint, double dt,
               std::vector<double>& out, int workers) const {
    const std::size_t nodes = grid_.node_count();
    out.resize(nodes);
    workers = std::max(1, std::min<int>(workers, static_cast<int>(nodes / 4096) + 1));
    if (workers == 1) return sweep_range(value, constraint, dt, out, 0, nodes);

    std::vector<double> partial(workers, 0.0);
    std::vector<std::thread> pool;
    const std::size_t chunk = (nodes + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(nodes, w * chunk);
      const std::size_t end = std::min(nodes, begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        partial[w] = sweep_range(value, constraint, dt, out, begin, end);
      });
    }
    for (auto& t : pool) t.join();
    return *std::max_element(partial.begin(), partial.end());
  }

 private:
  double sweep_range(const std::vector<double>& value, const std::vector<double>& constraint,
                     double dt, std::vector<double>& out, std::size_t begin,
                     std::size_t end) const {
    std::array<int, kMaxStateDim> idx{};
    {
      std::size_t rem = begin;
      for (int i = 0; i < n_; ++i) {
        idx[i] = static_cast<int>(rem / stride_[i]);
        rem %= stride_[i];
      }
    }
    std::array<double, kMaxStateDim> p_mean{};
    double max_change = 0.0;
    for (std::size_t f = begin; f < end; ++f) {
      const double v = value[f];
      bool on_boundary = false;
      double dissipation = 0.0;
      for (int i = 0; i < n_; ++i) {
        const std::size_t s = stride_[i];
        const int c = count_[i];
        double p_plus;
        double p_minus;
        if (periodic_[i]) {
          const std::size_t up = idx[i] + 1 == c ? f - (c - 1) * s : f + s;
          const std::size_t dn = idx[i] == 0 ? f + (c - 1) * s : f - s;
          p_plus = (value[up] - v) * inv_dx_[i];
          p_minus = (v - value[dn]) * inv_dx_[i];
        } else if (idx[i] == 0) {
          on_boundary = true;
          // Linear extrapolation ghost node: both one-sided slopes coincide.
          p_plus = (value[f + s] - v) * inv_dx_[i];
          p_minus = p_plus;
        } else if (idx[i] == c - 1) {
          on_boundary = true;
          p_minus = (v - value[f - s]) * inv_dx_[i];
          p_plus = p_minus;
        } else {
          p_plus = (value[f + s] - v) * inv_dx_[i];
          p_minus = (v - value[f - s]) * inv_dx_[i];
        }
        p_mean[i] = 0.5 * (p_plus + p_minus);
        const double a = local_ ? local_alpha(f, i) : alpha_[i];
        dissipation += a * 0.5 * (p_plus - p_minus);
      }

      const double* drift = drift_.data() + f * n_;
      std::array<bool, kMaxStateDim> skip_axis{};
      std::array<bool, kMaxControlDim> skip_control{};
      double ham = 0.0;
      for (const ClampedAxis& ca : clamped_) {
        const int i = ca.axis;
        const bool at_lo = ca.lower && idx[i] == 0;
        const bool at_hi = ca.upper && idx[i] == count_[i] - 1;
        if (!at_lo && !at_hi) continue;
        skip_axis[i] = true;
        skip_control[ca.control] = true;
        ham += clamped_contribution(ca, at_lo, p_mean[i], drift[i]);
      }
      for (int i = 0; i < n_; ++i) {
        if (!skip_axis[i]) ham += p_mean[i] * drift[i];
      }
      for (int j = 0; j < m_; ++j) {
        if (skip_control[j]) continue;
        double coeff = 0.0;
        for (int i = 0; i < n_; ++i) coeff += gain_[i * m_ + j] * p_mean[i];
        ham += coeff > 0.0 ? coeff * u_hi_[j] : coeff * u_lo_[j];
      }

      double next = std::min(constraint[f], v + dt * (ham + dissipation));
      // Extrapolated boundary nodes keep the running minimum over time.
      if (on_boundary) next = std::min(next, v);
      out[f] = next;
      max_change = std::max(max_change, std::abs(next - v));

      for (int i = n_ - 1; i >= 0; --i) {
        if (++idx[i] < count_[i]) break;
        idx[i] = 0;
      }
    }
    return max_change;
  }

  // max |f_i(x_f, u)| over the control box.
  double local_alpha(std::size_t f, int i) const {
    double hi = drift_[f * n_ + i];
    double lo = hi;
    for (int j = 0; j < m_; ++j) {
      const double g = gain_[i * m_ + j];
      hi += std::max(g * u_lo_[j], g * u_hi_[j]);
      lo += std::min(g * u_lo_[j], g * u_hi_[j]);
    }
    return std::max(std::abs(hi), std::abs(lo));
  }

  // max over u in the control interval of p * clip(d + g * u), where clip
  // removes the outward part of the flow.
  double clamped_contribution(const ClampedAxis& ca, bool at_lo, double p, double d) const {
    const double lo = u_lo_[ca.control];
    const double hi = u_hi_[ca.control];
    auto inward = [&](double u) {
      const double fl = d + ca.gain * u;
      return at_lo ? std::max(fl, 0.0) : std::min(fl, 0.0);
    };
    // The clipped flow is monotone in u, so the extremes sit at the interval ends.
    return std::max(p * inward(lo), p * inward(hi));
  }

  const Grid& grid_;
  int n_;
  int m_;
  bool local_;
  State alpha_;
  std::array<double, kMaxStateDim> inv_dx_{};
  std::array<int, kMaxStateDim> count_{};
  std::array<std::size_t, kMaxStateDim> stride_{};
  std::array<bool, kMaxStateDim> periodic_{};
  std::array<double, kMaxControlDim> u_lo_{};
  std::array<double, kMaxControlDim> u_hi_{};
  std::array<double, kMaxStateDim * kMaxControlDim> gain_{};
  std::vector<ClampedAxis> clamped_;
  std::vector<double> drift_;
};

void require_same_grid(const ValueField& a, const ValueField& b) {
  if (!(a.grid == b.grid) || a.values.size() != b.values.size()) {
    throw ContractViolation("reachability: value and constraint fields must share a grid");
  }
}

}  // namespace

std::string to_string(Dissipation dissipation) {
  return dissipation == Dissipation::Global ? "global" : "local";
}

Dissipation parse_dissipation(std::string_view text) {
  if (text == "global") return Dissipation::Global;
  if (text == "local") return Dissipation::Local;
  throw ContractViolation("unknown dissipation '" + std::string(text) + "' (expected global or local)");
}

CflViolation::CflViolation(double dt, double cfl_number)
    : ContractViolation(cfl_message(dt, cfl_number)), dt_(dt) {}

ValueField constraint_field(const ObstacleSet& obstacles, const Grid& grid) {
  if (grid.ndims() < 2) throw ContractViolation("constraint_field: grid needs x and y axes");
  ValueField l(grid, 0.0);
  for (std::size_t f = 0; f < grid.node_count(); ++f) {
    const int ix = static_cast<int>(f / grid.stride(0));
    const int iy = static_cast<int>((f / grid.stride(1)) % grid.axis(1).count);
    l.values[f] = std::min(kFreeSpaceDistance,
                           obstacles.signed_distance(grid.coordinate(0, ix), grid.coordinate(1, iy)));
  }
  return l;
}

State dissipation_coefficients(const DynamicsModel& model, const Grid& grid) {
  if (model.state_dim() != grid.ndims()) {
    throw ContractViolation("reachability: grid dimension does not match model state dimension");
  }
  State lo(grid.ndims());
  State hi(grid.ndims());
  for (int i = 0; i < grid.ndims(); ++i) {
    lo[i] = grid.axis(i).lo;
    hi[i] = grid.axis(i).hi;
  }
  return model.flow_bound(lo, hi);
}

double cfl_number(const DynamicsModel& model, const Grid& grid, double dt) {
  const State alpha = dissipation_coefficients(model, grid);
  double rate = 0.0;
  for (int i = 0; i < grid.ndims(); ++i) rate += alpha[i] / grid.spacing(i);
  return dt * rate;
}

double cfl_time_step(const DynamicsModel& model, const Grid& grid, double cfl) {
  const double rate = cfl_number(model, grid, 1.0);
  return rate > 0.0 ? cfl / rate : 1.0;
}

ValueField vi_step(const DynamicsModel& model, const ValueField& value, const ValueField& constraint,
                   double dt, int workers, Dissipation dissipation) {
  require_same_grid(value, constraint);
  if (!(dt > 0.0)) throw ContractViolation("vi_step: dt must be positive");
  const double cfl = cfl_number(model, value.grid, dt);
  if (cfl > kCflLimit) throw CflViolation(dt, cfl);

  LaxFriedrichsKernel kernel(model, value.grid, dissipation);
  ValueField next(value.grid, 0.0);
  kernel.sweep(value.values, constraint.values, dt, next.values, workers);
  return next;
}

SafetyValueSolution solve_safety_value(const DynamicsModel& model, const ValueField& constraint,
                                       const ReachabilityOptions& options,
                                       const IterateObserver& observer) {
  if (!(options.tol > 0.0)) throw ContractViolation("solve_safety_value: tol must be positive");
  if (options.max_iters < 1) throw ContractViolation("solve_safety_value: max_iters must be >= 1");
  if (!(options.cfl > 0.0) || options.cfl > kCflLimit) {
    throw ContractViolation("solve_safety_value: cfl must be in (0, 1]");
  }
  for (double v : constraint.values) {
    if (!std::isfinite(v)) throw ContractViolation("solve_safety_value: constraint field must be finite");
  }

  const auto start = std::chrono::steady_clock::now();
  const Grid& grid = constraint.grid;
  LaxFriedrichsKernel kernel(model, grid, options.dissipation);

  SafetyValueSolution sol;
  sol.report.cfl = options.cfl;
  sol.report.dt = cfl_time_step(model, grid, options.cfl);

  ValueField current = constraint;
  ValueField next(grid, 0.0);
  for (int it = 1; it <= options.max_iters; ++it) {
    const double change =
        kernel.sweep(current.values, constraint.values, sol.report.dt, next.values, options.workers);
    if (observer) observer(it, current, next);
    std::swap(current.values, next.values);
    sol.report.iterations = it;
    sol.report.final_change = change;
    if (change < options.tol) {
      sol.report.converged = true;
      break;
    }
  }
  sol.value = std::move(current);
  sol.report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

SafetyValueSolution solve_safety_value(const DynamicsModel& model, const Grid& grid,
                                       const ObstacleSet& obstacles,
                                       const ReachabilityOptions& options,
                                       const IterateObserver& observer) {
  return solve_safety_value(model, constraint_field(obstacles, grid), options, observer);
}

}  // namespace svmpc
