#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "doctest.h"
#include "svmpc/dynamics.hpp"
#include "test_helpers.hpp"

using namespace svmpc;
using svmpc::test::ctrl;
using svmpc::test::vec;

namespace {

Dubins4D::Params wide_speed() {
  Dubins4D::Params p;
  p.speed_lo = 0.0;
  return p;
}

double max_abs(const State& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("dubins flow matches the vector field") {
  const Dubins4D car(Dubins4D::Params{});
  CHECK(max_abs(flow(car, vec({0, 0, 0, 2}), ctrl({0.5, -1})) - vec({2, 0, 0.5, -1})) < 1e-15);
  CHECK(max_abs(flow(car, vec({0, 0, std::numbers::pi / 2, 1}), ctrl({0, 0})) - vec({0, 1, 0, 0})) <
        1e-15);
  const State d = flow(car, vec({1, 1, std::numbers::pi, 3}), ctrl({-1, 2}));
  CHECK(d[0] == doctest::Approx(-3.0).epsilon(1e-15));
  CHECK(std::abs(d[1]) < 1e-15);
  CHECK(d[2] == -1.0);
  CHECK(d[3] == 2.0);
}

TEST_CASE("flow rejects dimension mismatch") {
  const Dubins4D car(Dubins4D::Params{});
  CHECK_THROWS_AS(flow(car, vec({0, 0, 0}), ctrl({0, 0})), ContractViolation);
  CHECK_THROWS_AS(flow(car, vec({0, 0, 0, 1}), ctrl({0})), ContractViolation);
  CHECK_THROWS_AS(step(car, vec({0, 0, 0, 1}), ctrl({0, 0}), 0.0), ContractViolation);
}

TEST_CASE("rk4 step is exact on polynomial flows") {
  const Dubins4D car(wide_speed());
  const State straight = step(car, vec({0, 0, 0, 1}), ctrl({0, 0}), 0.01);
  CHECK(max_abs(straight - vec({0.01, 0, 0, 1})) < 1e-16);

  // x(t) = t^2 / 2, v(t) = t from rest under unit acceleration.
  const State accel = step(car, vec({0, 0, 0, 0}), ctrl({0, 1}), 0.01);
  CHECK(max_abs(accel - vec({5e-5, 0, 0, 0.01})) < 1e-17);
}

TEST_CASE("rk4 local error has fifth order (Richardson)") {
  const Dubins4D car(wide_speed());
  const State x = vec({0.3, -0.2, 0.4, 1.5});
  const Control u = ctrl({0.8, 0.3});
  auto richardson_gap = [&](double dt) {
    const State one = step(car, x, u, dt);
    const State two = step(car, step(car, x, u, dt / 2), u, dt / 2);
    return max_abs(one - two);
  };
  const double e1 = richardson_gap(0.2);
  const double e2 = richardson_gap(0.1);
  const double e3 = richardson_gap(0.05);
  CHECK(e1 / e2 >= 8.0);
  CHECK(e2 / e3 >= 8.0);
  // Close to the asymptotic factor 2^5.
  CHECK(e2 / e3 > 20.0);
}

TEST_CASE("step wraps heading and clamps speed") {
  const Dubins4D car(Dubins4D::Params{});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> heading(-10.0, 10.0);
  std::uniform_real_distribution<double> turn(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const State next = step(car, vec({0, 0, heading(rng), 1.0}), ctrl({turn(rng), 0.0}), 0.3);
    CHECK(next[2] >= -std::numbers::pi);
    CHECK(next[2] < std::numbers::pi);
  }
  const StepResult slow = step_ex(car, vec({0, 0, 0, 0.1}), ctrl({0, -1}), 0.01);
  CHECK(slow.clamped);
  CHECK(slow.next[3] == 0.1);
  const StepResult fast = step_ex(car, vec({0, 0, 0, 3.0}), ctrl({0, 1}), 0.01);
  CHECK(fast.clamped);
  CHECK(fast.next[3] == 3.0);
}

TEST_CASE("step is deterministic") {
  const Dubins4D car(Dubins4D::Params{});
  const State x = vec({0.1, 0.2, 0.3, 1.7});
  const Control u = ctrl({0.4, -0.6});
  const State a = step(car, x, u, 0.01);
  const State b = step(car, x, u, 0.01);
  for (int i = 0; i < 4; ++i) CHECK(std::memcmp(&a[i], &b[i], sizeof(double)) == 0);
}

TEST_CASE("wrap_angle maps into [-pi, pi)") {
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(-std::numbers::pi));
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(-std::numbers::pi));
  CHECK(wrap_angle(0.5 + 4 * std::numbers::pi) == doctest::Approx(0.5));
  CHECK(wrap_angle(-0.5 - 2 * std::numbers::pi) == doctest::Approx(-0.5));
}

TEST_CASE("step jacobians match central differences") {
  const Dubins4D car(Dubins4D::Params{});
  const State x = vec({0.5, -1.0, 2.0, 1.2});
  const Control u = ctrl({0.7, -0.4});
  const double dt = 0.05;
  StepJacobians jac;
  step_ex(car, x, u, dt, &jac);
  const double eps = 1e-6;
  for (int j = 0; j < 4; ++j) {
    State xp = x, xm = x;
    xp[j] += eps;
    xm[j] -= eps;
    const State col = state_difference(car, step(car, xp, u, dt), step(car, xm, u, dt)) / (2 * eps);
    CHECK(max_abs(col - jac.fx.col(j)) < 1e-7);
  }
  for (int j = 0; j < 2; ++j) {
    Control up = u, um = u;
    up[j] += eps;
    um[j] -= eps;
    const State col = state_difference(car, step(car, x, up, dt), step(car, x, um, dt)) / (2 * eps);
    CHECK(max_abs(col - jac.fu.col(j)) < 1e-7);
  }
}

TEST_CASE("hamiltonian maximizer on the dubins car") {
  Dubins4D::Params p;
  p.turn_rate_max = 1.0;
  p.accel_max = 0.5;
  const Dubins4D car(p);
  const State x = vec({0, 0, 0, 1});

  // Enumerate the four corners of the control box as the oracle.
  const State costate = vec({1, 0, 2, -3});
  double best = -1e300;
  Control best_u;
  for (double u1 : {-1.0, 1.0}) {
    for (double u2 : {-0.5, 0.5}) {
      const double v = costate.dot(flow(car, x, ctrl({u1, u2})));
      if (v > best) {
        best = v;
        best_u = ctrl({u1, u2});
      }
    }
  }
  const HamiltonianMax hm = hamiltonian_max(car, x, costate);
  CHECK(best == doctest::Approx(4.5));
  CHECK(hm.value == doctest::Approx(4.5).epsilon(1e-15));
  CHECK(hm.control[0] == best_u[0]);
  CHECK(hm.control[1] == best_u[1]);

  const HamiltonianMax zero = hamiltonian_max(car, x, State::Zero(4));
  CHECK(zero.value == 0.0);
  CHECK(zero.control[0] == -1.0);
  CHECK(zero.control[1] == -0.5);
}

TEST_CASE("hamiltonian maximizer dominates sampled controls") {
  const Dubins4D car(Dubins4D::Params{});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const State x = vec({3 * unit(rng), 3 * unit(rng), 3 * unit(rng), 1.5 + 1.4 * unit(rng)});
    const State p = vec({unit(rng), unit(rng), unit(rng), unit(rng)});
    const HamiltonianMax hm = hamiltonian_max(car, x, p);
    CHECK(hm.value == doctest::Approx(p.dot(flow(car, x, hm.control))).epsilon(1e-12));
    for (int s = 0; s < 1000; ++s) {
      const Control u = ctrl({2.0 * unit(rng), 1.0 * unit(rng)});
      CHECK(hm.value >= p.dot(flow(car, x, u)) - 1e-12);
    }
  }
}

TEST_CASE("model construction validates bounds") {
  Dubins4D::Params bad;
  bad.speed_lo = 3.0;
  bad.speed_hi = 1.0;
  CHECK_THROWS_AS(Dubins4D{bad}, ContractViolation);
  DynamicsModel::Limits lim;
  lim.control_lo = ctrl({1.0});
  lim.control_hi = ctrl({-1.0});
  lim.state_lo = vec({-1.0});
  lim.state_hi = vec({1.0});
  StateMatrix a = StateMatrix::Zero(1, 1);
  InputMatrix b = InputMatrix::Ones(1, 1);
  CHECK_THROWS_AS(LinearSystem(a, b, lim), ContractViolation);
  lim.control_lo = ctrl({-1.0});
  lim.control_hi = ctrl({1.0});
  lim.periodic_dims = {3};
  CHECK_THROWS_AS(LinearSystem(a, b, lim), ContractViolation);
}
