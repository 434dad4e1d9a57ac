#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "probf/dynamics.hpp"
#include "probf/rng.hpp"

using namespace probf;

namespace {

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& A) {
  // scaling-and-squaring with a long Taylor series; oracle-grade accuracy
  const int s = 8;
  Eigen::MatrixXd B = A / std::pow(2.0, s);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 20; ++k) {
    term = term * B / static_cast<double>(k);
    sum += term;
  }
  for (int k = 0; k < s; ++k) sum = sum * sum;
  return sum;
}

ControlAffineModel linear_test_model(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  auto f = [A, n](const auto* x, auto* dx) {
    using T = std::remove_cvref_t<decltype(x[0])>;
    for (int i = 0; i < n; ++i) {
      T acc = T(0.0);
      for (int j = 0; j < n; ++j) acc += A(i, j) * x[j];
      dx[i] = acc;
    }
  };
  return assemble_model(
      n, 1, f, f, [n](const StateVec&) { return Eigen::MatrixXd::Zero(n, 1); },
      [n](const StateVec&) { return Eigen::MatrixXd::Zero(n, 1); });
}

}  // namespace

TEST_CASE("segway zero control follows drift only") {
  auto model = make_segway();
  StateVec x(4);
  x << 0.3, 0.05, 0.0, 0.0;
  ControlVec u = ControlVec::Zero(1);
  CHECK((eval_true(model, x, u) - model.drift(x)).norm() == doctest::Approx(0.0));
  CHECK((eval_nominal(model, x, u) - model.nominal_drift(x)).norm() == doctest::Approx(0.0));
}

TEST_CASE("quadrotor hover thrust cancels gravity") {
  auto model = make_quadrotor();
  const double m_true = model.params_true.at("mass");
  StateVec x = StateVec::Zero(6);
  ControlVec u(2);
  u << m_true * 9.81, 0.0;
  const StateVec dx = eval_true(model, x, u);
  CHECK(dx[3] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(dx[4] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("quadrotor nominal inertia shows in angular acceleration") {
  auto model = make_quadrotor();
  StateVec x = StateVec::Zero(6);
  ControlVec u(2);
  u << 0.0, 1.0;
  CHECK(eval_nominal(model, x, u)[5] == doctest::Approx(1.0 / 1.3));
  CHECK(eval_true(model, x, u)[5] == doctest::Approx(1.0 / 1.1));
}

TEST_CASE("matched parameter sets make true and nominal coincide") {
  auto f = [](const auto* x, auto* dx) {
    dx[0] = x[1];
    dx[1] = sin(x[0]);
  };
  auto g = [](const StateVec& x) {
    Eigen::MatrixXd m(2, 1);
    m << 0.0, 1.0 + 0.1 * std::cos(x[0]);
    return m;
  };
  auto model = assemble_model(2, 1, f, f, g, g);
  Rng rng(7);
  for (int i = 0; i < 10; ++i) {
    StateVec x(2);
    x << rng.uniform(-2, 2), rng.uniform(-2, 2);
    ControlVec u(1);
    u << rng.uniform(-5, 5);
    CHECK((eval_true(model, x, u) - eval_nominal(model, x, u)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("control affinity holds to 1e-12") {
  auto segway = make_segway();
  auto quad = make_quadrotor();
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    for (const auto* model : {&segway, &quad}) {
      StateVec x(model->state_dim);
      for (int i = 0; i < model->state_dim; ++i) x[i] = rng.uniform(-0.5, 0.5);
      ControlVec u1(model->control_dim), u2(model->control_dim);
      for (int i = 0; i < model->control_dim; ++i) {
        u1[i] = rng.uniform(-3, 3);
        u2[i] = rng.uniform(-3, 3);
      }
      const double lam = rng.uniform();
      const StateVec lhs = eval_true(*model, x, (lam * u1 + (1 - lam) * u2).eval());
      const StateVec rhs = lam * eval_true(*model, x, u1) + (1 - lam) * eval_true(*model, x, u2);
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("rk4 local error shrinks 4x when dt halves") {
  auto model = make_segway();
  StateVec x(4);
  x << 0.1, 0.12, -0.05, 0.2;
  ControlVec u(1);
  u << 0.4;
  auto euler_gap = [&](double dt) {
    const StateVec fine = step_rk4(model, x, u, dt, Plant::True);
    const StateVec euler = x + dt * eval_true(model, x, u);
    return (fine - euler).norm();
  };
  const double g1 = euler_gap(1e-3);
  const double g2 = euler_gap(5e-4);
  CHECK(g1 / g2 > 3.5);
  CHECK(g1 / g2 < 4.5);
}

TEST_CASE("rk4 matches matrix exponential on a linear system") {
  Eigen::MatrixXd A(3, 3);
  A << 0.0, 1.0, 0.0, -2.0, -0.3, 0.5, 0.1, 0.0, -1.0;
  auto model = linear_test_model(A);
  StateVec x(3);
  x << 1.0, -0.5, 0.25;
  ControlVec u = ControlVec::Zero(1);
  const double dt = 1e-2;
  const StateVec exact = matrix_exp(A * dt) * x;
  const StateVec stepped = step_rk4(model, x, u, dt, Plant::True);
  // local truncation error is O(dt^5)
  CHECK((stepped - exact).norm() < 10.0 * std::pow(dt, 5));
}

TEST_CASE("rk4 global order on the segway is 4") {
  auto model = make_segway();
  StateVec x0(4);
  x0 << 0.0, 0.15, 0.0, 0.1;
  ControlVec u(1);
  u << 0.3;
  auto integrate = [&](double dt) {
    StateVec x = x0;
    const int n = static_cast<int>(std::llround(1.0 / dt));
    for (int i = 0; i < n; ++i) x = step_rk4(model, x, u, dt, Plant::True);
    return x;
  };
  const StateVec ref = integrate(1e-5);
  std::vector<double> dts = {1e-2, 5e-3, 2.5e-3};
  std::vector<double> errs;
  for (double dt : dts) errs.push_back((integrate(dt) - ref).norm());
  // least-squares slope of log err vs log dt
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < dts.size(); ++i) {
    const double lx = std::log(dts[i]);
    const double ly = std::log(errs[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(dts.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx(4.0).epsilon(0.075));
}

TEST_CASE("control is irrelevant when actuation vanishes") {
  Eigen::MatrixXd A(2, 2);
  A << 0.0, 1.0, -1.0, 0.0;
  auto model = linear_test_model(A);
  StateVec x(2);
  x << 1.0, 2.0;
  ControlVec ua(1), ub(1);
  ua << 0.0;
  ub << 100.0;
  CHECK((step_rk4(model, x, ua, 0.01, Plant::True) - step_rk4(model, x, ub, 0.01, Plant::True))
            .norm() == 0.0);
}

TEST_CASE("zero horizon rollout is a single state") {
  auto model = make_segway();
  StateVec x0(4);
  x0 << 0.0, 0.1, 0.0, 0.0;
  auto traj = rollout(model, segway_pd_controller(model), x0, 0.0, 0.01);
  CHECK(traj.states.size() == 1);
  CHECK(traj.controls.empty());
}

TEST_CASE("rollouts are bit-identical across repeats") {
  auto model = make_quadrotor();
  auto ctrl = quadrotor_stabilizing_controller(model);
  StateVec x0 = StateVec::Zero(6);
  x0[0] = 2.0;
  x0[1] = 2.0;
  auto t1 = rollout(model, ctrl, x0, 2.0, 0.01);
  auto t2 = rollout(model, ctrl, x0, 2.0, 0.01);
  REQUIRE(t1.states.size() == t2.states.size());
  for (size_t i = 0; i < t1.states.size(); ++i) {
    CHECK((t1.states[i] - t2.states[i]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("model factories satisfy dimension and mismatch contracts") {
  auto segway = make_segway();
  CHECK(segway.state_dim == 4);
  CHECK(segway.control_dim == 1);
  CHECK(segway.params_true != segway.params_nominal);

  auto quad = make_quadrotor();
  CHECK(quad.state_dim == 6);
  CHECK(quad.control_dim == 2);
  auto pt = quad.params_true;
  auto pn = quad.params_nominal;
  CHECK(pt.at("mass") == 1.8);
  CHECK(pt.at("inertia") == 1.1);
  CHECK(pn.at("mass") == 1.5);
  CHECK(pn.at("inertia") == 1.3);
  CHECK(pt.at("gravity") == pn.at("gravity"));
}

TEST_CASE("dimension mismatch raises a contract violation") {
  auto model = make_segway();
  StateVec bad(3);
  bad.setZero();
  ControlVec u = ControlVec::Zero(1);
  CHECK_THROWS_AS(eval_true(model, bad, u), ContractViolation);
}

TEST_CASE("integration blow-up carries the step index and partial trajectory") {
  auto f = [](const auto* x, auto* dx) {
    dx[0] = x[0] * x[0];  // finite-time escape
  };
  auto model = assemble_model(
      1, 1, f, f, [](const StateVec&) { return Eigen::MatrixXd::Zero(1, 1); },
      [](const StateVec&) { return Eigen::MatrixXd::Zero(1, 1); });
  StateVec x0(1);
  x0 << 5.0;
  Controller ctrl = [](double, const StateVec&) { return ControlVec::Zero(1); };
  try {
    rollout(model, ctrl, x0, 10.0, 0.05);
    FAIL("expected blow-up");
  } catch (const RolloutBlowup& e) {
    CHECK(e.step >= 0);
    CHECK(e.partial.blew_up);
    CHECK(e.partial.states.size() >= 1);
  }
}
