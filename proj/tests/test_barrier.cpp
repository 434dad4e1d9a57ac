#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "probf/barrier.hpp"
#include "probf/dynamics.hpp"
#include "probf/rng.hpp"

using namespace probf;

namespace {

/// Double integrator xddot = u over state (x, xdot) with h = x.
ControlAffineModel double_integrator() {
  auto f = [](const auto* x, auto* dx) {
    dx[0] = x[1];
    dx[1] = 0.0 * x[0];
  };
  auto g = [](const StateVec&) {
    Eigen::MatrixXd m(2, 1);
    m << 0.0, 1.0;
    return m;
  };
  return assemble_model(2, 1, f, f, g, g);
}

BarrierSpec position_barrier(double g0, double g1) {
  BarrierSpec spec;
  spec.h = [](const StateVec& x) { return x[0]; };
  spec.grad_h = [](const StateVec&) {
    Eigen::VectorXd g(2);
    g << 1.0, 0.0;
    return g;
  };
  spec.relative_degree = 2;
  spec.hocbf_gains = Eigen::VectorXd(2);
  spec.hocbf_gains << g0, g1;
  spec.alpha_gain = g1;
  spec.h_jet = BarrierJet::make([](const auto* x) { return x[0] + 0.0; });
  return spec;
}

Eigen::VectorXd fd_gradient(const std::function<double(const StateVec&)>& f, const StateVec& x,
                            double step = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (int d = 0; d < x.size(); ++d) {
    StateVec xp = x, xm = x;
    xp[d] += step;
    xm[d] -= step;
    g[d] = (f(xp) - f(xm)) / (2.0 * step);
  }
  return g;
}

}  // namespace

TEST_CASE("segway barrier pins the stated values") {
  auto spec = segway_barrier();
  StateVec x(4);
  x << 0.0, 0.1383, 0.0, 0.0;
  CHECK(spec.h(x) == doctest::Approx(0.06848689).epsilon(1e-12));
  x[3] = 0.2617;
  CHECK(spec.h(x) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(spec.grad_h(x)[1] == 0.0);  // symmetric about theta_e
}

TEST_CASE("quadrotor barrier pins the stated values") {
  auto spec = quadrotor_barrier();
  StateVec x = StateVec::Zero(6);
  x[0] = 1.85;
  x[1] = 0.6;
  CHECK(spec.h(x) == doctest::Approx(-0.28));
  x[0] = 1.85 + std::sqrt(0.28);
  CHECK(std::abs(spec.h(x)) < 1e-12);
  x[0] = 2.0;
  x[1] = 2.0;
  CHECK(spec.h(x) == doctest::Approx(1.7025));
}

TEST_CASE("barrier gradients match finite differences at random states") {
  Rng rng(11);
  auto seg = segway_barrier();
  auto quad = quadrotor_barrier();
  for (int i = 0; i < 100; ++i) {
    StateVec xs(4);
    for (int d = 0; d < 4; ++d) xs[d] = rng.uniform(-0.5, 0.5);
    const Eigen::VectorXd ga = seg.grad_h(xs);
    const Eigen::VectorXd gf = fd_gradient(seg.h, xs);
    CHECK((ga - gf).norm() <= 1e-6 * std::max(1.0, gf.norm()));

    StateVec xq(6);
    for (int d = 0; d < 6; ++d) xq[d] = rng.uniform(-1.0, 3.0);
    const Eigen::VectorXd qa = quad.grad_h(xq);
    const Eigen::VectorXd qf = fd_gradient(quad.h, xq);
    CHECK((qa - qf).norm() <= 1e-6 * std::max(1.0, qf.norm()));
  }
}

TEST_CASE("linear class-K term is strictly increasing, odd, zero at zero") {
  auto spec = segway_barrier();
  auto alpha = [&](double r) { return spec.alpha_gain * r; };
  CHECK(alpha(0.0) == 0.0);
  double prev = alpha(-5.0);
  for (double r = -4.5; r <= 5.0; r += 0.5) {
    CHECK(alpha(r) > prev);
    prev = alpha(r);
  }
  for (double r = 0.1; r < 3.0; r += 0.7) CHECK(alpha(-r) == -alpha(r));
}

TEST_CASE("relative-degree-1 constants follow the nominal model") {
  auto model = make_segway();
  auto spec = segway_barrier();

  SUBCASE("boundary state removes the class-K contribution") {
    StateVec x(4);
    x << 0.0, 0.1383, 0.0, 0.2617;  // h = 0
    const auto cc = constraint_constants(spec, model, x);
    CHECK(cc.c_b == doctest::Approx(spec.grad_h(x).dot(model.nominal_drift(x))).epsilon(1e-14));
  }

  SUBCASE("at theta_e the control channel acts purely through the rate row") {
    StateVec x(4);
    x << 0.3, 0.1383, 0.1, 0.15;
    const auto cc = constraint_constants(spec, model, x);
    const double expected = -2.0 * x[3] * model.nominal_actuation(x)(3, 0);
    CHECK(cc.c_a[0] == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("zero actuation gives zero c_a") {
    auto f = [](const auto* x, auto* dx) {
      dx[0] = x[1];
      dx[1] = -x[0];
      dx[2] = 0.0 * x[0];
      dx[3] = 0.0 * x[0];
    };
    auto gz = [](const StateVec&) { return Eigen::MatrixXd::Zero(4, 1); };
    auto m0 = assemble_model(4, 1, f, f, gz, gz);
    StateVec x(4);
    x << 0.1, 0.2, 0.3, 0.1;
    CHECK(constraint_constants(spec, m0, x).c_a.norm() == 0.0);
  }

  SUBCASE("wrong relative degree is rejected") {
    auto quad_spec = quadrotor_barrier();
    auto quad = make_quadrotor();
    StateVec x = StateVec::Zero(6);
    CHECK_THROWS_AS(constraint_constants(quad_spec, quad, x), ContractViolation);
  }
}

TEST_CASE("double integrator chain matches the hand expansion") {
  auto model = double_integrator();
  const double g0 = 1.7, g1 = 0.9;
  auto spec = position_barrier(g0, g1);
  Rng rng(5);
  for (int i = 0; i < 25; ++i) {
    StateVec x(2);
    x << rng.uniform(-2, 2), rng.uniform(-2, 2);
    const auto cc = hocbf_constants(spec, model, x);
    CHECK(cc.c_a[0] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(cc.c_b == doctest::Approx(x[1] * (g0 + g1) + g0 * g1 * x[0]).epsilon(1e-13));
  }
}

TEST_CASE("chain of length one reduces to the plain constants") {
  auto model = make_segway();
  auto spec = segway_barrier();
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    StateVec x(4);
    for (int d = 0; d < 4; ++d) x[d] = rng.uniform(-0.4, 0.4);
    const auto a = constraint_constants(spec, model, x);
    const auto b = hocbf_constants(spec, model, x);
    CHECK(a.c_a[0] == b.c_a[0]);
    CHECK(a.c_b == b.c_b);
  }
}

TEST_CASE("quadrotor chain stages match the closed-form expansion") {
  auto model = make_quadrotor();
  auto spec = quadrotor_barrier();
  const double cx = 1.85, cy = 0.6, r2 = 0.28;
  const double g0 = spec.hocbf_gains[0], g1 = spec.hocbf_gains[1], g2 = spec.hocbf_gains[2];
  const double grav = model.params_nominal.at("gravity");
  Rng rng(17);
  for (int i = 0; i < 30; ++i) {
    StateVec x(6);
    for (int d = 0; d < 6; ++d) x[d] = rng.uniform(-1.5, 2.5);
    const Eigen::Vector2d e(x[0] - cx, x[1] - cy);
    const Eigen::Vector2d v(x[3], x[4]);
    const Eigen::Vector2d ag(0.0, -grav);

    const double p0 = e.squaredNorm() - r2;
    const double p1 = 2.0 * e.dot(v) + g0 * p0;
    const double lf_p1 = 2.0 * v.squaredNorm() + 2.0 * e.dot(ag) + g0 * 2.0 * e.dot(v);
    const double p2 = lf_p1 + g1 * p1;
    const double lf_p2 = 6.0 * v.dot(ag) + 2.0 * g0 * (v.squaredNorm() + e.dot(ag)) +
                         g1 * lf_p1;
    const double p3 = lf_p2 + g2 * p2;

    const Eigen::VectorXd stages = hocbf_chain_values(spec, model, x);
    CHECK(stages[0] == doctest::Approx(p0).epsilon(1e-11));
    CHECK(stages[1] == doctest::Approx(p1).epsilon(1e-11));
    CHECK(stages[2] == doctest::Approx(p2).epsilon(1e-11));
    CHECK(stages[3] == doctest::Approx(p3).epsilon(1e-11));
  }
}

TEST_CASE("chain gradient matches finite differences") {
  auto model = make_quadrotor();
  auto spec = quadrotor_barrier();
  Rng rng(23);
  for (int i = 0; i < 20; ++i) {
    StateVec x(6);
    for (int d = 0; d < 6; ++d) x[d] = rng.uniform(-1.0, 2.5);
    const Eigen::VectorXd ga = barrier_psi_grad(spec, model, x);
    const Eigen::VectorXd gf =
        fd_gradient([&](const StateVec& s) { return barrier_psi(spec, model, s); }, x, 1e-5);
    CHECK((ga - gf).norm() <= 1e-5 * std::max(1.0, ga.norm()));
  }
}

TEST_CASE("chain telescopes along a drift-only rollout") {
  auto model = make_quadrotor();
  auto spec = quadrotor_barrier();
  StateVec x(6);
  x << 2.1, 1.9, 0.05, -0.3, 0.2, 0.1;
  const double dt = 1e-5;
  ControlVec u0 = ControlVec::Zero(2);
  // one nominal-drift step (quadrotor drift ignores control entirely)
  const StateVec x_next = step_rk4(model, x, u0, dt, Plant::Nominal);
  const Eigen::VectorXd s_now = hocbf_chain_values(spec, model, x);
  const Eigen::VectorXd s_next = hocbf_chain_values(spec, model, x_next);
  for (int i = 0; i + 1 < spec.relative_degree; ++i) {
    const double fd_rate = (s_next[i] - s_now[i]) / dt;
    const double chain_rate = s_now[i + 1] - spec.hocbf_gains[i] * s_now[i];
    CHECK(fd_rate == doctest::Approx(chain_rate).epsilon(1e-4));
  }
}

TEST_CASE("hover far from the obstacle leaves strictly positive slack") {
  auto model = make_quadrotor();
  auto spec = quadrotor_barrier();
  StateVec x = StateVec::Zero(6);
  x[0] = 2.0;
  x[1] = 2.0;
  ControlVec u_hover(2);
  u_hover << model.params_nominal.at("mass") * 9.81, 0.0;
  const auto cc = hocbf_constants(spec, model, x);
  CHECK(cc.c_a.dot(u_hover) + cc.c_b > 0.0);
}

TEST_CASE("control coupling below the chain order is a structural error") {
  // single integrator xdot = u with h = x: control already enters hdot
  auto f = [](const auto* x, auto* dx) { dx[0] = 0.0 * x[0]; };
  auto g = [](const StateVec&) {
    Eigen::MatrixXd m(1, 1);
    m << 1.0;
    return m;
  };
  auto model = assemble_model(1, 1, f, f, g, g);
  BarrierSpec spec;
  spec.h = [](const StateVec& x) { return x[0]; };
  spec.grad_h = [](const StateVec&) {
    Eigen::VectorXd gr(1);
    gr << 1.0;
    return gr;
  };
  spec.relative_degree = 2;
  spec.hocbf_gains = Eigen::VectorXd::Constant(2, 1.0);
  spec.h_jet = BarrierJet::make([](const auto* x) { return x[0] + 0.0; });
  StateVec x(1);
  x << 0.5;
  CHECK_THROWS_AS(hocbf_constants(spec, model, x), ContractViolation);
}

TEST_CASE("mixed Lie diagnostic flags where control couples in") {
  auto model = double_integrator();
  auto spec = position_barrier(1.0, 1.0);
  StateVec x(2);
  x << 0.4, -0.2;
  const Eigen::VectorXd norms = hocbf_mixed_lie_norms(spec, model, x);
  CHECK(norms[0] == 0.0);
  CHECK(norms[1] > 0.5);
}

TEST_CASE("residual truth vanishes for matched parameters and stays affine") {
  auto model = double_integrator();  // true == nominal
  auto spec = position_barrier(1.0, 2.0);
  StateVec x(2);
  x << 0.3, -0.1;
  ControlVec u(1);
  u << 1.7;
  CHECK(residual_truth(spec, model, x, u) == 0.0);

  auto quad = make_quadrotor();
  auto qspec = quadrotor_barrier();
  Rng rng(9);
  for (int i = 0; i < 10; ++i) {
    StateVec xq(6);
    for (int d = 0; d < 6; ++d) xq[d] = rng.uniform(-1, 2);
    ControlVec u1(2), u2(2);
    u1 << rng.uniform(0, 30), rng.uniform(-3, 3);
    u2 << rng.uniform(0, 30), rng.uniform(-3, 3);
    const double lam = rng.uniform();
    const double mid = residual_truth(qspec, quad, xq, (lam * u1 + (1 - lam) * u2).eval());
    const double interp = lam * residual_truth(qspec, quad, xq, u1) +
                          (1 - lam) * residual_truth(qspec, quad, xq, u2);
    CHECK(mid == doctest::Approx(interp).epsilon(1e-12));
  }
}
