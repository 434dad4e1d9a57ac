#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "probf/socp.hpp"
#include "probf/stats.hpp"
#include "probf/validation.hpp"

using namespace probf;
namespace val = probf::validation;

namespace {

/// Bisection on the erfc-based CDF; quantile oracle independent of the
/// rational approximation.
double quantile_by_bisection(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (norm_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("gaussian backoff multiplier delta(eps)") {
  CHECK(delta_from_epsilon(0.5) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(delta_from_epsilon(0.158655) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(delta_from_epsilon(0.022750) == doctest::Approx(2.0).epsilon(1e-3));
  for (double eps : {0.4, 0.25, 0.1, 0.01, 0.001}) {
    CHECK(delta_from_epsilon(eps) ==
          doctest::Approx(quantile_by_bisection(1.0 - eps)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(delta_from_epsilon(0.0), ContractViolation);
  CHECK_THROWS_AS(delta_from_epsilon(1.0), ContractViolation);
}

TEST_CASE("halfspace projection closed form") {
  ConstraintConstants cc;
  cc.c_a.resize(1);

  SUBCASE("already feasible input is untouched") {
    cc.c_a << 2.0;
    cc.c_b = 1.0;
    ControlVec u_d(1);
    u_d << 3.0;
    CHECK(cbf_qp(cc, u_d)[0] == 3.0);
  }
  SUBCASE("scalar projection onto the boundary") {
    cc.c_a << 1.0;
    cc.c_b = 0.0;
    ControlVec u_d(1);
    u_d << -2.0;
    CHECK(cbf_qp(cc, u_d)[0] == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("symmetric two-dimensional projection") {
    ConstraintConstants c2;
    c2.c_a.resize(2);
    c2.c_a << 1.0, 1.0;
    c2.c_b = -1.0;
    ControlVec u_d = ControlVec::Zero(2);
    const ControlVec u = cbf_qp(c2, u_d);
    CHECK(u[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(u[1] == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("control-independent violation is infeasible") {
    cc.c_a << 0.0;
    cc.c_b = -0.5;
    ControlVec u_d(1);
    u_d << 1.0;
    CHECK_THROWS_AS(cbf_qp(cc, u_d), InfeasibleConstraint);
  }
}

TEST_CASE("program assembly carries the stated structure") {
  Rng rng(1);
  for (int trial = 0; trial < 25; ++trial) {
    const int m = 1 + static_cast<int>(rng.next_u64() % 2);
    const auto inst = val::random_socp_instance(rng, m);
    const auto prog = build_program(inst.blocks, inst.cc, inst.u_d, inst.delta);
    const int n = m + 2;

    // objective: u_bar' Q u_bar == ||u - t u_d||^2 at t = 1
    for (int t2 = 0; t2 < 5; ++t2) {
      Eigen::VectorXd ub(n);
      for (int i = 0; i < n; ++i) ub[i] = rng.uniform(-2, 2);
      ub[m] = 1.0;
      const double lhs = ub.dot(prog.Q * ub);
      const double rhs = (ub.head(m) - inst.u_d).squaredNorm();
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
    }
    const Eigen::VectorXd qeig =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(prog.Q).eigenvalues();
    CHECK(qeig.minCoeff() >= -1e-10);

    // cone factor reproduces the augmented covariance
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n, n);
    aug.topLeftCorner(m, m) = inst.blocks.sigma_a;
    aug.block(0, m, m, 1) = inst.blocks.sigma_ab;
    aug.block(m, 0, 1, m) = inst.blocks.sigma_ab.transpose();
    aug(m, m) = inst.blocks.sigma_b2;
    const Eigen::MatrixXd recon = prog.Sigma_bar.transpose() * prog.Sigma_bar;
    CHECK((recon - aug).cwiseAbs().maxCoeff() <
          1e-8 * std::max(1.0, aug.cwiseAbs().maxCoeff()));

    // equality row pins t = 1
    CHECK(prog.D[m] == 1.0);
    CHECK(prog.f == -1.0);
    CHECK(prog.c[n - 1] == 1.0);
    CHECK(prog.C(1, n - 1) == -1.0);
    CHECK(prog.d.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("program construction rejects bad inputs") {
  Rng rng(2);
  auto inst = val::random_socp_instance(rng, 1);
  CHECK_THROWS_AS(build_program(inst.blocks, inst.cc, inst.u_d, -0.5), ContractViolation);
  inst.blocks.sigma_a(0, 0) = -5.0;  // far beyond any jitter budget
  inst.blocks.sigma_ab.setZero();
  inst.blocks.sigma_b2 = 0.1;
  CHECK_THROWS_AS(build_program(inst.blocks, inst.cc, inst.u_d, 1.0), ConditioningError);
}

TEST_CASE("solver returns a strictly feasible desired control unchanged") {
  Rng rng(3);
  int checked = 0;
  while (checked < 20) {
    const auto inst = val::random_socp_instance(rng, 2);
    if (constraint_value(inst.blocks, inst.cc, inst.u_d, inst.delta) <= 0.01) continue;
    const auto sol = solve(build_program(inst.blocks, inst.cc, inst.u_d, inst.delta));
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK((sol.u_bar.head(2) - inst.u_d).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(sol.u_bar[2] == 1.0);
    ++checked;
  }
}

TEST_CASE("delta zero reduces to the mean halfspace projection") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = val::random_socp_instance(rng, 1 + static_cast<int>(rng.next_u64() % 2));
    const auto sol = solve(build_program(inst.blocks, inst.cc, inst.u_d, 0.0));
    ConstraintConstants eff;
    eff.c_a = inst.blocks.a_mean + inst.cc.c_a;
    eff.c_b = inst.blocks.b_mean + inst.cc.c_b;
    ControlVec expected;
    bool feasible = true;
    try {
      expected = cbf_qp(eff, inst.u_d);
    } catch (const InfeasibleConstraint&) {
      feasible = false;
    }
    if (!feasible) {
      CHECK(sol.status == SolveStatus::Infeasible);
      continue;
    }
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK((sol.u_bar.head(expected.size()) - expected).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("zero covariance makes every delta behave like the mean program") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = val::random_socp_instance(rng, 2);
    inst.blocks.sigma_a.setZero();
    inst.blocks.sigma_ab.setZero();
    inst.blocks.sigma_b2 = 0.0;
    ConstraintConstants eff;
    eff.c_a = inst.blocks.a_mean + inst.cc.c_a;
    eff.c_b = inst.blocks.b_mean + inst.cc.c_b;
    ControlVec expected;
    try {
      expected = cbf_qp(eff, inst.u_d);
    } catch (const InfeasibleConstraint&) {
      continue;
    }
    for (double delta : {0.0, 0.7, 2.0}) {
      const auto sol = solve(build_program(inst.blocks, inst.cc, inst.u_d, delta));
      REQUIRE(sol.status == SolveStatus::Optimal);
      CHECK((sol.u_bar.head(2) - expected).cwiseAbs().maxCoeff() < 2e-6);
    }
  }
}

TEST_CASE("constraint value at the solution reproduces the explicit expression") {
  Rng rng(6);
  int done = 0;
  while (done < 30) {
    const auto inst = val::random_socp_instance(rng, 2, true);
    const auto sol = solve(build_program(inst.blocks, inst.cc, inst.u_d, inst.delta));
    if (sol.status != SolveStatus::Optimal) continue;
    const ControlVec u = sol.u_bar.head(2);
    const double direct =
        (inst.blocks.a_mean + inst.cc.c_a).dot(u) + inst.blocks.b_mean + inst.cc.c_b -
        inst.delta * std::sqrt(std::max(u.dot(inst.blocks.sigma_a * u) +
                                            2.0 * inst.blocks.sigma_ab.dot(u) +
                                            inst.blocks.sigma_b2,
                                        0.0));
    CHECK(constraint_value(inst.blocks, inst.cc, u, inst.delta) ==
          doctest::Approx(direct).epsilon(1e-10));
    // solution slack: never meaningfully negative at optimal status
    CHECK(constraint_value(inst.blocks, inst.cc, u, inst.delta) >= -1e-6);
    ++done;
  }
}

TEST_CASE("one-dimensional instances match the analytic interval oracle") {
  const auto rep = val::run_socp_m1_suite(60, 777, 1e-6);
  INFO(rep.name, " max_err=", rep.max_err);
  CHECK(rep.n_pass == rep.n_cases);
}

TEST_CASE("two-dimensional instances match the grid oracle") {
  const auto rep = val::run_socp_m2_suite(12, 888);
  INFO(rep.name, " max_err=", rep.max_err);
  CHECK(rep.n_pass == rep.n_cases);
}

TEST_CASE("feasibility is monotone in delta and the objective non-decreasing") {
  Rng rng(7);
  int done = 0;
  while (done < 100) {
    const auto inst = val::random_socp_instance(rng, 1 + static_cast<int>(rng.next_u64() % 2));
    const double d2 = inst.delta;
    const double d1 = d2 * rng.uniform(0.1, 0.9);
    const auto sol2 = solve(build_program(inst.blocks, inst.cc, inst.u_d, d2));
    if (sol2.status != SolveStatus::Optimal) continue;
    const auto sol1 = solve(build_program(inst.blocks, inst.cc, inst.u_d, d1));
    REQUIRE(sol1.status == SolveStatus::Optimal);  // feasible at d2 implies feasible below
    CHECK(sol1.objective <= sol2.objective + 1e-7 * (1.0 + sol2.objective));
    ++done;
  }
}

TEST_CASE("solver is deterministic") {
  Rng rng(8);
  const auto inst = val::random_socp_instance(rng, 2, true);
  const auto prog = build_program(inst.blocks, inst.cc, inst.u_d, inst.delta);
  const auto a = solve(prog);
  const auto b = solve(prog);
  CHECK((a.u_bar - b.u_bar).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.iterations == b.iterations);
}
