#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "probf/kernels.hpp"
#include "probf/rng.hpp"

using namespace probf;

namespace {
KernelHyperparams simple_hp(int s, int m, Rng& rng) {
  KernelHyperparams hp;
  auto mk = [&]() {
    KernelParams p;
    p.signal_var = std::exp(rng.uniform(-0.5, 0.5));
    p.lengthscales.resize(s);
    for (int d = 0; d < s; ++d) p.lengthscales[d] = std::exp(rng.uniform(-0.5, 0.7));
    return p;
  };
  hp.kb = mk();
  hp.ka.resize(m);
  for (int j = 0; j < m; ++j) hp.ka[j] = mk();
  hp.noise_var = 1e-3;
  return hp;
}
}  // namespace

TEST_CASE("matern52 at zero distance returns the signal variance") {
  Eigen::VectorXd x(3), ell(3);
  x << 1.0, -2.0, 0.5;
  ell << 0.7, 1.3, 2.0;
  CHECK(matern52(x, x, ell, 1.7) == 1.7);
}

TEST_CASE("matern52 is symmetric and decays monotonically") {
  Rng rng(3);
  Eigen::VectorXd ell(2);
  ell << 0.9, 1.4;
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd a(2), b(2);
    a << rng.uniform(-3, 3), rng.uniform(-3, 3);
    b << rng.uniform(-3, 3), rng.uniform(-3, 3);
    CHECK(matern52(a, b, ell, 1.0) == matern52(b, a, ell, 1.0));
  }
  // value strictly decreases along a ray away from the center
  Eigen::VectorXd origin = Eigen::VectorXd::Zero(2);
  double prev = matern52(origin, origin, ell, 1.0);
  for (double t = 0.05; t < 12.0; t += 0.05) {
    Eigen::VectorXd p(2);
    p << t, 0.4 * t;
    const double k = matern52(origin, p, ell, 1.0);
    CHECK(k < prev);
    prev = k;
  }
  CHECK(prev < 1e-6);  // effectively zero far away
}

TEST_CASE("composite kernel reduces as controls vanish") {
  Rng rng(4);
  auto hp = simple_hp(3, 2, rng);
  Eigen::VectorXd x(3), x2(3);
  x << 0.1, 0.4, -0.2;
  x2 << -0.5, 0.2, 0.9;
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(2);
  CHECK(composite_kernel(hp, x, u0, x2, u0) ==
        matern52(x, x2, hp.kb.lengthscales, hp.kb.signal_var));

  auto hp1 = simple_hp(3, 1, rng);
  Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  CHECK(composite_kernel(hp1, x, one, x2, one) ==
        doctest::Approx(matern52(x, x2, hp1.kb.lengthscales, hp1.kb.signal_var) +
                        matern52(x, x2, hp1.ka[0].lengthscales, hp1.ka[0].signal_var))
            .epsilon(1e-15));
}

TEST_CASE("composite gram matrix is positive semi-definite") {
  Rng rng(5);
  auto hp = simple_hp(2, 2, rng);
  const int n = 10;
  Eigen::MatrixXd K(n, n);
  Eigen::MatrixXd X(2, n), U(2, n);
  for (int i = 0; i < n; ++i) {
    X.col(i) << rng.uniform(-2, 2), rng.uniform(-2, 2);
    U.col(i) << rng.uniform(-2, 2), rng.uniform(-2, 2);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      K(i, j) = composite_kernel(hp, X.col(i), U.col(i), X.col(j), U.col(j));
    }
  }
  const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues();
  CHECK(eig.minCoeff() >= -1e-10);
}

TEST_CASE("gram builder matches the entrywise kernel and both exec modes agree bitwise") {
  Rng rng(6);
  const int n = 40, s = 4, m = 2;
  Eigen::MatrixXd X(s, n), U(m, n);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < s; ++d) X(d, i) = rng.uniform(-1, 1);
    for (int d = 0; d < m; ++d) U(d, i) = rng.uniform(-2, 2);
  }
  auto hp = simple_hp(s, m, rng);
  GramBuilder serial(X, U, Exec::Serial);
  GramBuilder par(X, U, Exec::Parallel);
  const Eigen::MatrixXd Ks = serial.gram(hp);
  const Eigen::MatrixXd Kp = par.gram(hp);
  CHECK((Ks - Kp).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < n; i += 7) {
    for (int j = 0; j < n; j += 5) {
      const double direct = composite_kernel(hp, X.col(i), U.col(i), X.col(j), U.col(j));
      CHECK(Ks(i, j) == doctest::Approx(direct).epsilon(1e-13));
    }
  }
  CHECK((Ks - Ks.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("log-vector packing round-trips") {
  Rng rng(7);
  auto hp = simple_hp(3, 2, rng);
  const Eigen::VectorXd v = hp.to_log_vector();
  const auto back = KernelHyperparams::from_log_vector(3, 2, v);
  CHECK((back.to_log_vector() - v).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(back.ka.size() == 2);
  CHECK(v.size() == hp.n_params());
}
