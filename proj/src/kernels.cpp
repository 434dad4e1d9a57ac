#include "probf/kernels.hpp"

#include <cmath>

#include "probf/errors.hpp"

namespace probf {

namespace {
constexpr double kSqrt5 = 2.23606797749978969;

inline double matern52_of_r(double r, double sf2) {
  return sf2 * (1.0 + kSqrt5 * r + (5.0 / 3.0) * r * r) * std::exp(-kSqrt5 * r);
}

/// sf2 (5/3)(1 + sqrt5 r) exp(-sqrt5 r); the radial factor of -dk/d(r^2)*2,
/// shared by all lengthscale derivatives.
inline double matern52_radial(double r, double sf2) {
  return sf2 * (5.0 / 3.0) * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
}
}  // namespace

Eigen::VectorXd KernelHyperparams::to_log_vector() const {
  const int s = state_dim();
  const int m = control_dim();
  Eigen::VectorXd v(n_params());
  int k = 0;
  auto pack = [&](const KernelParams& p) {
    v[k++] = std::log(p.signal_var);
    for (int d = 0; d < s; ++d) v[k++] = std::log(p.lengthscales[d]);
  };
  pack(kb);
  for (int j = 0; j < m; ++j) pack(ka[j]);
  v[k++] = std::log(noise_var);
  return v;
}

KernelHyperparams KernelHyperparams::from_log_vector(int state_dim, int control_dim,
                                                     const Eigen::VectorXd& logv) {
  KernelHyperparams hp;
  int k = 0;
  auto unpack = [&]() {
    KernelParams p;
    p.signal_var = std::exp(logv[k++]);
    p.lengthscales.resize(state_dim);
    for (int d = 0; d < state_dim; ++d) p.lengthscales[d] = std::exp(logv[k++]);
    return p;
  };
  hp.kb = unpack();
  hp.ka.resize(control_dim);
  for (int j = 0; j < control_dim; ++j) hp.ka[j] = unpack();
  hp.noise_var = std::exp(logv[k++]);
  return hp;
}

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const Eigen::VectorXd& lengthscales, double signal_var) {
  if (a.size() != b.size() || a.size() != lengthscales.size()) {
    throw ContractViolation("matern52: dimension mismatch");
  }
  double r2 = 0.0;
  for (int d = 0; d < a.size(); ++d) {
    const double z = (a[d] - b[d]) / lengthscales[d];
    r2 += z * z;
  }
  return matern52_of_r(std::sqrt(r2), signal_var);
}

double composite_kernel(const KernelHyperparams& hp, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, const Eigen::VectorXd& x2,
                        const Eigen::VectorXd& u2) {
  if (u.size() != hp.control_dim() || u2.size() != hp.control_dim()) {
    throw ContractViolation("composite_kernel: control dimension mismatch");
  }
  double k = matern52(x, x2, hp.kb.lengthscales, hp.kb.signal_var);
  for (int j = 0; j < hp.control_dim(); ++j) {
    k += matern52(x, x2, hp.ka[j].lengthscales, hp.ka[j].signal_var) * u[j] * u2[j];
  }
  return k;
}

GramBuilder::GramBuilder(Eigen::MatrixXd X, Eigen::MatrixXd U, Exec mode)
    : mode_(mode),
      n_(static_cast<int>(X.cols())),
      s_(static_cast<int>(X.rows())),
      m_(static_cast<int>(U.rows())) {
  if (U.cols() != n_) throw ContractViolation("GramBuilder: X/U column mismatch");
  sqdiff_.assign(s_, Eigen::MatrixXd(n_, n_));
  for (int d = 0; d < s_; ++d) {
    auto& M = sqdiff_[d];
    const auto row = X.row(d);
    parallel_for(static_cast<std::size_t>(n_), mode_, [&](std::size_t i) {
      for (int j = 0; j < n_; ++j) {
        const double z = row[static_cast<int>(i)] - row[j];
        M(static_cast<int>(i), j) = z * z;
      }
    });
  }
  uprod_.assign(m_, Eigen::MatrixXd(n_, n_));
  for (int j = 0; j < m_; ++j) {
    auto& M = uprod_[j];
    const auto row = U.row(j);
    parallel_for(static_cast<std::size_t>(n_), mode_, [&](std::size_t i) {
      for (int c = 0; c < n_; ++c) M(static_cast<int>(i), c) = row[static_cast<int>(i)] * row[c];
    });
  }
}

Eigen::MatrixXd GramBuilder::gram(const KernelHyperparams& hp) const {
  if (hp.state_dim() != s_ || hp.control_dim() != m_) {
    throw ContractViolation("GramBuilder::gram: hyperparameter dimensions mismatch");
  }
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n_, n_);
  // inverse squared lengthscales per kernel
  std::vector<Eigen::VectorXd> inv2(m_ + 1);
  inv2[0] = hp.kb.lengthscales.array().square().inverse();
  for (int j = 0; j < m_; ++j) inv2[j + 1] = hp.ka[j].lengthscales.array().square().inverse();

  parallel_for(static_cast<std::size_t>(n_), mode_, [&](std::size_t ii) {
    const int i = static_cast<int>(ii);
    for (int j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (int c = 0; c <= m_; ++c) {
        double r2 = 0.0;
        for (int d = 0; d < s_; ++d) r2 += sqdiff_[d](i, j) * inv2[c][d];
        const double sf2 = c == 0 ? hp.kb.signal_var : hp.ka[c - 1].signal_var;
        const double k = matern52_of_r(std::sqrt(r2), sf2);
        acc += c == 0 ? k : k * uprod_[c - 1](i, j);
      }
      K(i, j) = acc;
    }
  });
  // mirror: K built lower-triangular, symmetric by construction
  for (int i = 0; i < n_; ++i) {
    for (int j = i + 1; j < n_; ++j) K(i, j) = K(j, i);
  }
  return K;
}

GramBuilder::Pieces GramBuilder::gram_with_pieces(const KernelHyperparams& hp) const {
  Pieces out;
  out.contrib.assign(m_ + 1, Eigen::MatrixXd(n_, n_));
  out.radial.assign(m_ + 1, Eigen::MatrixXd(n_, n_));
  out.K = Eigen::MatrixXd::Zero(n_, n_);

  std::vector<Eigen::VectorXd> inv2(m_ + 1);
  inv2[0] = hp.kb.lengthscales.array().square().inverse();
  for (int j = 0; j < m_; ++j) inv2[j + 1] = hp.ka[j].lengthscales.array().square().inverse();

  parallel_for(static_cast<std::size_t>(n_), mode_, [&](std::size_t ii) {
    const int i = static_cast<int>(ii);
    for (int j = 0; j < n_; ++j) {
      double acc = 0.0;
      for (int c = 0; c <= m_; ++c) {
        double r2 = 0.0;
        for (int d = 0; d < s_; ++d) r2 += sqdiff_[d](i, j) * inv2[c][d];
        const double r = std::sqrt(r2);
        const double sf2 = c == 0 ? hp.kb.signal_var : hp.ka[c - 1].signal_var;
        const double w = c == 0 ? 1.0 : uprod_[c - 1](i, j);
        const double k = matern52_of_r(r, sf2) * w;
        out.contrib[c](i, j) = k;
        out.radial[c](i, j) = matern52_radial(r, sf2) * w;
        acc += k;
      }
      out.K(i, j) = acc;
    }
  });
  return out;
}

Eigen::VectorXd GramBuilder::mll_gradient(const KernelHyperparams& hp, const Eigen::MatrixXd& W,
                                          const Pieces& pieces) const {
  const int P = hp.n_params();
  const int per_kernel = 1 + s_;
  std::vector<Eigen::VectorXd> inv2(m_ + 1);
  inv2[0] = hp.kb.lengthscales.array().square().inverse();
  for (int j = 0; j < m_; ++j) inv2[j + 1] = hp.ka[j].lengthscales.array().square().inverse();

  // fixed row blocks; per-block partials combined in order for determinism
  constexpr int kRowBlock = 16;
  const int n_blocks = (n_ + kRowBlock - 1) / kRowBlock;
  Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(P, n_blocks);

  parallel_for(static_cast<std::size_t>(n_blocks), mode_, [&](std::size_t bb) {
    const int b = static_cast<int>(bb);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(P);
    const int lo = b * kRowBlock;
    const int hi = std::min(n_, lo + kRowBlock);
    for (int i = lo; i < hi; ++i) {
      for (int j = 0; j < n_; ++j) {
        const double w = W(i, j);
        for (int c = 0; c <= m_; ++c) {
          const int base = c * per_kernel;
          g[base] += w * pieces.contrib[c](i, j);
          const double rad = w * pieces.radial[c](i, j);
          for (int d = 0; d < s_; ++d) {
            g[base + 1 + d] += rad * sqdiff_[d](i, j) * inv2[c][d];
          }
        }
      }
    }
    partial.col(b) = g;
  });

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(P);
  for (int b = 0; b < n_blocks; ++b) grad += partial.col(b);
  grad *= 0.5;
  // noise term: dA/dlog sn2 = sn2 I
  grad[P - 1] = 0.5 * hp.noise_var * W.trace();
  return grad;
}

}  // namespace probf
