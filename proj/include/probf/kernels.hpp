#ifndef PROBF_KERNELS_HPP
#define PROBF_KERNELS_HPP

#include <Eigen/Core>
#include <vector>

#include "probf/parallel.hpp"

namespace probf {

/// Hyperparameters of one Matern-5/2 ARD kernel.
struct KernelParams {
  double signal_var = 1.0;
  Eigen::VectorXd lengthscales;  // one per state dimension
};

/// Hyperparameters of the residual kernel
///   k_d((x,u),(x',u')) = sum_j k_{a,j}(x,x') u_j u'_j + k_b(x,x')
/// plus the shared observation noise variance.
struct KernelHyperparams {
  KernelParams kb;
  std::vector<KernelParams> ka;  // one per control dimension
  double noise_var = 1e-2;

  int state_dim() const { return static_cast<int>(kb.lengthscales.size()); }
  int control_dim() const { return static_cast<int>(ka.size()); }
  int n_params() const { return (1 + control_dim()) * (1 + state_dim()) + 1; }

  /// Packing order: [kb sigma, kb ell(1..s)], per-j [ka sigma, ka ell(1..s)],
  /// noise, all as natural logs.
  Eigen::VectorXd to_log_vector() const;
  static KernelHyperparams from_log_vector(int state_dim, int control_dim,
                                           const Eigen::VectorXd& logv);
};

/// Matern 5/2 with per-dimension lengthscales:
///   sf2 (1 + sqrt5 r + 5 r^2/3) exp(-sqrt5 r),  r^2 = sum_d (a_d-b_d)^2/ell_d^2.
double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const Eigen::VectorXd& lengthscales, double signal_var);

double composite_kernel(const KernelHyperparams& hp, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, const Eigen::VectorXd& x2,
                        const Eigen::VectorXd& u2);

/// Pairwise Gram machinery over a fixed training set. Squared coordinate
/// differences and control products are cached once; kernel matrices and
/// log-marginal-likelihood gradients are then cheap per hyperparameter
/// setting. Serial and OpenMP paths write entrywise and reduce over fixed
/// blocks, so results are bit-identical across thread counts.
class GramBuilder {
public:
  GramBuilder(Eigen::MatrixXd X, Eigen::MatrixXd U, Exec mode = Exec::Parallel);

  int n() const { return n_; }

  /// Composite kernel matrix (noise-free).
  Eigen::MatrixXd gram(const KernelHyperparams& hp) const;

  /// K plus the per-kernel pieces the MLL gradient needs:
  ///   contrib[c] = the kernel's weighted contribution to K  (= dK/dlog sf2_c)
  ///   radial[c]  = sf2 (5/3)(1 + sqrt5 r) exp(-sqrt5 r) with the same weight
  /// so dK/dlog ell_{c,d} = radial[c] .* sqdiff_d / ell_d^2.
  struct Pieces {
    Eigen::MatrixXd K;
    std::vector<Eigen::MatrixXd> contrib;
    std::vector<Eigen::MatrixXd> radial;
  };
  Pieces gram_with_pieces(const KernelHyperparams& hp) const;

  /// Gradient of the log marginal likelihood w.r.t. the log hyperparameter
  /// vector, given W = alpha alpha^T - (K + sn2 I)^{-1}.
  Eigen::VectorXd mll_gradient(const KernelHyperparams& hp, const Eigen::MatrixXd& W,
                               const Pieces& pieces) const;

private:
  Exec mode_;
  int n_ = 0, s_ = 0, m_ = 0;
  std::vector<Eigen::MatrixXd> sqdiff_;  // s matrices of (x_id - x_jd)^2
  std::vector<Eigen::MatrixXd> uprod_;   // m matrices of u_ji * u_ji'
};

}  // namespace probf

#endif  // PROBF_KERNELS_HPP
