#ifndef PROBF_GP_HPP
#define PROBF_GP_HPP

#include <Eigen/Core>
#include <cstdint>
#include <utility>

#include "probf/kernels.hpp"
#include "probf/parallel.hpp"
#include "probf/types.hpp"

namespace probf {

/// Labelled residual data ((x_i, u_i), d_i) stored column-wise.
struct ResidualDataset {
  Eigen::MatrixXd X;  // state_dim x N
  Eigen::MatrixXd U;  // control_dim x N
  Eigen::VectorXd y;  // N

  int n() const { return static_cast<int>(y.size()); }
  int state_dim() const { return static_cast<int>(X.rows()); }
  int control_dim() const { return static_cast<int>(U.rows()); }

  static ResidualDataset empty(int state_dim, int control_dim) {
    ResidualDataset d;
    d.X.resize(state_dim, 0);
    d.U.resize(control_dim, 0);
    d.y.resize(0);
    return d;
  }
};

/// Cholesky of a symmetric matrix with escalating diagonal jitter:
/// 1e-8 * trace-scale, escalated tenfold up to 1e-2, then ConditioningError.
struct JitteredCholesky {
  Eigen::MatrixXd L;
  double jitter = 0.0;
};
JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& A);

/// Trained residual model: hyperparameters, data, and the cached factor
/// L L^T = K + sn2 I (plus any jitter) with weight vector alpha.
struct GPResidualModel {
  KernelHyperparams hp;
  ResidualDataset data;
  Eigen::MatrixXd L;
  Eigen::VectorXd alpha;
  double jitter = 0.0;
  double mll = 0.0;  // log marginal likelihood at training time (0 when N=0)
};

/// Joint posterior of (a(x*), b(x*)) given the residual labels.
struct PosteriorBlocks {
  Eigen::VectorXd a_mean;    // m
  double b_mean = 0.0;
  Eigen::MatrixXd sigma_a;   // m x m
  Eigen::VectorXd sigma_ab;  // m
  double sigma_b2 = 0.0;
};

double log_marginal_likelihood(const ResidualDataset& data, const KernelHyperparams& hp,
                               Exec mode = Exec::Parallel);

struct FitConfig {
  int restarts = 4;
  int max_iters = 200;
  double grad_tol = 1e-4;
  double improve_tol = 1e-8;  // stop after two consecutive relative gains below this
  std::uint64_t seed = 0;
  Exec mode = Exec::Parallel;
};

/// Scale-free starting point: lengthscales at the per-dimension std of the
/// training states, signal variances split from var(y).
KernelHyperparams initial_hyperparams(const ResidualDataset& data);

/// Multi-start gradient ascent on the MLL in log-parameter space with
/// backtracking; returns the best hyperparameters seen, never below the
/// starting point. An optional warm start joins the restart pool (episodic
/// refits converge in a handful of steps from the previous episode's fit).
KernelHyperparams fit_hyperparams(const ResidualDataset& data, const FitConfig& cfg = {},
                                  const KernelHyperparams* warm_start = nullptr);

/// Cache the factorization and weights; N = 0 yields the prior model.
GPResidualModel train(const ResidualDataset& data, const KernelHyperparams& hp,
                      Exec mode = Exec::Parallel);

PosteriorBlocks posterior_blocks(const GPResidualModel& model, const StateVec& x_star);

/// Posterior mean/variance of d(x*, u*); the variance is clamped at zero
/// from below and the clamp magnitude asserted to be round-off sized.
std::pair<double, double> posterior_predict(const GPResidualModel& model, const StateVec& x_star,
                                            const ControlVec& u_star);

/// mu/sigma^2 of d at (x*, u*) from already-computed blocks.
std::pair<double, double> predict_from_blocks(const PosteriorBlocks& blocks,
                                              const ControlVec& u_star,
                                              double prior_var_scale = 1.0);

}  // namespace probf

#endif  // PROBF_GP_HPP
