#ifndef PROBF_VALIDATION_HPP
#define PROBF_VALIDATION_HPP

#include <cstdint>
#include <string>

#include "probf/gp.hpp"
#include "probf/rng.hpp"
#include "probf/socp.hpp"

namespace probf::validation {

/// Result of one oracle suite run.
struct OracleReport {
  std::string name;
  int n_cases = 0;
  int n_pass = 0;
  double max_err = 0.0;
  bool ok() const { return n_cases > 0 && n_pass == n_cases; }
};

ResidualDataset random_dataset(Rng& rng, int state_dim, int control_dim, int n);
KernelHyperparams random_hyperparams(Rng& rng, int state_dim, int control_dim);

/// Blockwise posterior vs direct scalar-GP prediction with the composite
/// kernel on the joined input (dense inverse, no shared factorization).
double gp_blocks_vs_direct_error(const GPResidualModel& model, const StateVec& x_star,
                                 const ControlVec& u_star);

/// Blockwise posterior vs brute-force conditioning of the joint Gaussian over
/// the labels and the m+1 latent values (a(x*), b(x*)).
double gp_blocks_vs_joint_error(const GPResidualModel& model, const StateVec& x_star);

/// Cholesky MLL vs naive dense evaluation (explicit inverse + determinant).
double mll_dense_gap(const ResidualDataset& data, const KernelHyperparams& hp);

OracleReport run_gp_oracle_suite(int n_datasets, std::uint64_t seed, double tol = 1e-8);
OracleReport run_mll_suite(int n_cases, std::uint64_t seed, double tol = 1e-9);

/// Random safety-projection instances for solver checks.
struct SocpInstance {
  PosteriorBlocks blocks;
  ConstraintConstants cc;
  ControlVec u_d;
  double delta = 1.0;
};
SocpInstance random_socp_instance(Rng& rng, int m, bool force_active = false);

/// m=1: closed-form feasible interval from the quadratic s-elimination.
/// Returns the projection of u_d onto the interval, or empty on infeasible.
struct Interval1D {
  bool feasible = false;
  double lo = 0.0, hi = 0.0;  // +-inf for unbounded sides
};
Interval1D feasible_interval_1d(const SocpInstance& inst);

OracleReport run_socp_m1_suite(int n_instances, std::uint64_t seed, double tol = 1e-6);
OracleReport run_socp_m2_suite(int n_instances, std::uint64_t seed);

}  // namespace probf::validation

#endif  // PROBF_VALIDATION_HPP
