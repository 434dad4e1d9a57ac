#ifndef PROBF_SOCP_HPP
#define PROBF_SOCP_HPP

#include <Eigen/Core>

#include "probf/barrier.hpp"
#include "probf/gp.hpp"
#include "probf/types.hpp"

namespace probf {

/// delta = Phi^{-1}(1 - eps): one-sided Gaussian backoff multiplier for a
/// violation probability budget eps in (0,1).
double delta_from_epsilon(double eps);

/// Constraint is control-independent and violated; no control can help.
class InfeasibleConstraint : public std::runtime_error {
public:
  explicit InfeasibleConstraint(const std::string& what) : std::runtime_error(what) {}
};

/// Minimum-deviation projection onto the halfspace c_a' u + c_b >= 0:
/// u = u_d - c_a min(0, c_a' u_d + c_b)/|c_a|^2. Throws InfeasibleConstraint
/// when c_a = 0 and c_b < 0.
ControlVec cbf_qp(const ConstraintConstants& cc, const ControlVec& u_d);

/// Convex lifting of the chance-constrained projection over the decision
/// vector u_bar = [u; t; s]:
///   min  u_bar' Q u_bar
///   s.t. || Sigma_bar u_bar || <= c' u_bar,   C u_bar + d <= 0,
///        D' u_bar + f = 0              (pins t = 1)
struct ConvexSafetyProgram {
  Eigen::MatrixXd Q;          // (m+2)x(m+2), PSD
  Eigen::MatrixXd Sigma_bar;  // (m+2)x(m+2), cone factor; last row/col zero
  Eigen::VectorXd c;          // cone direction, the s unit vector
  Eigen::MatrixXd C;          // 2x(m+2): chance row and -s row
  Eigen::VectorXd d;          // zeros
  Eigen::VectorXd D;          // t unit vector
  double f = -1.0;
  ControlVec u_d;

  int control_dim() const { return static_cast<int>(u_d.size()); }
  double delta() const { return C(0, control_dim() + 1); }
  Eigen::VectorXd a_eff() const { return -C.row(0).head(control_dim()).transpose(); }
  double b_eff() const { return -C(0, control_dim()); }
};

/// Assemble the program from posterior blocks and nominal constants; the
/// cone factor is a Cholesky square root (with escalating jitter) of the
/// augmented covariance over [u; t].
ConvexSafetyProgram build_program(const PosteriorBlocks& blocks, const ConstraintConstants& cc,
                                  const ControlVec& u_d, double delta);

enum class SolveStatus { Optimal, Infeasible };

struct SolveResult {
  Eigen::VectorXd u_bar;  // [u; 1; s]
  SolveStatus status = SolveStatus::Infeasible;
  int iterations = 0;
  double objective = 0.0;
};

/// Primal barrier path-following on the t-eliminated program. Certifies the
/// objective to a duality gap below 1e-9 relative; throws SolverStall at the
/// iteration cap. delta = 0 short-circuits to the halfspace projection.
SolveResult solve(const ConvexSafetyProgram& program);

/// Chance-constraint left side (the deterministic equivalent) at control u.
double constraint_value(const PosteriorBlocks& blocks, const ConstraintConstants& cc,
                        const ControlVec& u, double delta);

}  // namespace probf

#endif  // PROBF_SOCP_HPP
