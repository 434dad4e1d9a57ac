#ifndef PROBF_TYPES_HPP
#define PROBF_TYPES_HPP

#include <Eigen/Core>
#include <vector>

namespace probf {

/// System state; 4-dim for the Segway (p, theta, pdot, thetadot), 6-dim for
/// the planar quadrotor (x, y, phi, xdot, ydot, phidot).
using StateVec = Eigen::VectorXd;

/// Control input; 1-dim motor command (Segway) or 2-dim thrust/torque
/// (quadrotor).
using ControlVec = Eigen::VectorXd;

/// Outcome of one safety-filter evaluation.
struct FilterResult {
  ControlVec u;
  double delta_used = 0.0;
  bool feasible_at_requested_delta = true;
  double slack = 0.0;  // chance-constraint left side at the solution
  int solver_iterations = 0;
};

/// Closed-loop trajectory with constant step dt. Controls are one shorter
/// than states; h_values (when a barrier is attached) carry one entry per
/// state.
struct Trajectory {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<StateVec> states;
  std::vector<ControlVec> controls;
  std::vector<double> h_values;
  std::vector<FilterResult> filter_meta;  // one per control step, may be empty
  bool blew_up = false;
  int blowup_step = -1;

  double min_h() const {
    double m = std::numeric_limits<double>::infinity();
    for (double h : h_values) m = std::min(m, h);
    return m;
  }
};

}  // namespace probf

#endif  // PROBF_TYPES_HPP
