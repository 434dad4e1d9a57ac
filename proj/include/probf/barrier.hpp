#ifndef PROBF_BARRIER_HPP
#define PROBF_BARRIER_HPP

#include <Eigen/Core>
#include <functional>

#include "probf/dynamics.hpp"
#include "probf/types.hpp"

namespace probf {

template <class T>
using ScalarFn = std::function<T(const T*)>;

/// Barrier value instantiated at nested-dual scalars for exact chain
/// differentiation.
struct BarrierJet {
  ScalarFn<double> h0;
  ScalarFn<D1> h1;
  ScalarFn<D2> h2;
  ScalarFn<D3> h3;
  ScalarFn<D4> h4;

  template <class F>
  static BarrierJet make(F f) {
    BarrierJet j;
    j.h0 = [f](const double* x) { return f(x); };
    j.h1 = [f](const D1* x) { return f(x); };
    j.h2 = [f](const D2* x) { return f(x); };
    j.h3 = [f](const D3* x) { return f(x); };
    j.h4 = [f](const D4* x) { return f(x); };
    return j;
  }
};

/// Barrier function with linear extended class-K term alpha(r) = gain * r.
/// relative_degree > 1 activates the exponential chain psi_{i+1} = psidot_i
/// + gains[i] * psi_i built along the nominal drift.
struct BarrierSpec {
  std::function<double(const StateVec&)> h;
  std::function<Eigen::VectorXd(const StateVec&)> grad_h;
  double alpha_gain = 1.0;
  int relative_degree = 1;
  Eigen::VectorXd hocbf_gains;  // length relative_degree
  BarrierJet h_jet;
};

/// Constant terms of the affine-in-u safety constraint c_a' u + c_b >= 0
/// obtained from the nominal dynamics.
struct ConstraintConstants {
  Eigen::VectorXd c_a;
  double c_b = 0.0;
};

/// Segway tip-over barrier h = theta_m^2 - thetadot^2 - (theta - theta_e)^2.
BarrierSpec segway_barrier(double theta_m = 0.2617, double theta_e = 0.1383,
                           double gamma = 1.0);

/// Quadrotor circular-obstacle barrier h = (x-cx)^2 + (y-cy)^2 - r_sq with a
/// fourth-order chain; all stage gains default to 4.
BarrierSpec quadrotor_barrier(double cx = 1.85, double cy = 0.6, double r_sq = 0.28,
                              const Eigen::VectorXd& gains = Eigen::VectorXd());

/// Relative-degree-1 constants: c_a = (grad_h g_nom)^T, c_b = grad_h f_nom +
/// gain * h. Throws ContractViolation when relative_degree != 1.
ConstraintConstants constraint_constants(const BarrierSpec& spec,
                                         const ControlAffineModel& model, const StateVec& x);

/// Chain constants for relative degree r >= 1: the final constraint is
/// psidot_{r-1} + gains[r-1] * psi_{r-1} = c_a' u + c_b >= 0 with the control
/// entering through the nominal actuation at the last stage. Throws a
/// structural ContractViolation if the barrier itself couples to the control
/// (grad_h g_nom != 0 with r >= 2).
ConstraintConstants hocbf_constants(const BarrierSpec& spec, const ControlAffineModel& model,
                                    const StateVec& x);

/// Dispatch on relative degree.
ConstraintConstants constants_for(const BarrierSpec& spec, const ControlAffineModel& model,
                                  const StateVec& x);

/// Value of the final chain stage psi_{r-1} (== h when r = 1).
double barrier_psi(const BarrierSpec& spec, const ControlAffineModel& model, const StateVec& x);

/// Gradient of the final chain stage.
Eigen::VectorXd barrier_psi_grad(const BarrierSpec& spec, const ControlAffineModel& model,
                                 const StateVec& x);

/// All chain stage values psi_0 .. psi_{r-1}.
Eigen::VectorXd hocbf_chain_values(const BarrierSpec& spec, const ControlAffineModel& model,
                                   const StateVec& x);

/// Mixed Lie-derivative magnitudes |grad psi_i . g_nom| for i = 0..r-1;
/// diagnostic for where the control actually couples into the chain.
Eigen::VectorXd hocbf_mixed_lie_norms(const BarrierSpec& spec, const ControlAffineModel& model,
                                      const StateVec& x);

/// Ground-truth residual of the constraint rate: grad psi . ((f+gu) -
/// (f_nom+g_nom u)) on the final chain stage. Validation only.
double residual_truth(const BarrierSpec& spec, const ControlAffineModel& model, const StateVec& x,
                      const ControlVec& u);

}  // namespace probf

#endif  // PROBF_BARRIER_HPP
