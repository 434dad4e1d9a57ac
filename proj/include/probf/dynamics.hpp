#ifndef PROBF_DYNAMICS_HPP
#define PROBF_DYNAMICS_HPP

#include <Eigen/Core>
#include <functional>
#include <map>
#include <string>

#include "probf/dual.hpp"
#include "probf/errors.hpp"
#include "probf/types.hpp"

namespace probf {

template <class T>
using DriftFn = std::function<void(const T*, T*)>;

using D1 = Dual<double>;
using D2 = Dual<D1>;
using D3 = Dual<D2>;
using D4 = Dual<D3>;

/// The nominal drift instantiated at nested-dual scalar types. Higher-order
/// barrier chains differentiate through the drift up to four levels deep.
struct DriftJet {
  DriftFn<double> d0;
  DriftFn<D1> d1;
  DriftFn<D2> d2;
  DriftFn<D3> d3;
  DriftFn<D4> d4;

  template <class F>
  static DriftJet make(F f) {
    DriftJet j;
    j.d0 = [f](const double* x, double* dx) { f(x, dx); };
    j.d1 = [f](const D1* x, D1* dx) { f(x, dx); };
    j.d2 = [f](const D2* x, D2* dx) { f(x, dx); };
    j.d3 = [f](const D3* x, D3* dx) { f(x, dx); };
    j.d4 = [f](const D4* x, D4* dx) { f(x, dx); };
    return j;
  }
};

template <class T>
const DriftFn<T>& jet_at(const DriftJet& j);
template <>
inline const DriftFn<double>& jet_at<double>(const DriftJet& j) { return j.d0; }
template <>
inline const DriftFn<D1>& jet_at<D1>(const DriftJet& j) { return j.d1; }
template <>
inline const DriftFn<D2>& jet_at<D2>(const DriftJet& j) { return j.d2; }
template <>
inline const DriftFn<D3>& jet_at<D3>(const DriftJet& j) { return j.d3; }
template <>
inline const DriftFn<D4>& jet_at<D4>(const DriftJet& j) { return j.d4; }

/// Control-affine system xdot = f(x) + g(x) u carrying both the true and the
/// nominal parameterization. Immutable after construction; evaluation is
/// side-effect free.
struct ControlAffineModel {
  int state_dim = 0;
  int control_dim = 0;
  std::function<Eigen::VectorXd(const StateVec&)> drift;
  std::function<Eigen::MatrixXd(const StateVec&)> actuation;
  std::function<Eigen::VectorXd(const StateVec&)> nominal_drift;
  std::function<Eigen::MatrixXd(const StateVec&)> nominal_actuation;
  std::map<std::string, double> params_true;
  std::map<std::string, double> params_nominal;
  DriftJet nominal_drift_jet;  // drives higher-order barrier chains
};

enum class Plant { True, Nominal };

StateVec eval_true(const ControlAffineModel& model, const StateVec& x, const ControlVec& u);
StateVec eval_nominal(const ControlAffineModel& model, const StateVec& x, const ControlVec& u);

/// Classical RK4 step of the selected vector field; u held constant over the
/// step (zero-order hold). Throws IntegrationBlowup on non-finite values.
StateVec step_rk4(const ControlAffineModel& model, const StateVec& x, const ControlVec& u,
                  double dt, Plant which);

using Controller = std::function<ControlVec(double, const StateVec&)>;

/// Controller output with optional per-step filter bookkeeping.
struct ControlDecision {
  ControlVec u;
  FilterResult meta;
  bool has_meta = false;
};
using MetaController = std::function<ControlDecision(double, const StateVec&)>;

/// Integration blow-up with the partial trajectory attached.
class RolloutBlowup : public IntegrationBlowup {
public:
  RolloutBlowup(const std::string& what, int step_index, Trajectory partial_traj)
      : IntegrationBlowup(what, step_index), partial(std::move(partial_traj)) {}
  Trajectory partial;
};

/// Closed-loop rollout under the TRUE dynamics. When h_record is non-empty
/// its value is logged for every visited state. Controllers are total; filter
/// infeasibility is carried in the step metadata, never by aborting.
Trajectory rollout(const ControlAffineModel& model, const MetaController& controller,
                   const StateVec& x0, double horizon, double dt,
                   std::function<double(const StateVec&)> h_record = {});

Trajectory rollout(const ControlAffineModel& model, const Controller& controller,
                   const StateVec& x0, double horizon, double dt,
                   std::function<double(const StateVec&)> h_record = {});

/// Assemble a model from scalar-generic drift callables (templates over the
/// scalar type) plus plain actuation maps. The nominal drift is instantiated
/// at all dual depths for barrier-chain differentiation.
template <class FTrue, class FNom>
ControlAffineModel assemble_model(int state_dim, int control_dim, FTrue f_true, FNom f_nom,
                                  std::function<Eigen::MatrixXd(const StateVec&)> g_true,
                                  std::function<Eigen::MatrixXd(const StateVec&)> g_nom) {
  ControlAffineModel m;
  m.state_dim = state_dim;
  m.control_dim = control_dim;
  m.drift = [f_true, state_dim](const StateVec& x) {
    Eigen::VectorXd dx(state_dim);
    f_true(x.data(), dx.data());
    return dx;
  };
  m.nominal_drift = [f_nom, state_dim](const StateVec& x) {
    Eigen::VectorXd dx(state_dim);
    f_nom(x.data(), dx.data());
    return dx;
  };
  m.actuation = std::move(g_true);
  m.nominal_actuation = std::move(g_nom);
  m.nominal_drift_jet = DriftJet::make(f_nom);
  return m;
}

/// Wheeled inverted pendulum, state (p, theta, pdot, thetadot), one motor
/// command. True and nominal differ in pendulum mass and motor gain.
ControlAffineModel make_segway();

/// Planar quadrotor with gravity, state (x, y, phi, xdot, ydot, phidot),
/// controls (thrust, torque). True (m=1.8, J=1.1) vs nominal (m=1.5, J=1.3).
ControlAffineModel make_quadrotor();

/// PD command toward a position goal for the Segway.
Controller segway_pd_controller(const ControlAffineModel& model);

/// Near-hover stabilizing controller steering the quadrotor to the origin,
/// built on the NOMINAL mass/inertia.
Controller quadrotor_stabilizing_controller(const ControlAffineModel& model);

}  // namespace probf

#endif  // PROBF_DYNAMICS_HPP
