#include "probf/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace probf {

namespace {

void check_dims(const ControlAffineModel& model, const StateVec& x, const ControlVec& u,
                const char* who) {
  if (x.size() != model.state_dim || u.size() != model.control_dim) {
    throw ContractViolation(std::string(who) + ": dimension mismatch (state " +
                            std::to_string(x.size()) + "/" + std::to_string(model.state_dim) +
                            ", control " + std::to_string(u.size()) + "/" +
                            std::to_string(model.control_dim) + ")");
  }
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

StateVec eval_true(const ControlAffineModel& model, const StateVec& x, const ControlVec& u) {
  check_dims(model, x, u, "eval_true");
  return model.drift(x) + model.actuation(x) * u;
}

StateVec eval_nominal(const ControlAffineModel& model, const StateVec& x, const ControlVec& u) {
  check_dims(model, x, u, "eval_nominal");
  return model.nominal_drift(x) + model.nominal_actuation(x) * u;
}

StateVec step_rk4(const ControlAffineModel& model, const StateVec& x, const ControlVec& u,
                  double dt, Plant which) {
  if (dt <= 0.0) throw ContractViolation("step_rk4: dt must be positive");
  check_dims(model, x, u, "step_rk4");
  const auto f = [&](const StateVec& s) {
    return which == Plant::True ? eval_true(model, s, u) : eval_nominal(model, s, u);
  };
  const StateVec k1 = f(x);
  const StateVec k2 = f(x + 0.5 * dt * k1);
  const StateVec k3 = f(x + 0.5 * dt * k2);
  const StateVec k4 = f(x + dt * k3);
  StateVec next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!all_finite(next) || !all_finite(k1) || !all_finite(k4)) {
    throw IntegrationBlowup("step_rk4: non-finite state", -1);
  }
  return next;
}

Trajectory rollout(const ControlAffineModel& model, const MetaController& controller,
                   const StateVec& x0, double horizon, double dt,
                   std::function<double(const StateVec&)> h_record) {
  if (dt <= 0.0) throw ContractViolation("rollout: dt must be positive");
  if (horizon < 0.0) throw ContractViolation("rollout: negative horizon");
  const int n_steps = static_cast<int>(std::llround(horizon / dt));

  Trajectory traj;
  traj.dt = dt;
  traj.times.reserve(n_steps + 1);
  traj.states.reserve(n_steps + 1);
  traj.controls.reserve(n_steps);
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  if (h_record) traj.h_values.push_back(h_record(x0));

  StateVec x = x0;
  for (int i = 0; i < n_steps; ++i) {
    const double t = i * dt;
    ControlDecision dec = controller(t, x);
    try {
      x = step_rk4(model, x, dec.u, dt, Plant::True);
    } catch (const IntegrationBlowup&) {
      traj.blew_up = true;
      traj.blowup_step = i;
      throw RolloutBlowup("rollout: integration blow-up at step " + std::to_string(i), i, traj);
    }
    traj.controls.push_back(dec.u);
    if (dec.has_meta) traj.filter_meta.push_back(dec.meta);
    traj.times.push_back((i + 1) * dt);
    traj.states.push_back(x);
    if (h_record) traj.h_values.push_back(h_record(x));
  }
  return traj;
}

Trajectory rollout(const ControlAffineModel& model, const Controller& controller,
                   const StateVec& x0, double horizon, double dt,
                   std::function<double(const StateVec&)> h_record) {
  MetaController mc = [&controller](double t, const StateVec& x) {
    ControlDecision d;
    d.u = controller(t, x);
    return d;
  };
  return rollout(model, mc, x0, horizon, dt, std::move(h_record));
}

namespace {

/// Wheeled-inverted-pendulum drift, scalar-generic. Mass matrix
///   [M+m        m l cos(th)] [pddot ]   [K u - b pdot + m l thd^2 sin(th)]
///   [m l cos(th)  m l^2    ] [thddot] = [m g l sin(th) - K u            ]
/// with the motor command driving the wheels and reacting on the body.
struct SegwayParams {
  double cart_mass;
  double pend_mass;
  double length;
  double motor_gain;
  double friction;
  double gravity;
};

template <class T>
void segway_drift_impl(const SegwayParams& P, const T* x, T* dx) {
  const T& th = x[1];
  const T& pd = x[2];
  const T& thd = x[3];
  const T s = sin(th);
  const T c = cos(th);
  const double M = P.cart_mass, m = P.pend_mass, l = P.length;
  const T m11 = T(M + m);
  const T m12 = m * l * c;
  const T m22 = T(m * l * l);
  const T det = m11 * m22 - m12 * m12;
  const T rhs1 = m * l * thd * thd * s - P.friction * pd;
  const T rhs2 = m * P.gravity * l * s;
  dx[0] = pd;
  dx[1] = thd;
  dx[2] = (m22 * rhs1 - m12 * rhs2) / det;
  dx[3] = (m11 * rhs2 - m12 * rhs1) / det;
}

Eigen::MatrixXd segway_actuation_impl(const SegwayParams& P, const StateVec& x) {
  const double c = std::cos(x[1]);
  const double M = P.cart_mass, m = P.pend_mass, l = P.length, K = P.motor_gain;
  const double m11 = M + m;
  const double m12 = m * l * c;
  const double m22 = m * l * l;
  const double det = m11 * m22 - m12 * m12;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(4, 1);
  g(2, 0) = K * (m22 + m12) / det;
  g(3, 0) = -K * (m11 + m12) / det;
  return g;
}

struct QuadrotorParams {
  double mass;
  double inertia;
  double gravity;
};

template <class T>
void quadrotor_drift_impl(const QuadrotorParams& P, const T* x, T* dx) {
  dx[0] = x[3];
  dx[1] = x[4];
  dx[2] = x[5];
  dx[3] = T(0.0);
  dx[4] = T(-P.gravity);
  dx[5] = T(0.0);
}

Eigen::MatrixXd quadrotor_actuation_impl(const QuadrotorParams& P, const StateVec& x) {
  const double phi = x[2];
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(6, 2);
  g(3, 0) = -std::sin(phi) / P.mass;
  g(4, 0) = std::cos(phi) / P.mass;
  g(5, 1) = 1.0 / P.inertia;
  return g;
}

}  // namespace

ControlAffineModel make_segway() {
  // True plant vs nominal estimate: pendulum mass and motor gain are each
  // off by roughly a sixth, the classic inaccurate-parameters setup.
  const SegwayParams true_p{1.5, 0.6, 0.8, 1.2, 0.1, 9.81};
  const SegwayParams nom_p{1.5, 0.5, 0.8, 1.0, 0.1, 9.81};

  auto f_true = [true_p](const auto* x, auto* dx) { segway_drift_impl(true_p, x, dx); };
  auto f_nom = [nom_p](const auto* x, auto* dx) { segway_drift_impl(nom_p, x, dx); };
  auto model = assemble_model(
      4, 1, f_true, f_nom,
      [true_p](const StateVec& x) { return segway_actuation_impl(true_p, x); },
      [nom_p](const StateVec& x) { return segway_actuation_impl(nom_p, x); });

  model.params_true = {{"cart_mass", true_p.cart_mass}, {"pend_mass", true_p.pend_mass},
                       {"length", true_p.length},       {"motor_gain", true_p.motor_gain},
                       {"friction", true_p.friction},   {"gravity", true_p.gravity}};
  model.params_nominal = {{"cart_mass", nom_p.cart_mass}, {"pend_mass", nom_p.pend_mass},
                          {"length", nom_p.length},       {"motor_gain", nom_p.motor_gain},
                          {"friction", nom_p.friction},   {"gravity", nom_p.gravity}};
  return model;
}

ControlAffineModel make_quadrotor() {
  const QuadrotorParams true_p{1.8, 1.1, 9.81};
  const QuadrotorParams nom_p{1.5, 1.3, 9.81};

  auto f_true = [true_p](const auto* x, auto* dx) { quadrotor_drift_impl(true_p, x, dx); };
  auto f_nom = [nom_p](const auto* x, auto* dx) { quadrotor_drift_impl(nom_p, x, dx); };
  auto model = assemble_model(
      6, 2, f_true, f_nom,
      [true_p](const StateVec& x) { return quadrotor_actuation_impl(true_p, x); },
      [nom_p](const StateVec& x) { return quadrotor_actuation_impl(nom_p, x); });

  model.params_true = {{"mass", true_p.mass}, {"inertia", true_p.inertia},
                       {"gravity", true_p.gravity}};
  model.params_nominal = {{"mass", nom_p.mass}, {"inertia", nom_p.inertia},
                          {"gravity", nom_p.gravity}};
  return model;
}

Controller segway_pd_controller(const ControlAffineModel& /*model*/) {
  // Position loop commands a lean angle, inner loop tracks it. Gains picked
  // for a brisk transient that sweeps (theta, thetadot) toward the safe-set
  // boundary without toppling the pendulum.
  const double p_goal = 2.0;
  const double theta_e = 0.1383;
  const double kp_pos = 0.4;
  const double kd_pos = 0.3;
  const double lean_limit = 0.15;
  const double kp_ang = 20.0;
  const double kd_ang = 6.0;
  return [=](double /*t*/, const StateVec& x) {
    const double lean = std::clamp(kp_pos * (p_goal - x[0]) - kd_pos * x[2], -lean_limit,
                                   lean_limit);
    const double theta_ref = theta_e + lean;
    ControlVec u(1);
    u[0] = kp_ang * (x[1] - theta_ref) + kd_ang * x[3];
    return u;
  };
}

Controller quadrotor_stabilizing_controller(const ControlAffineModel& model) {
  const double m_nom = model.params_nominal.at("mass");
  const double j_nom = model.params_nominal.at("inertia");
  const double grav = model.params_nominal.at("gravity");
  const double kp_pos = 1.2;
  const double kd_pos = 1.8;
  const double kp_att = 40.0;
  const double kd_att = 12.0;
  return [=](double /*t*/, const StateVec& x) {
    const double ax_des = -kp_pos * x[0] - kd_pos * x[3];
    const double ay_des = -kp_pos * x[1] - kd_pos * x[4];
    const double tx = ax_des;
    const double ty = ay_des + grav;
    const double thrust_acc = std::max(std::hypot(tx, ty), 0.1 * grav);
    // thrust axis (-sin phi, cos phi) aligned with the demanded acceleration
    const double phi_des = std::atan2(-tx, ty);
    ControlVec u(2);
    u[0] = std::clamp(m_nom * thrust_acc, 0.0, 3.0 * m_nom * grav);
    u[1] = j_nom * (kp_att * (phi_des - x[2]) - kd_att * x[5]);
    return u;
  };
}

}  // namespace probf
