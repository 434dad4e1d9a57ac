#include "probf/barrier.hpp"

#include <cmath>
#include <string>

namespace probf {

namespace {

constexpr int kMaxDim = 8;

template <class T>
struct BarrierJetAt;
template <>
struct BarrierJetAt<double> {
  static const ScalarFn<double>& get(const BarrierJet& j) { return j.h0; }
};
template <>
struct BarrierJetAt<D1> {
  static const ScalarFn<D1>& get(const BarrierJet& j) { return j.h1; }
};
template <>
struct BarrierJetAt<D2> {
  static const ScalarFn<D2>& get(const BarrierJet& j) { return j.h2; }
};
template <>
struct BarrierJetAt<D3> {
  static const ScalarFn<D3>& get(const BarrierJet& j) { return j.h3; }
};
template <>
struct BarrierJetAt<D4> {
  static const ScalarFn<D4>& get(const BarrierJet& j) { return j.h4; }
};

/// psi_K evaluated at scalar type T: psi_0 = h and
/// psi_{K} = grad psi_{K-1} . f_nom + gains[K-1] * psi_{K-1},
/// differentiated exactly by seeding one dual level per recursion step.
template <int K, class T>
struct ChainEval {
  static T value(const BarrierJet& h, const DriftJet& f, const double* gains, int dim,
                 const T* x) {
    using D = Dual<T>;
    T fx[kMaxDim];
    jet_at<T>(f)(x, fx);
    D xd[kMaxDim];
    for (int i = 0; i < dim; ++i) xd[i] = D(x[i]);
    T acc = T(0);
    for (int d = 0; d < dim; ++d) {
      xd[d].e = T(1);
      const D v = ChainEval<K - 1, D>::value(h, f, gains, dim, xd);
      acc += v.e * fx[d];
      xd[d].e = T(0);
    }
    return acc + gains[K - 1] * ChainEval<K - 1, T>::value(h, f, gains, dim, x);
  }
};

template <class T>
struct ChainEval<0, T> {
  static T value(const BarrierJet& h, const DriftJet&, const double*, int, const T* x) {
    return BarrierJetAt<T>::get(h)(x);
  }
};

template <class T>
T chain_value_t(int stage, const BarrierJet& h, const DriftJet& f, const double* gains, int dim,
                const T* x) {
  switch (stage) {
    case 0: return ChainEval<0, T>::value(h, f, gains, dim, x);
    case 1: return ChainEval<1, T>::value(h, f, gains, dim, x);
    case 2: return ChainEval<2, T>::value(h, f, gains, dim, x);
    case 3: return ChainEval<3, T>::value(h, f, gains, dim, x);
    default:
      throw ContractViolation("barrier chain: relative degree above 4 not supported");
  }
}

double chain_value(const BarrierSpec& spec, const ControlAffineModel& model, int stage,
                   const StateVec& x) {
  return chain_value_t<double>(stage, spec.h_jet, model.nominal_drift_jet,
                               spec.hocbf_gains.data(), model.state_dim, x.data());
}

Eigen::VectorXd chain_grad(const BarrierSpec& spec, const ControlAffineModel& model, int stage,
                           const StateVec& x) {
  const int dim = model.state_dim;
  D1 xd[kMaxDim];
  for (int i = 0; i < dim; ++i) xd[i] = D1(x[i]);
  Eigen::VectorXd g(dim);
  for (int d = 0; d < dim; ++d) {
    xd[d].e = 1.0;
    g[d] = chain_value_t<D1>(stage, spec.h_jet, model.nominal_drift_jet, spec.hocbf_gains.data(),
                             dim, xd).e;
    xd[d].e = 0.0;
  }
  return g;
}

void check_state_dim(const BarrierSpec&, const ControlAffineModel& model, const StateVec& x,
                     const char* who) {
  if (x.size() != model.state_dim) {
    throw ContractViolation(std::string(who) + ": state dimension mismatch");
  }
  if (model.state_dim > kMaxDim) {
    throw ContractViolation(std::string(who) + ": state dimension above chain limit");
  }
}

}  // namespace

BarrierSpec segway_barrier(double theta_m, double theta_e, double gamma) {
  BarrierSpec spec;
  spec.h = [theta_m, theta_e](const StateVec& x) {
    const double dth = x[1] - theta_e;
    return theta_m * theta_m - x[3] * x[3] - dth * dth;
  };
  spec.grad_h = [theta_e](const StateVec& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(4);
    g[1] = -2.0 * (x[1] - theta_e);
    g[3] = -2.0 * x[3];
    return g;
  };
  spec.alpha_gain = gamma;
  spec.relative_degree = 1;
  spec.hocbf_gains = Eigen::VectorXd::Constant(1, gamma);
  spec.h_jet = BarrierJet::make([theta_m, theta_e](const auto* x) {
    const auto dth = x[1] - theta_e;
    return theta_m * theta_m - x[3] * x[3] - dth * dth;
  });
  return spec;
}

BarrierSpec quadrotor_barrier(double cx, double cy, double r_sq, const Eigen::VectorXd& gains) {
  BarrierSpec spec;
  spec.h = [cx, cy, r_sq](const StateVec& x) {
    const double dx = x[0] - cx;
    const double dy = x[1] - cy;
    return dx * dx + dy * dy - r_sq;
  };
  spec.grad_h = [cx, cy](const StateVec& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(6);
    g[0] = 2.0 * (x[0] - cx);
    g[1] = 2.0 * (x[1] - cy);
    return g;
  };
  spec.relative_degree = 4;
  spec.hocbf_gains = gains.size() == 4 ? gains : Eigen::VectorXd::Constant(4, 8.0);
  spec.alpha_gain = spec.hocbf_gains[3];
  spec.h_jet = BarrierJet::make([cx, cy, r_sq](const auto* x) {
    const auto dx = x[0] - cx;
    const auto dy = x[1] - cy;
    return dx * dx + dy * dy - r_sq;
  });
  return spec;
}

ConstraintConstants constraint_constants(const BarrierSpec& spec, const ControlAffineModel& model,
                                         const StateVec& x) {
  if (spec.relative_degree != 1) {
    throw ContractViolation(
        "constraint_constants: relative degree != 1, use hocbf_constants");
  }
  check_state_dim(spec, model, x, "constraint_constants");
  const Eigen::VectorXd grad = spec.grad_h(x);
  ConstraintConstants cc;
  cc.c_a = (grad.transpose() * model.nominal_actuation(x)).transpose();
  cc.c_b = grad.dot(model.nominal_drift(x)) + spec.alpha_gain * spec.h(x);
  return cc;
}

ConstraintConstants hocbf_constants(const BarrierSpec& spec, const ControlAffineModel& model,
                                    const StateVec& x) {
  check_state_dim(spec, model, x, "hocbf_constants");
  const int r = spec.relative_degree;
  if (r < 1 || spec.hocbf_gains.size() != r) {
    throw ContractViolation("hocbf_constants: gains must match relative degree");
  }
  if (r >= 2) {
    // h itself must be control-free under the nominal actuation, otherwise
    // the true relative degree is 1 and the chain start is invalid.
    const Eigen::VectorXd lgh = (spec.grad_h(x).transpose() * model.nominal_actuation(x))
                                    .transpose();
    const double scale = std::max(1.0, spec.grad_h(x).cwiseAbs().maxCoeff());
    if (lgh.cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw ContractViolation(
          "hocbf_constants: control appears in the barrier derivative below the chain order");
    }
  }
  const double psi = chain_value(spec, model, r - 1, x);
  const Eigen::VectorXd grad = r == 1 ? spec.grad_h(x) : chain_grad(spec, model, r - 1, x);
  ConstraintConstants cc;
  cc.c_a = (grad.transpose() * model.nominal_actuation(x)).transpose();
  cc.c_b = grad.dot(model.nominal_drift(x)) + spec.hocbf_gains[r - 1] * psi;
  return cc;
}

ConstraintConstants constants_for(const BarrierSpec& spec, const ControlAffineModel& model,
                                  const StateVec& x) {
  return spec.relative_degree == 1 ? constraint_constants(spec, model, x)
                                   : hocbf_constants(spec, model, x);
}

double barrier_psi(const BarrierSpec& spec, const ControlAffineModel& model, const StateVec& x) {
  check_state_dim(spec, model, x, "barrier_psi");
  if (spec.relative_degree == 1) return spec.h(x);
  return chain_value(spec, model, spec.relative_degree - 1, x);
}

Eigen::VectorXd barrier_psi_grad(const BarrierSpec& spec, const ControlAffineModel& model,
                                 const StateVec& x) {
  check_state_dim(spec, model, x, "barrier_psi_grad");
  if (spec.relative_degree == 1) return spec.grad_h(x);
  return chain_grad(spec, model, spec.relative_degree - 1, x);
}

Eigen::VectorXd hocbf_chain_values(const BarrierSpec& spec, const ControlAffineModel& model,
                                   const StateVec& x) {
  check_state_dim(spec, model, x, "hocbf_chain_values");
  Eigen::VectorXd vals(spec.relative_degree);
  for (int i = 0; i < spec.relative_degree; ++i) vals[i] = chain_value(spec, model, i, x);
  return vals;
}

Eigen::VectorXd hocbf_mixed_lie_norms(const BarrierSpec& spec, const ControlAffineModel& model,
                                      const StateVec& x) {
  check_state_dim(spec, model, x, "hocbf_mixed_lie_norms");
  Eigen::VectorXd norms(spec.relative_degree);
  const Eigen::MatrixXd g_nom = model.nominal_actuation(x);
  for (int i = 0; i < spec.relative_degree; ++i) {
    const Eigen::VectorXd grad = i == 0 ? spec.grad_h(x) : chain_grad(spec, model, i, x);
    norms[i] = (grad.transpose() * g_nom).cwiseAbs().maxCoeff();
  }
  return norms;
}

double residual_truth(const BarrierSpec& spec, const ControlAffineModel& model, const StateVec& x,
                      const ControlVec& u) {
  check_state_dim(spec, model, x, "residual_truth");
  const Eigen::VectorXd grad = barrier_psi_grad(spec, model, x);
  const Eigen::VectorXd df = model.drift(x) - model.nominal_drift(x);
  const Eigen::MatrixXd dg = model.actuation(x) - model.nominal_actuation(x);
  return grad.dot(df) + grad.dot(dg * u);
}

}  // namespace probf
