#include "probf/socp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "probf/errors.hpp"
#include "probf/stats.hpp"

namespace probf {

double delta_from_epsilon(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw ContractViolation("delta_from_epsilon: eps must lie in (0,1)");
  }
  return norm_quantile(1.0 - eps);
}

ControlVec cbf_qp(const ConstraintConstants& cc, const ControlVec& u_d) {
  if (cc.c_a.size() != u_d.size()) throw ContractViolation("cbf_qp: dimension mismatch");
  const double margin = cc.c_a.dot(u_d) + cc.c_b;
  if (margin >= 0.0) return u_d;
  const double na2 = cc.c_a.squaredNorm();
  if (na2 == 0.0) {
    throw InfeasibleConstraint("cbf_qp: control-independent constraint violated");
  }
  return u_d - cc.c_a * (margin / na2);
}

namespace {

/// Cholesky factor R (upper triangular, R'R = A + jitter I) of the augmented
/// covariance; identically-zero covariance maps to R = 0 so the cone
/// degenerates to s >= 0 exactly.
Eigen::MatrixXd cone_factor(const Eigen::MatrixXd& aug) {
  const int n = static_cast<int>(aug.rows());
  const double amax = aug.cwiseAbs().maxCoeff();
  if (amax <= 1e-300) return Eigen::MatrixXd::Zero(n, n);
  const double scale = std::max(aug.trace() / n, amax * 1e-3);
  double level = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::MatrixXd Aj = aug;
    if (level > 0.0) Aj.diagonal().array() += level * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(Aj);
    if (llt.info() == Eigen::Success) {
      return Eigen::MatrixXd(llt.matrixU());
    }
    level = level == 0.0 ? 1e-12 : level * 10.0;
    if (level > 1e-2) break;
  }
  throw ConditioningError("build_program: augmented covariance not PSD within jitter budget",
                          1e-2 * scale);
}

}  // namespace

ConvexSafetyProgram build_program(const PosteriorBlocks& blocks, const ConstraintConstants& cc,
                                  const ControlVec& u_d, double delta) {
  if (delta < 0.0) throw ContractViolation("build_program: delta must be non-negative");
  const int m = static_cast<int>(u_d.size());
  if (blocks.a_mean.size() != m || cc.c_a.size() != m) {
    throw ContractViolation("build_program: dimension mismatch");
  }
  const int n = m + 2;
  ConvexSafetyProgram prog;
  prog.u_d = u_d;

  prog.Q = Eigen::MatrixXd::Zero(n, n);
  prog.Q.topLeftCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
  prog.Q.block(0, m, m, 1) = -u_d;
  prog.Q.block(m, 0, 1, m) = -u_d.transpose();
  prog.Q(m, m) = u_d.squaredNorm();

  Eigen::MatrixXd aug(m + 1, m + 1);
  aug.topLeftCorner(m, m) = blocks.sigma_a;
  aug.block(0, m, m, 1) = blocks.sigma_ab;
  aug.block(m, 0, 1, m) = blocks.sigma_ab.transpose();
  aug(m, m) = blocks.sigma_b2;
  prog.Sigma_bar = Eigen::MatrixXd::Zero(n, n);
  prog.Sigma_bar.topLeftCorner(m + 1, m + 1) = cone_factor(aug);

  prog.c = Eigen::VectorXd::Zero(n);
  prog.c[n - 1] = 1.0;

  prog.C = Eigen::MatrixXd::Zero(2, n);
  prog.C.row(0).head(m) = -(blocks.a_mean + cc.c_a).transpose();
  prog.C(0, m) = -(blocks.b_mean + cc.c_b);
  prog.C(0, n - 1) = delta;
  prog.C(1, n - 1) = -1.0;
  prog.d = Eigen::VectorXd::Zero(2);

  prog.D = Eigen::VectorXd::Zero(n);
  prog.D[m] = 1.0;
  prog.f = -1.0;
  return prog;
}

double constraint_value(const PosteriorBlocks& blocks, const ConstraintConstants& cc,
                        const ControlVec& u, double delta) {
  const double mean_part = (blocks.a_mean + cc.c_a).dot(u) + blocks.b_mean + cc.c_b;
  const double var = std::max(
      u.dot(blocks.sigma_a * u) + 2.0 * blocks.sigma_ab.dot(u) + blocks.sigma_b2, 0.0);
  return mean_part - delta * std::sqrt(var);
}

namespace {

struct Reduced {
  // program with t pinned: variables w = (u, s)
  int m;
  Eigen::MatrixXd Ru;    // (m+1) x m, state columns of the cone factor
  Eigen::VectorXd rt;    // (m+1), t column
  Eigen::VectorXd a;     // effective linear coefficient
  double b;              // effective constant
  double delta;
  ControlVec u_d;
};

Reduced reduce(const ConvexSafetyProgram& p) {
  Reduced r;
  r.m = p.control_dim();
  const auto R = p.Sigma_bar.topLeftCorner(r.m + 1, r.m + 1);
  r.Ru = R.leftCols(r.m);
  r.rt = R.col(r.m);
  r.a = p.a_eff();
  r.b = p.b_eff();
  r.delta = p.delta();
  r.u_d = p.u_d;
  return r;
}

double margin_of(const Reduced& r, const Eigen::VectorXd& u) {
  return r.a.dot(u) + r.b - r.delta * (r.Ru * u + r.rt).norm();
}

/// Maximize the concave margin a'u + b - delta ||Ru u + rt|| by damped
/// Newton; the maximizer seeds the barrier method and certifies
/// infeasibility when the best margin is non-positive.
struct MarginMax {
  Eigen::VectorXd u;
  double value;
  int iterations;
};

MarginMax maximize_margin(const Reduced& r) {
  const int m = r.m;
  Eigen::VectorXd u = r.u_d;
  double best = margin_of(r, u);
  Eigen::VectorXd best_u = u;
  int it = 0;
  const double scale = std::abs(r.b) + r.a.norm() * (1.0 + r.u_d.norm()) + 1.0;
  for (; it < 80; ++it) {
    const Eigen::VectorXd z = r.Ru * u + r.rt;
    const double zn = z.norm();
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    if (zn > 1e-14) {
      grad = r.a - r.delta * (r.Ru.transpose() * z) / zn;
      hess = -(r.delta / zn) *
             (r.Ru.transpose() * r.Ru -
              (r.Ru.transpose() * z) * (z.transpose() * r.Ru) / (zn * zn));
    } else {
      grad = r.a;
      hess = Eigen::MatrixXd::Zero(m, m);
    }
    if (grad.norm() < 1e-13 * scale) break;
    Eigen::MatrixXd Hreg = -hess;
    Hreg.diagonal().array() += 1e-10 * scale + 1e-12;
    Eigen::VectorXd step = Hreg.ldlt().solve(grad);
    if (!step.allFinite() || step.norm() == 0.0) step = grad;
    // backtracking ascent
    double alpha = 1.0;
    bool moved = false;
    const double cur = margin_of(r, u);
    for (int bt = 0; bt < 40; ++bt) {
      const Eigen::VectorXd trial = u + alpha * step;
      const double val = margin_of(r, trial);
      if (val > cur + 1e-16) {
        u = trial;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;
    const double val = margin_of(r, u);
    if (val > best) {
      best = val;
      best_u = u;
    }
    if (best > 0.1 * scale) break;  // comfortably feasible, no need to polish
  }
  return {best_u, best, it};
}

struct BarrierState {
  Eigen::VectorXd w;  // (u, s)
  double q, g1, g2;
};

void eval_constraints(const Reduced& r, const Eigen::VectorXd& w, BarrierState& st) {
  const int m = r.m;
  const Eigen::VectorXd u = w.head(m);
  const double s = w[m];
  const Eigen::VectorXd z = r.Ru * u + r.rt;
  st.q = s * s - z.squaredNorm();
  st.g1 = r.a.dot(u) + r.b - r.delta * s;
  st.g2 = s;
}


/// Boundary point of the feasible set on the segment from the infeasible u_d
/// to a strictly feasible u_f; the margin is concave along the segment, so
/// the crossing is unique.
Eigen::VectorXd bisect_boundary(const Reduced& r, const Eigen::VectorXd& u_feas) {
  double lo = 0.0, hi = 1.0;  // margin(u_d) < 0 <= margin(u_feas)
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    const Eigen::VectorXd u = r.u_d + mid * (u_feas - r.u_d);
    (margin_of(r, u) < 0.0 ? lo : hi) = mid;
  }
  return r.u_d + hi * (u_feas - r.u_d);
}

/// Newton on the projection KKT system 2(u - u_d) = lambda grad phi,
/// phi(u) = 0. The feasible set is convex, so any converged KKT point with
/// lambda >= 0 is the unique projection. Returns true on convergence.
bool kkt_newton(const Reduced& r, Eigen::VectorXd& u, int& iterations) {
  const int m = r.m;
  double lambda = 0.0;
  {
    const Eigen::VectorXd z = r.Ru * u + r.rt;
    const double zn = z.norm();
    Eigen::VectorXd gphi = r.a;
    if (zn > 1e-14) gphi -= r.delta * (r.Ru.transpose() * z) / zn;
    const double denom = gphi.squaredNorm();
    if (denom > 1e-300) lambda = std::max(2.0 * (u - r.u_d).dot(gphi) / denom, 0.0);
  }
  const double tol = 1e-12 * (1.0 + r.u_d.norm() + std::abs(r.b) + r.a.norm());
  Eigen::VectorXd u_best = u;
  double best_res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 40; ++it) {
    ++iterations;
    const Eigen::VectorXd z = r.Ru * u + r.rt;
    const double zn = z.norm();
    Eigen::VectorXd gphi = r.a;
    Eigen::MatrixXd hphi = Eigen::MatrixXd::Zero(m, m);
    if (zn > 1e-14) {
      const Eigen::VectorXd rz = r.Ru.transpose() * z;
      gphi -= r.delta * rz / zn;
      hphi = -(r.delta / zn) * (r.Ru.transpose() * r.Ru - rz * rz.transpose() / (zn * zn));
    }
    Eigen::VectorXd F(m + 1);
    F.head(m) = 2.0 * (u - r.u_d) - lambda * gphi;
    F[m] = -margin_of(r, u);
    const double res = F.cwiseAbs().maxCoeff();
    if (res < best_res) {
      best_res = res;
      u_best = u;
    }
    if (res < tol) {
      u = u_best;
      return lambda >= 0.0;
    }
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m + 1, m + 1);
    J.topLeftCorner(m, m) = 2.0 * Eigen::MatrixXd::Identity(m, m) - lambda * hphi;
    J.block(0, m, m, 1) = -gphi;
    J.block(m, 0, 1, m) = -gphi.transpose();
    const Eigen::VectorXd step = J.fullPivLu().solve(-F);
    if (!step.allFinite()) break;
    // damp long extrapolations; the basin from the bisected start is good
    const double sn = step.head(m).norm();
    const double cap = 4.0 * (1.0 + (u - r.u_d).norm());
    const double scale_step = sn > cap ? cap / sn : 1.0;
    u += scale_step * step.head(m);
    lambda = std::max(lambda + scale_step * step[m], 0.0);
  }
  u = u_best;
  return best_res < 1e3 * tol;  // near-converged still beats the barrier path
}

}  // namespace

SolveResult solve(const ConvexSafetyProgram& program) {
  const Reduced r = reduce(program);
  const int m = r.m;
  SolveResult out;

  // delta = 0: the cone no longer couples into the chance row; the optimum
  // is the plain halfspace projection with s at its minimal feasible value.
  if (r.delta == 0.0) {
    ConstraintConstants eff;
    eff.c_a = r.a;
    eff.c_b = r.b;
    ControlVec u;
    try {
      u = cbf_qp(eff, r.u_d);
    } catch (const InfeasibleConstraint&) {
      out.status = SolveStatus::Infeasible;
      return out;
    }
    out.u_bar.resize(m + 2);
    out.u_bar.head(m) = u;
    out.u_bar[m] = 1.0;
    out.u_bar[m + 1] = (r.Ru * u + r.rt).norm();
    out.status = SolveStatus::Optimal;
    out.objective = (u - r.u_d).squaredNorm();
    return out;
  }

  // fast path: u_d itself satisfies the chance constraint
  if (margin_of(r, r.u_d) >= 0.0) {
    out.u_bar.resize(m + 2);
    out.u_bar.head(m) = r.u_d;
    out.u_bar[m] = 1.0;
    out.u_bar[m + 1] = (r.Ru * r.u_d + r.rt).norm();
    out.status = SolveStatus::Optimal;
    out.objective = 0.0;
    return out;
  }

  const MarginMax mm = maximize_margin(r);
  out.iterations = mm.iterations;
  const double feas_scale = std::abs(r.b) + r.a.norm() * (1.0 + r.u_d.norm()) + 1.0;
  if (mm.value <= 1e-11 * feas_scale) {
    out.status = SolveStatus::Infeasible;
    return out;
  }

  // primary path: bisect the segment u_d -> feasible point for a boundary
  // seed, then Newton on the projection KKT system
  {
    Eigen::VectorXd u = bisect_boundary(r, mm.u);
    if (kkt_newton(r, u, out.iterations) && margin_of(r, u) >= -1e-9 * feas_scale) {
      out.u_bar.resize(m + 2);
      out.u_bar.head(m) = u;
      out.u_bar[m] = 1.0;
      out.u_bar[m + 1] = std::max((r.Ru * u + r.rt).norm(), (r.a.dot(u) + r.b) / r.delta);
      out.status = SolveStatus::Optimal;
      out.objective = (u - r.u_d).squaredNorm();
      return out;
    }
  }

  // fallback: primal barrier path-following with the same KKT polish
  // strictly feasible start: s midway between the cone floor and the chance
  // ceiling at the max-margin control
  Eigen::VectorXd w(m + 1);
  w.head(m) = mm.u;
  const double zn0 = (r.Ru * mm.u + r.rt).norm();
  const double s_hi = (r.a.dot(mm.u) + r.b) / r.delta;
  w[m] = 0.5 * (zn0 + s_hi);
  if (!(w[m] > zn0 && w[m] > 0.0)) w[m] = zn0 + 0.5 * (s_hi - zn0);

  const double obj_scale = 1.0 + r.u_d.squaredNorm();
  const double nu = 4.0;  // barrier complexity: cone 2, two linear rows
  double t_b = 1.0 / obj_scale;
  const int iter_cap = 500;

  BarrierState st;
  bool gap_reached = false;
  while (!gap_reached) {
    // inner Newton on t_b * ||u - u_d||^2 + barrier
    for (int inner = 0; inner < 60; ++inner) {
      if (++out.iterations > iter_cap) {
        Eigen::VectorXd ub(m + 2);
        ub.head(m) = w.head(m);
        ub[m] = 1.0;
        ub[m + 1] = w[m];
        throw SolverStall("socp solve: iteration cap reached", ub);
      }
      eval_constraints(r, w, st);
      const Eigen::VectorXd u = w.head(m);
      const double s = w[m];
      const Eigen::VectorXd z = r.Ru * u + r.rt;

      Eigen::VectorXd grad(m + 1);
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m + 1, m + 1);
      grad.head(m) = t_b * 2.0 * (u - r.u_d);
      grad[m] = 0.0;
      hess.topLeftCorner(m, m) = t_b * 2.0 * Eigen::MatrixXd::Identity(m, m);

      // -log q
      Eigen::VectorXd gq(m + 1);
      gq.head(m) = -2.0 * (r.Ru.transpose() * z);
      gq[m] = 2.0 * s;
      Eigen::MatrixXd hq = Eigen::MatrixXd::Zero(m + 1, m + 1);
      hq.topLeftCorner(m, m) = -2.0 * (r.Ru.transpose() * r.Ru);
      hq(m, m) = 2.0;
      grad += -gq / st.q;
      hess += -hq / st.q + (gq * gq.transpose()) / (st.q * st.q);

      // -log g1
      Eigen::VectorXd g1v(m + 1);
      g1v.head(m) = r.a;
      g1v[m] = -r.delta;
      grad += -g1v / st.g1;
      hess += (g1v * g1v.transpose()) / (st.g1 * st.g1);

      // -log s
      grad[m] += -1.0 / st.g2;
      hess(m, m) += 1.0 / (st.g2 * st.g2);

      Eigen::MatrixXd hreg = hess;
      hreg.diagonal().array() += 1e-13 * hess.diagonal().cwiseAbs().maxCoeff() + 1e-300;
      const Eigen::VectorXd dw = -hreg.ldlt().solve(grad);
      const double decrement2 = -grad.dot(dw);
      if (!(decrement2 > 1e-13)) break;

      // feasibility-preserving backtracking with Armijo decrease
      const double f_cur = t_b * (u - r.u_d).squaredNorm() - std::log(st.q) - std::log(st.g1) -
                           std::log(st.g2);
      double alpha = 1.0;
      for (int bt = 0; bt < 50; ++bt) {
        const Eigen::VectorXd wt = w + alpha * dw;
        BarrierState stt;
        eval_constraints(r, wt, stt);
        if (stt.q > 0.0 && stt.g1 > 0.0 && stt.g2 > 0.0) {
          const double f_new = t_b * (wt.head(m) - r.u_d).squaredNorm() - std::log(stt.q) -
                               std::log(stt.g1) - std::log(stt.g2);
          if (f_new <= f_cur - 0.25 * alpha * decrement2) {
            w = wt;
            break;
          }
        }
        alpha *= 0.5;
        if (bt == 49) alpha = 0.0;
      }
      if (alpha == 0.0) break;
      if (decrement2 * 0.5 < 1e-13) break;
    }
    if (nu / t_b <= 1e-9 * obj_scale) gap_reached = true;
    t_b *= 10.0;
  }

  // KKT polish on the active-constraint manifold: the projection of an
  // infeasible u_d sits on margin(u) = 0 with 2(u - u_d) = lambda grad margin.
  {
    Eigen::VectorXd u = w.head(m);
    double lambda = 0.0;
    {
      const Eigen::VectorXd z = r.Ru * u + r.rt;
      const double zn = z.norm();
      Eigen::VectorXd gphi = r.a;
      if (zn > 1e-14) gphi -= r.delta * (r.Ru.transpose() * z) / zn;
      const double denom = gphi.squaredNorm();
      if (denom > 1e-300) lambda = std::max(2.0 * (u - r.u_d).dot(gphi) / denom, 0.0);
    }
    Eigen::VectorXd u_best = u;
    double best_res = std::numeric_limits<double>::infinity();
    for (int itp = 0; itp < 25; ++itp) {
      const Eigen::VectorXd z = r.Ru * u + r.rt;
      const double zn = z.norm();
      Eigen::VectorXd gphi = r.a;
      Eigen::MatrixXd hphi = Eigen::MatrixXd::Zero(m, m);
      if (zn > 1e-14) {
        const Eigen::VectorXd rz = r.Ru.transpose() * z;
        gphi -= r.delta * rz / zn;
        hphi = -(r.delta / zn) * (r.Ru.transpose() * r.Ru - rz * rz.transpose() / (zn * zn));
      }
      const double phi = margin_of(r, u);
      Eigen::VectorXd F(m + 1);
      F.head(m) = 2.0 * (u - r.u_d) - lambda * gphi;
      F[m] = -phi;
      const double res = F.cwiseAbs().maxCoeff();
      if (res < best_res) {
        best_res = res;
        u_best = u;
      }
      if (res < 1e-12 * (1.0 + r.u_d.norm() + std::abs(r.b))) break;
      Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m + 1, m + 1);
      J.topLeftCorner(m, m) = 2.0 * Eigen::MatrixXd::Identity(m, m) - lambda * hphi;
      J.block(0, m, m, 1) = -gphi;
      J.block(m, 0, 1, m) = -gphi.transpose();
      const Eigen::VectorXd step = J.fullPivLu().solve(-F);
      if (!step.allFinite()) break;
      u += step.head(m);
      lambda = std::max(lambda + step[m], 0.0);
      ++out.iterations;
    }
    // accept the polished point only if it actually tightened the KKT system
    const double phi_best = margin_of(r, u_best);
    if (std::abs(phi_best) <= 1e-9 * (1.0 + std::abs(r.b) + r.a.norm() * u_best.norm()) &&
        (u_best - r.u_d).squaredNorm() <= (w.head(m) - r.u_d).squaredNorm() + 1e-9 * obj_scale) {
      w.head(m) = u_best;
      w[m] = std::max((r.Ru * u_best + r.rt).norm(), (r.a.dot(u_best) + r.b) / r.delta);
    }
  }

  out.u_bar.resize(m + 2);
  out.u_bar.head(m) = w.head(m);
  out.u_bar[m] = 1.0;
  out.u_bar[m + 1] = w[m];
  out.status = SolveStatus::Optimal;
  out.objective = (w.head(m) - r.u_d).squaredNorm();
  return out;
}

}  // namespace probf
