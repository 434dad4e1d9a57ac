#include "probf/gp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "probf/errors.hpp"
#include "probf/rng.hpp"

namespace probf {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

double mll_from_factor(const Eigen::MatrixXd& L, const Eigen::VectorXd& alpha,
                       const Eigen::VectorXd& y) {
  const int n = static_cast<int>(y.size());
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(L(i, i));
  return -0.5 * y.dot(alpha) - logdet - 0.5 * n * kLog2Pi;
}
}  // namespace

JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  const double trace_scale = n > 0 ? std::max(A.trace() / n, 0.0) : 0.0;
  const double scale = trace_scale > 0.0 ? trace_scale : 1.0;
  double level = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd Aj = A;
    if (level > 0.0) Aj.diagonal().array() += level * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(Aj);
    if (llt.info() == Eigen::Success) {
      JitteredCholesky out;
      out.L = llt.matrixL();
      out.jitter = level * scale;
      return out;
    }
    level = level == 0.0 ? 1e-8 : level * 10.0;
    if (level > 1e-2) break;
  }
  throw ConditioningError("cholesky_with_jitter: factorization failed up to jitter 1e-2",
                          1e-2 * scale);
}

double log_marginal_likelihood(const ResidualDataset& data, const KernelHyperparams& hp,
                               Exec mode) {
  if (data.n() < 1) throw ContractViolation("log_marginal_likelihood: empty dataset");
  GramBuilder builder(data.X, data.U, mode);
  Eigen::MatrixXd A = builder.gram(hp);
  A.diagonal().array() += hp.noise_var;
  const auto chol = cholesky_with_jitter(A);
  const Eigen::VectorXd alpha = chol.L.transpose().triangularView<Eigen::Upper>().solve(
      chol.L.triangularView<Eigen::Lower>().solve(data.y));
  return mll_from_factor(chol.L, alpha, data.y);
}

KernelHyperparams initial_hyperparams(const ResidualDataset& data) {
  const int s = data.state_dim();
  const int m = data.control_dim();
  const int n = data.n();
  KernelHyperparams hp;
  hp.kb.lengthscales.resize(s);
  Eigen::VectorXd ells(s);
  for (int d = 0; d < s; ++d) {
    double sd = 0.0;
    if (n > 1) {
      const double mean = data.X.row(d).mean();
      sd = std::sqrt((data.X.row(d).array() - mean).square().sum() / (n - 1));
    }
    ells[d] = std::max(sd, 1e-3);
  }
  double var_y = 1.0;
  if (n > 1) {
    const double mean = data.y.mean();
    var_y = std::max((data.y.array() - mean).square().sum() / (n - 1), 1e-12);
  }
  hp.kb.lengthscales = ells;
  hp.kb.signal_var = 0.5 * var_y;
  hp.ka.resize(m);
  for (int j = 0; j < m; ++j) {
    hp.ka[j].lengthscales = ells;
    double rms2 = 1.0;
    if (n > 0) rms2 = std::max(data.U.row(j).array().square().mean(), 1e-6);
    hp.ka[j].signal_var = 0.5 * var_y / (std::max(m, 1) * rms2);
  }
  hp.noise_var = std::max(1e-8, 1e-2 * var_y);
  return hp;
}

namespace {

struct MllEval {
  double value;
  Eigen::VectorXd grad;  // d mll / d log-params
};

MllEval eval_mll_and_grad(const GramBuilder& builder, const Eigen::VectorXd& y,
                          const KernelHyperparams& hp) {
  const auto pieces = builder.gram_with_pieces(hp);
  Eigen::MatrixXd A = pieces.K;
  A.diagonal().array() += hp.noise_var;
  const auto chol = cholesky_with_jitter(A);
  const int n = static_cast<int>(y.size());
  const Eigen::VectorXd alpha = chol.L.transpose().triangularView<Eigen::Upper>().solve(
      chol.L.triangularView<Eigen::Lower>().solve(y));
  MllEval out;
  out.value = mll_from_factor(chol.L, alpha, y);
  Eigen::MatrixXd Ainv = chol.L.transpose().triangularView<Eigen::Upper>().solve(
      chol.L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n)));
  const Eigen::MatrixXd W = alpha * alpha.transpose() - Ainv;
  out.grad = builder.mll_gradient(hp, W, pieces);
  return out;
}

double mll_only(const GramBuilder& builder, const Eigen::VectorXd& y,
                const KernelHyperparams& hp) {
  Eigen::MatrixXd A = builder.gram(hp);
  A.diagonal().array() += hp.noise_var;
  const auto chol = cholesky_with_jitter(A);
  const Eigen::VectorXd alpha = chol.L.transpose().triangularView<Eigen::Upper>().solve(
      chol.L.triangularView<Eigen::Lower>().solve(y));
  return mll_from_factor(chol.L, alpha, y);
}

void clamp_log_params(Eigen::VectorXd& logv, const Eigen::VectorXd& center) {
  const int P = static_cast<int>(logv.size());
  for (int i = 0; i < P; ++i) logv[i] = std::clamp(logv[i], center[i] - 15.0, center[i] + 15.0);
  logv[P - 1] = std::max(logv[P - 1], std::log(1e-8));  // noise floor
}

}  // namespace

KernelHyperparams fit_hyperparams(const ResidualDataset& data, const FitConfig& cfg,
                                  const KernelHyperparams* warm_start) {
  if (data.n() < 2) throw ContractViolation("fit_hyperparams: need at least 2 points");
  const int s = data.state_dim();
  const int m = data.control_dim();
  GramBuilder builder(data.X, data.U, cfg.mode);

  const KernelHyperparams hp0 = initial_hyperparams(data);
  const Eigen::VectorXd log0 = hp0.to_log_vector();
  const int P = static_cast<int>(log0.size());

  double best_mll = mll_only(builder, data.y, hp0);
  Eigen::VectorXd best_log = log0;

  Rng rng(cfg.seed ^ 0x5f3759df9e3779b9ULL);
  const int n_restarts = std::max(cfg.restarts, 1);
  int failed_restarts = 0;
  for (int restart = 0; restart < n_restarts; ++restart) {
    Eigen::VectorXd logv = log0;
    if (restart == 0 && warm_start != nullptr) {
      logv = warm_start->to_log_vector();
      clamp_log_params(logv, log0);
    } else if (restart > 0) {
      for (int i = 0; i < P; ++i) logv[i] += 0.6 * rng.normal();
      clamp_log_params(logv, log0);
    }
    try {
      KernelHyperparams hp = KernelHyperparams::from_log_vector(s, m, logv);
      MllEval cur = eval_mll_and_grad(builder, data.y, hp);
      double step = 0.1;
      int consec_small = 0;
      Eigen::VectorXd prev_log, prev_grad;
      for (int iter = 0; iter < cfg.max_iters; ++iter) {
        if (cur.grad.lpNorm<Eigen::Infinity>() <
            cfg.grad_tol * std::max(1.0, std::abs(cur.value))) {
          break;
        }
        // Barzilai-Borwein step from the last accepted move, backtracked to
        // an actual ascent
        if (prev_log.size() > 0) {
          const Eigen::VectorXd dx = logv - prev_log;
          const Eigen::VectorXd dg = cur.grad - prev_grad;
          const double dgg = dg.squaredNorm();
          if (dgg > 1e-300) {
            const double bb = std::abs(dx.dot(dg)) / dgg;
            if (std::isfinite(bb) && bb > 1e-12) step = std::min(bb, 5.0);
          }
        }
        bool accepted = false;
        double improvement = 0.0;
        for (int bt = 0; bt < 15; ++bt) {
          Eigen::VectorXd trial = logv + step * cur.grad;
          clamp_log_params(trial, log0);
          KernelHyperparams hpt = KernelHyperparams::from_log_vector(s, m, trial);
          double val;
          try {
            val = mll_only(builder, data.y, hpt);
          } catch (const ConditioningError&) {
            step *= 0.4;
            continue;
          }
          if (val > cur.value) {
            improvement = val - cur.value;
            prev_log = logv;
            prev_grad = cur.grad;
            logv = trial;
            hp = hpt;
            cur = eval_mll_and_grad(builder, data.y, hp);
            accepted = true;
            break;
          }
          step *= 0.4;
        }
        if (!accepted) break;  // no ascent direction at any tried step
        if (improvement < cfg.improve_tol * std::max(1.0, std::abs(cur.value))) {
          if (++consec_small >= 2) break;
        } else {
          consec_small = 0;
        }
      }
      if (cur.value > best_mll) {
        best_mll = cur.value;
        best_log = logv;
      }
    } catch (const ConditioningError&) {
      ++failed_restarts;
    }
  }
  if (failed_restarts == n_restarts) {
    throw ConditioningError("fit_hyperparams: every restart failed factorization", 1e-2);
  }
  return KernelHyperparams::from_log_vector(s, m, best_log);
}

GPResidualModel train(const ResidualDataset& data, const KernelHyperparams& hp, Exec mode) {
  GPResidualModel model;
  model.hp = hp;
  model.data = data;
  if (data.n() == 0) return model;
  GramBuilder builder(data.X, data.U, mode);
  Eigen::MatrixXd A = builder.gram(hp);
  A.diagonal().array() += hp.noise_var;
  const auto chol = cholesky_with_jitter(A);
  model.L = chol.L;
  model.jitter = chol.jitter;
  model.alpha = chol.L.transpose().triangularView<Eigen::Upper>().solve(
      chol.L.triangularView<Eigen::Lower>().solve(data.y));
  model.mll = mll_from_factor(model.L, model.alpha, data.y);
  return model;
}

PosteriorBlocks posterior_blocks(const GPResidualModel& model, const StateVec& x_star) {
  const int m = model.hp.control_dim();
  const int n = model.data.n();
  if (x_star.size() != model.hp.state_dim()) {
    throw ContractViolation("posterior_blocks: state dimension mismatch");
  }
  PosteriorBlocks out;
  out.a_mean = Eigen::VectorXd::Zero(m);
  out.sigma_a = Eigen::MatrixXd::Zero(m, m);
  out.sigma_ab = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < m; ++j) out.sigma_a(j, j) = model.hp.ka[j].signal_var;
  out.sigma_b2 = model.hp.kb.signal_var;
  if (n == 0) return out;

  // M = [K~_a ; k~_b^T], rows j: k_{a,j}(x*, x_i) u_{i,j}; last row k_b(x*, x_i)
  Eigen::MatrixXd M(m + 1, n);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd xi = model.data.X.col(i);
    for (int j = 0; j < m; ++j) {
      M(j, i) = matern52(x_star, xi, model.hp.ka[j].lengthscales, model.hp.ka[j].signal_var) *
                model.data.U(j, i);
    }
    M(m, i) = matern52(x_star, xi, model.hp.kb.lengthscales, model.hp.kb.signal_var);
  }
  out.a_mean = M.topRows(m) * model.alpha;
  out.b_mean = M.row(m).dot(model.alpha);

  const Eigen::MatrixXd V = model.L.transpose().triangularView<Eigen::Upper>().solve(
      model.L.triangularView<Eigen::Lower>().solve(M.transpose()));
  const Eigen::MatrixXd C = M * V;  // (m+1) x (m+1)
  out.sigma_a -= C.topLeftCorner(m, m);
  out.sigma_ab = -C.topRightCorner(m, 1);
  out.sigma_b2 -= C(m, m);
  // exact symmetry for downstream factorization
  out.sigma_a = 0.5 * (out.sigma_a + out.sigma_a.transpose()).eval();
  return out;
}

std::pair<double, double> predict_from_blocks(const PosteriorBlocks& blocks,
                                              const ControlVec& u_star, double prior_var_scale) {
  const double mu = blocks.a_mean.dot(u_star) + blocks.b_mean;
  double var = u_star.dot(blocks.sigma_a * u_star) + 2.0 * blocks.sigma_ab.dot(u_star) +
               blocks.sigma_b2;
  if (var < 0.0) {
    // round-off only; anything bigger indicates a broken posterior
    if (var < -1e-8 * std::max(1.0, prior_var_scale)) {
      throw ContractViolation("posterior variance clamp exceeds round-off tolerance");
    }
    var = 0.0;
  }
  return {mu, var};
}

std::pair<double, double> posterior_predict(const GPResidualModel& model, const StateVec& x_star,
                                            const ControlVec& u_star) {
  if (u_star.size() != model.hp.control_dim()) {
    throw ContractViolation("posterior_predict: control dimension mismatch");
  }
  const PosteriorBlocks blocks = posterior_blocks(model, x_star);
  double prior_var = model.hp.kb.signal_var;
  for (int j = 0; j < model.hp.control_dim(); ++j) {
    prior_var += model.hp.ka[j].signal_var * u_star[j] * u_star[j];
  }
  return predict_from_blocks(blocks, u_star, prior_var);
}

}  // namespace probf
