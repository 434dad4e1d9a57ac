#include "probf/episodic.hpp"

#include <algorithm>
#include <cmath>

#include "probf/errors.hpp"
#include "probf/rng.hpp"

namespace probf {

ResidualDataset residual_label(const Trajectory& traj, const BarrierSpec& spec,
                               const ControlAffineModel& model) {
  const int n_steps = static_cast<int>(traj.controls.size());
  if (static_cast<int>(traj.states.size()) < 2 || n_steps < 1) {
    throw ContractViolation("residual_label: need at least two states with a control");
  }
  const double gamma_last = spec.hocbf_gains[spec.relative_degree - 1];
  ResidualDataset d;
  d.X.resize(model.state_dim, n_steps);
  d.U.resize(model.control_dim, n_steps);
  d.y.resize(n_steps);
  double psi_i = barrier_psi(spec, model, traj.states[0]);
  for (int i = 0; i < n_steps; ++i) {
    const double psi_next = barrier_psi(spec, model, traj.states[i + 1]);
    const auto cc = constants_for(spec, model, traj.states[i]);
    const double nominal_rate = cc.c_a.dot(traj.controls[i]) + cc.c_b - gamma_last * psi_i;
    d.X.col(i) = traj.states[i];
    d.U.col(i) = traj.controls[i];
    d.y[i] = (psi_next - psi_i) / traj.dt - nominal_rate;
    psi_i = psi_next;
  }
  return d;
}

ResidualDataset aggregate(const std::vector<ResidualDataset>& parts, int cap) {
  if (parts.empty()) throw ContractViolation("aggregate: no datasets");
  const int s = parts.front().state_dim();
  const int m = parts.front().control_dim();
  int total = 0;
  for (const auto& p : parts) {
    if (p.state_dim() != s || p.control_dim() != m) {
      throw ContractViolation("aggregate: incompatible dimensions");
    }
    total += p.n();
  }
  ResidualDataset all;
  all.X.resize(s, total);
  all.U.resize(m, total);
  all.y.resize(total);
  int at = 0;
  for (const auto& p : parts) {
    if (p.n() == 0) continue;
    all.X.middleCols(at, p.n()) = p.X;
    all.U.middleCols(at, p.n()) = p.U;
    all.y.segment(at, p.n()) = p.y;
    at += p.n();
  }
  if (cap <= 0 || total <= cap) return all;

  // uniform thinning that keeps the first and last rows
  ResidualDataset thin;
  thin.X.resize(s, cap);
  thin.U.resize(m, cap);
  thin.y.resize(cap);
  for (int k = 0; k < cap; ++k) {
    const int idx = static_cast<int>(std::llround(
        static_cast<double>(k) * static_cast<double>(total - 1) / static_cast<double>(cap - 1)));
    thin.X.col(k) = all.X.col(idx);
    thin.U.col(k) = all.U.col(idx);
    thin.y[k] = all.y[idx];
  }
  return thin;
}

MetaController nominal_filter_controller(const SystemSetup& sys) {
  const SystemSetup* s = &sys;
  return [s](double t, const StateVec& x) {
    ControlDecision dec;
    dec.has_meta = true;
    const ControlVec u_d = s->desired(t, x);
    const auto cc = constants_for(s->barrier, s->model, x);
    dec.meta.delta_used = 0.0;
    try {
      dec.u = cbf_qp(cc, u_d);
      dec.meta.feasible_at_requested_delta = true;
      dec.meta.slack = cc.c_a.dot(dec.u) + cc.c_b;
    } catch (const InfeasibleConstraint&) {
      dec.u = u_d;
      dec.meta.feasible_at_requested_delta = false;
      dec.meta.slack = cc.c_a.dot(u_d) + cc.c_b;
    }
    dec.meta.u = dec.u;
    return dec;
  };
}

ProbfStepper::ProbfStepper(const SystemSetup& sys, const GPResidualModel& gp,
                           double delta_request, BackoffSchedule schedule)
    : sys_(&sys),
      gp_(&gp),
      requested_(delta_request),
      current_request_(delta_request),
      schedule_(schedule) {}

ControlDecision ProbfStepper::operator()(double t, const StateVec& x) {
  ControlDecision dec;
  dec.has_meta = true;
  const ControlVec u_d = sys_->desired(t, x);
  const auto cc = constants_for(sys_->barrier, sys_->model, x);
  FilterResult res = probf_filter(*gp_, cc, x, u_d, current_request_, schedule_);
  if (!res.feasible_at_requested_delta) ++early_warnings_;
  if (res.delta_used < current_request_) {
    ++delta_events_;
    if (schedule_.keep_for_episode) current_request_ = res.delta_used;
  }
  // report infeasibility against the original request, not the backed-off one
  res.feasible_at_requested_delta =
      res.feasible_at_requested_delta && current_request_ == requested_;
  dec.u = res.u;
  dec.meta = res;
  return dec;
}

MetaController ProbfStepper::as_controller() {
  ProbfStepper* self = this;
  return [self](double t, const StateVec& x) { return (*self)(t, x); };
}

namespace {

StateVec sample_box(const Box& box, Rng& rng) {
  StateVec x(box.lo.size());
  for (int i = 0; i < x.size(); ++i) {
    x[i] = box.lo[i] == box.hi[i] ? box.lo[i] : rng.uniform(box.lo[i], box.hi[i]);
  }
  return x;
}

ResidualDataset subsample(const ResidualDataset& d, int stride) {
  if (stride <= 1) return d;
  const int n = (d.n() + stride - 1) / stride;
  ResidualDataset out;
  out.X.resize(d.state_dim(), n);
  out.U.resize(d.control_dim(), n);
  out.y.resize(n);
  for (int k = 0; k < n; ++k) {
    const int idx = k * stride;
    out.X.col(k) = d.X.col(idx);
    out.U.col(k) = d.U.col(idx);
    out.y[k] = d.y[idx];
  }
  return out;
}

}  // namespace

std::pair<Trajectory, ResidualDataset> collect_episode(const GPResidualModel* gp,
                                                       const SystemSetup& sys,
                                                       const EpisodeConfig& cfg,
                                                       int episode_index) {
  if (cfg.initial_region.empty()) throw ContractViolation("collect_episode: empty region");
  Rng rng = Rng(cfg.seed).fork(1000 + static_cast<std::uint64_t>(episode_index));
  const StateVec x0 = sample_box(cfg.initial_region, rng);

  Trajectory traj;
  auto run = [&](const MetaController& ctrl) {
    try {
      traj = rollout(sys.model, ctrl, x0, cfg.horizon, cfg.dt, sys.barrier.h);
    } catch (const RolloutBlowup& e) {
      traj = e.partial;  // keep what integrated cleanly
    }
  };
  if (gp == nullptr || episode_index == 0) {
    run(nominal_filter_controller(sys));
  } else {
    ProbfStepper stepper(sys, *gp, cfg.delta_request, cfg.backoff);
    run(stepper.as_controller());
  }
  ResidualDataset labels = traj.controls.empty()
                               ? ResidualDataset::empty(sys.model.state_dim,
                                                        sys.model.control_dim)
                               : subsample(residual_label(traj, sys.barrier, sys.model),
                                           cfg.label_stride);
  return {std::move(traj), std::move(labels)};
}

EpisodicResult train_episodic(const SystemSetup& sys, const EpisodeConfig& cfg) {
  if (cfg.n_episodes < 1) throw ContractViolation("train_episodic: n_episodes >= 1");
  EpisodicResult out;
  std::vector<ResidualDataset> parts;
  for (int ep = 0; ep < cfg.n_episodes; ++ep) {
    const GPResidualModel* gp = ep == 0 ? nullptr : &out.model;
    auto [traj, labels] = collect_episode(gp, sys, cfg, ep);

    EpisodeLog log;
    log.episode = ep;
    log.min_h = traj.min_h();
    log.violated = log.min_h < cfg.violation_threshold;
    for (const auto& meta : traj.filter_meta) {
      // bootstrap episode: infeasible QP steps; later: steps run below the
      // requested delta
      if (ep == 0 ? !meta.feasible_at_requested_delta
                  : meta.delta_used < cfg.delta_request) {
        ++log.delta_events;
      }
    }
    out.train_trajectories.push_back(std::move(traj));
    parts.push_back(std::move(labels));

    ResidualDataset agg = aggregate(parts, cfg.dataset_cap);
    log.n_points = agg.n();
    try {
      FitConfig fit = cfg.fit;
      fit.seed = Rng(cfg.seed).fork(500 + static_cast<std::uint64_t>(ep)).next_u64();
      fit.mode = cfg.mode;
      // warm-started refits: one descent from the carried-over optimum
      const KernelHyperparams* warm = ep > 0 ? &out.model.hp : nullptr;
      if (warm != nullptr) fit.restarts = 1;
      const auto hp = fit_hyperparams(agg, fit, warm);
      out.model = train(agg, hp, cfg.mode);
      log.mll = out.model.mll;
    } catch (const ConditioningError& e) {
      out.diverged = true;
      out.divergence_reason = e.what();
      out.logs.push_back(log);
      return out;
    }
    out.logs.push_back(log);
  }
  return out;
}

}  // namespace probf
