#include "probf/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "probf/errors.hpp"
#include "probf/parallel.hpp"
#include "probf/rng.hpp"
#include "probf/stats.hpp"

namespace probf {

std::string to_string(SystemKind k) {
  return k == SystemKind::Segway ? "segway" : "quadrotor";
}

SystemKind system_from_string(const std::string& s) {
  if (s == "segway") return SystemKind::Segway;
  if (s == "quadrotor") return SystemKind::Quadrotor;
  throw ConfigError("unknown system '" + s + "' (expected segway|quadrotor)");
}

SystemSetup make_setup(SystemKind kind, const BarrierOverrides& barrier) {
  SystemSetup sys;
  if (kind == SystemKind::Segway) {
    sys.name = "segway";
    sys.model = make_segway();
    sys.barrier = segway_barrier(barrier.theta_m.value_or(0.2617),
                                 barrier.theta_e.value_or(0.1383),
                                 barrier.gamma.value_or(1.0));
    sys.desired = segway_pd_controller(sys.model);
  } else {
    sys.name = "quadrotor";
    sys.model = make_quadrotor();
    Eigen::VectorXd gains;
    if (barrier.gains.size() == 4) {
      gains = Eigen::Map<const Eigen::VectorXd>(barrier.gains.data(), 4);
    }
    sys.barrier = quadrotor_barrier(barrier.center_x.value_or(1.85),
                                    barrier.center_y.value_or(0.6),
                                    barrier.radius_sq.value_or(0.28), gains);
    sys.desired = quadrotor_stabilizing_controller(sys.model);
  }
  return sys;
}

EpisodeConfig default_episode_config(SystemKind kind) {
  EpisodeConfig cfg;
  // warm-started refits converge quickly; two starts keep the first fit honest
  cfg.fit.restarts = 2;
  cfg.fit.max_iters = 60;
  cfg.fit.improve_tol = 1e-6;
  if (kind == SystemKind::Segway) {
    cfg.n_episodes = 5;
    cfg.horizon = 10.0;
    cfg.initial_region.lo = Eigen::VectorXd(4);
    cfg.initial_region.hi = Eigen::VectorXd(4);
    cfg.initial_region.lo << -0.1, 0.1383 - 0.05, -0.05, -0.1;
    cfg.initial_region.hi << 0.1, 0.1383 + 0.05, 0.05, 0.1;
  } else {
    cfg.n_episodes = 10;
    cfg.horizon = 12.0;
    cfg.initial_region.lo = Eigen::VectorXd::Zero(6);
    cfg.initial_region.hi = Eigen::VectorXd::Zero(6);
    cfg.initial_region.lo.head(2) << 1.8, 1.8;
    cfg.initial_region.hi.head(2) << 2.2, 2.2;
  }
  return cfg;
}

std::vector<std::uint64_t> ExperimentConfig::run_seeds() const {
  if (!seeds.empty()) {
    if (static_cast<int>(seeds.size()) != n_runs) {
      throw ConfigError("explicit seed list length must equal n_runs");
    }
    return seeds;
  }
  std::vector<std::uint64_t> out(n_runs);
  Rng rng(base_seed);
  for (int i = 0; i < n_runs; ++i) out[i] = rng.fork(static_cast<std::uint64_t>(i)).next_u64();
  return out;
}

bool count_violation(const Trajectory& traj, double threshold) {
  if (traj.h_values.empty()) throw ContractViolation("count_violation: no recorded h values");
  return traj.min_h() < threshold;
}

std::uint64_t hash_states(const std::vector<StateVec>& states) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  auto mix = [&h](const unsigned char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& x : states) {
    mix(reinterpret_cast<const unsigned char*>(x.data()), sizeof(double) * x.size());
  }
  return h;
}

std::vector<StateVec> sample_test_points(const Box& region, int n, std::uint64_t seed) {
  // disjoint stream id so test points never collide with training draws
  Rng rng = Rng(seed).fork(0xfeed5eedULL);
  std::vector<StateVec> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    StateVec x(region.lo.size());
    for (int d = 0; d < x.size(); ++d) {
      x[d] = region.lo[d] == region.hi[d] ? region.lo[d] : rng.uniform(region.lo[d], region.hi[d]);
    }
    pts.push_back(std::move(x));
  }
  return pts;
}

TestRollouts test_model(const SystemSetup& sys, const GPResidualModel& model,
                        const EpisodeConfig& cfg, const std::vector<StateVec>& points,
                        double delta_request, double violation_threshold) {
  TestRollouts out;
  out.point_hash = hash_states(points);
  for (const auto& x0 : points) {
    ProbfStepper stepper(sys, model, delta_request, cfg.backoff);
    Trajectory traj;
    try {
      traj = rollout(sys.model, stepper.as_controller(), x0, cfg.horizon, cfg.dt, sys.barrier.h);
    } catch (const RolloutBlowup& e) {
      traj = e.partial;
    }
    if (count_violation(traj, violation_threshold)) ++out.violations;
    out.early_warnings += stepper.early_warnings();
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const SystemSetup* sys_override) {
  if (cfg.n_runs < 1 || cfg.n_test_points < 1) {
    throw ConfigError("run_experiment: n_runs and n_test_points must be positive");
  }
  const auto seeds = cfg.run_seeds();
  const SystemSetup sys =
      sys_override != nullptr ? *sys_override : make_setup(cfg.system, cfg.barrier);

  ExperimentReport rep;
  rep.system = to_string(cfg.system);
  rep.n_runs = cfg.n_runs;
  rep.n_test_points = cfg.n_test_points;
  rep.delta_request = cfg.delta_request;
  rep.violation_threshold = cfg.violation_threshold;
  rep.runs.resize(cfg.n_runs);

  parallel_for_dynamic(static_cast<std::size_t>(cfg.n_runs),
                       cfg.parallel_runs ? Exec::Parallel : Exec::Serial, [&](std::size_t r) {
    RunRecord rec;
    rec.seed = seeds[r];
    EpisodeConfig ecfg = cfg.episode;
    ecfg.seed = seeds[r];
    ecfg.delta_request = cfg.delta_request;
    ecfg.violation_threshold = cfg.violation_threshold;
    const EpisodicResult trained = train_episodic(sys, ecfg);
    rec.episode_logs = trained.logs;
    if (trained.diverged) {
      rec.excluded = true;
      rec.exclude_reason = trained.divergence_reason;
      rep.runs[r] = std::move(rec);
      return;
    }
    const auto points = sample_test_points(ecfg.initial_region, cfg.n_test_points, seeds[r]);
    const auto probf_out = test_model(sys, trained.model, ecfg, points, cfg.delta_request,
                                      cfg.violation_threshold);
    const auto base_out =
        test_model(sys, trained.model, ecfg, points, 0.0, cfg.violation_threshold);
    rec.violations_probf = probf_out.violations;
    rec.violations_baseline = base_out.violations;
    rec.pct_probf = 100.0 * probf_out.violations / cfg.n_test_points;
    rec.pct_baseline = 100.0 * base_out.violations / cfg.n_test_points;
    rec.test_point_hash_probf = probf_out.point_hash;
    rec.test_point_hash_baseline = base_out.point_hash;
    rec.early_warnings_probf = probf_out.early_warnings;
    rec.early_warnings_baseline = base_out.early_warnings;
    for (const auto& t : probf_out.trajectories) rec.min_h_probf.push_back(t.min_h());
    for (const auto& t : base_out.trajectories) rec.min_h_baseline.push_back(t.min_h());
    if (cfg.write_trajectories) {
      rec.trajs_probf = probf_out.trajectories;
      rec.trajs_baseline = base_out.trajectories;
    }
    rep.runs[r] = std::move(rec);
  });

  RunningStats sp, sb;
  for (const auto& rec : rep.runs) {
    if (rec.excluded) {
      ++rep.n_excluded;
      continue;
    }
    ++rep.n_included;
    sp.add(rec.pct_probf);
    sb.add(rec.pct_baseline);
  }
  rep.mean_pct_probf = sp.mean();
  rep.std_pct_probf = sp.stddev();
  rep.mean_pct_baseline = sb.mean();
  rep.std_pct_baseline = sb.stddev();
  return rep;
}

}  // namespace probf
