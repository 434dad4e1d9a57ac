#ifndef PROBF_EXPERIMENTS_HPP
#define PROBF_EXPERIMENTS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "probf/episodic.hpp"

namespace probf {

enum class SystemKind { Segway, Quadrotor };

std::string to_string(SystemKind k);
SystemKind system_from_string(const std::string& s);

/// Config-exposed barrier parameters; unset fields keep the per-system
/// defaults. Segway uses (theta_m, theta_e, gamma); the quadrotor uses
/// (center, radius_sq, chain gains).
struct BarrierOverrides {
  std::optional<double> theta_m;
  std::optional<double> theta_e;
  std::optional<double> gamma;
  std::optional<double> center_x;
  std::optional<double> center_y;
  std::optional<double> radius_sq;
  std::vector<double> gains;  // empty = default
};

/// Fully wired platform with its per-system defaults (region, horizon,
/// episode count).
SystemSetup make_setup(SystemKind kind, const BarrierOverrides& barrier = {});
EpisodeConfig default_episode_config(SystemKind kind);

struct ExperimentConfig {
  SystemKind system = SystemKind::Segway;
  int n_runs = 10;
  int n_test_points = 10;
  double delta_request = 1.0;
  double violation_threshold = -0.05;
  std::uint64_t base_seed = 123;
  std::vector<std::uint64_t> seeds;  // optional explicit list; overrides base_seed
  std::string out_dir = "out";
  EpisodeConfig episode;
  BarrierOverrides barrier;
  bool parallel_runs = true;
  bool write_trajectories = true;

  std::vector<std::uint64_t> run_seeds() const;
};

/// Per-run outcome; excluded runs stay in the report with a reason.
struct RunRecord {
  std::uint64_t seed = 0;
  bool excluded = false;
  std::string exclude_reason;
  int violations_probf = 0;
  int violations_baseline = 0;
  double pct_probf = 0.0;
  double pct_baseline = 0.0;
  std::uint64_t test_point_hash_probf = 0;
  std::uint64_t test_point_hash_baseline = 0;
  int early_warnings_probf = 0;
  int early_warnings_baseline = 0;
  std::vector<double> min_h_probf;
  std::vector<double> min_h_baseline;
  std::vector<EpisodeLog> episode_logs;
  // test trajectories, kept only when the config asks for CSV output
  std::vector<Trajectory> trajs_probf;
  std::vector<Trajectory> trajs_baseline;
};

struct ExperimentReport {
  std::string system;
  int n_runs = 0;
  int n_test_points = 0;
  double delta_request = 1.0;
  double violation_threshold = -0.05;
  std::vector<RunRecord> runs;
  int n_included = 0;
  int n_excluded = 0;
  double mean_pct_probf = 0.0;
  double std_pct_probf = 0.0;
  double mean_pct_baseline = 0.0;
  double std_pct_baseline = 0.0;
};

/// Strict-inequality violation rule: min h < threshold anywhere.
bool count_violation(const Trajectory& traj, double threshold);

/// FNV-1a over the raw bytes of a set of states; pins the pairing of test
/// points across methods.
std::uint64_t hash_states(const std::vector<StateVec>& states);

/// Per-seed: train episodically, then test the same model at delta_request
/// (ProBF) and delta = 0 (mean baseline) on the same fresh test points.
/// sys_override substitutes the platform (e.g. a matched-parameters variant)
/// while keeping the harness.
ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const SystemSetup* sys_override = nullptr);

/// Test rollouts for an already-trained model; used by run_experiment and
/// the CLI test command.
struct TestRollouts {
  std::vector<Trajectory> trajectories;
  int violations = 0;
  int early_warnings = 0;
  std::uint64_t point_hash = 0;
};
TestRollouts test_model(const SystemSetup& sys, const GPResidualModel& model,
                        const EpisodeConfig& cfg, const std::vector<StateVec>& points,
                        double delta_request, double violation_threshold);

std::vector<StateVec> sample_test_points(const Box& region, int n, std::uint64_t seed);

}  // namespace probf

#endif  // PROBF_EXPERIMENTS_HPP
