#ifndef PROBF_EPISODIC_HPP
#define PROBF_EPISODIC_HPP

#include <string>
#include <utility>
#include <vector>

#include "probf/barrier.hpp"
#include "probf/dynamics.hpp"
#include "probf/filter.hpp"
#include "probf/gp.hpp"

namespace probf {

/// Axis-aligned box; lo == hi pins a coordinate.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  bool empty() const { return lo.size() == 0; }
};

/// A platform wired for experiments: plant, barrier, and the desired
/// (goal-reaching) controller the filter projects.
struct SystemSetup {
  std::string name;
  ControlAffineModel model;
  BarrierSpec barrier;
  Controller desired;
};

struct EpisodeConfig {
  int n_episodes = 5;
  Box initial_region;
  double dt = 0.01;
  double horizon = 10.0;
  double delta_request = 1.0;
  BackoffSchedule backoff;
  std::uint64_t seed = 0;
  int label_stride = 5;
  int dataset_cap = 600;
  double violation_threshold = -0.05;
  FitConfig fit;
  Exec mode = Exec::Parallel;
};

struct EpisodeLog {
  int episode = 0;
  int n_points = 0;
  double mll = 0.0;
  double min_h = 0.0;
  bool violated = false;
  int delta_events = 0;
};

struct EpisodicResult {
  GPResidualModel model;
  std::vector<EpisodeLog> logs;
  std::vector<Trajectory> train_trajectories;
  bool diverged = false;
  std::string divergence_reason;
};

/// Discrete-time residual labels along a trajectory: the finite-difference
/// rate of the final chain stage minus the nominal rate (class-K term
/// removed), one label per step, inputs (x_i, u_i).
ResidualDataset residual_label(const Trajectory& traj, const BarrierSpec& spec,
                               const ControlAffineModel& model);

/// Order-preserving concatenation; cap > 0 thins uniformly keeping the first
/// and last rows.
ResidualDataset aggregate(const std::vector<ResidualDataset>& parts, int cap = -1);

/// Nominal-constants safety filter around the desired controller (the
/// episode-0 bootstrap; also the mismatch-failure baseline).
MetaController nominal_filter_controller(const SystemSetup& sys);

/// ProBF filter around the desired controller with per-episode delta state:
/// when keep_for_episode is set, a backed-off delta sticks for the rest of
/// the episode. delta_events counts the backoffs; early_warnings counts the
/// steps flagged infeasible at the requested delta.
class ProbfStepper {
public:
  ProbfStepper(const SystemSetup& sys, const GPResidualModel& gp, double delta_request,
               BackoffSchedule schedule);
  ControlDecision operator()(double t, const StateVec& x);
  MetaController as_controller();  // shares this stepper's state
  int delta_events() const { return delta_events_; }
  int early_warnings() const { return early_warnings_; }
  double current_request() const { return current_request_; }

private:
  const SystemSetup* sys_;
  const GPResidualModel* gp_;
  double requested_;
  double current_request_;
  BackoffSchedule schedule_;
  int delta_events_ = 0;
  int early_warnings_ = 0;
};

/// One episode: sample x0 from the region (seeded by episode index), roll
/// out under the true dynamics with the bootstrap filter (no GP) or the
/// ProBF filter, return the trajectory plus stride-subsampled labels.
/// Integration blow-ups are recorded on the trajectory; partial data kept.
std::pair<Trajectory, ResidualDataset> collect_episode(const GPResidualModel* gp,
                                                       const SystemSetup& sys,
                                                       const EpisodeConfig& cfg,
                                                       int episode_index);

/// Full episodic loop: collect, aggregate, refit, retrain. A conditioning
/// failure marks the run diverged with the logs kept.
EpisodicResult train_episodic(const SystemSetup& sys, const EpisodeConfig& cfg);

}  // namespace probf

#endif  // PROBF_EPISODIC_HPP
