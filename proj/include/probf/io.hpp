#ifndef PROBF_IO_HPP
#define PROBF_IO_HPP

#include <string>

#include "probf/experiments.hpp"
#include "probf/gp.hpp"

namespace probf::io {

/// Experiment config from JSON; keys mirror ExperimentConfig, with
/// per-system defaults filled for anything omitted. See configs/ for the
/// documented schema.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);

void save_report_json(const ExperimentReport& rep, const std::string& path);

/// One row per run per method.
void save_summary_csv(const ExperimentReport& rep, const std::string& path);

/// Header: t,x0..x{s-1},u0..u{m-1},h,delta_used,feasible,slack; one row per
/// control step.
void save_trajectory_csv(const Trajectory& traj, const std::string& path);

/// Safe-set boundary samples for phase plots (256 points).
void save_phase_boundary_csv(SystemKind kind, const std::string& path, int n_samples = 256);

void save_episode_logs_jsonl(const std::vector<EpisodeLog>& logs, const std::string& path);

/// Everything the experiment produces: report.json, summary.csv, the phase
/// boundary file, and per-trajectory CSVs when the records carry them.
void emit_report(const ExperimentReport& rep, const std::string& dir);

std::uint64_t dataset_hash(const ResidualDataset& data);

/// Model checkpoint: hyperparameters, training data, dataset hash and the
/// training MLL. Loading rebuilds the factorization and re-verifies the MLL
/// to 1e-9.
void save_model_checkpoint(const GPResidualModel& model, const std::string& path);
GPResidualModel load_model_checkpoint(const std::string& path);

}  // namespace probf::io

#endif  // PROBF_IO_HPP
