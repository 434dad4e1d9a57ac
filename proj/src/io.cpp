#include "probf/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "probf/errors.hpp"

namespace probf::io {

using nlohmann::json;

namespace {

Box box_from_json(const json& j) {
  Box b;
  const auto lo = j.at("lo").get<std::vector<double>>();
  const auto hi = j.at("hi").get<std::vector<double>>();
  if (lo.size() != hi.size()) throw ConfigError("region lo/hi length mismatch");
  b.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size());
  b.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size());
  return b;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("write failed for " + path);
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

json kernel_params_to_json(const KernelParams& p) {
  json j;
  j["signal_var"] = p.signal_var;
  j["lengthscales"] =
      std::vector<double>(p.lengthscales.data(), p.lengthscales.data() + p.lengthscales.size());
  return j;
}

KernelParams kernel_params_from_json(const json& j) {
  KernelParams p;
  p.signal_var = j.at("signal_var").get<double>();
  const auto ell = j.at("lengthscales").get<std::vector<double>>();
  p.lengthscales = Eigen::Map<const Eigen::VectorXd>(ell.data(), ell.size());
  return p;
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg.system = system_from_string(j.value("system", "segway"));
    cfg.episode = default_episode_config(cfg.system);
    cfg.n_runs = j.value("n_runs", cfg.n_runs);
    cfg.n_test_points = j.value("n_test_points", cfg.n_test_points);
    cfg.delta_request = j.value("delta_request", cfg.delta_request);
    cfg.violation_threshold = j.value("violation_threshold", cfg.violation_threshold);
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.parallel_runs = j.value("parallel_runs", cfg.parallel_runs);
    cfg.write_trajectories = j.value("write_trajectories", cfg.write_trajectories);
    if (j.contains("episode")) {
      const auto& e = j.at("episode");
      auto& ec = cfg.episode;
      ec.n_episodes = e.value("n_episodes", ec.n_episodes);
      ec.dt = e.value("dt", ec.dt);
      ec.horizon = e.value("horizon", ec.horizon);
      ec.label_stride = e.value("label_stride", ec.label_stride);
      ec.dataset_cap = e.value("dataset_cap", ec.dataset_cap);
      if (e.contains("initial_region")) ec.initial_region = box_from_json(e.at("initial_region"));
      if (e.contains("backoff")) {
        const auto& b = e.at("backoff");
        ec.backoff.factor = b.value("factor", ec.backoff.factor);
        ec.backoff.attempts = b.value("attempts", ec.backoff.attempts);
        ec.backoff.keep_for_episode = b.value("keep_for_episode", ec.backoff.keep_for_episode);
      }
      if (e.contains("fit")) {
        const auto& f = e.at("fit");
        ec.fit.restarts = f.value("restarts", ec.fit.restarts);
        ec.fit.max_iters = f.value("max_iters", ec.fit.max_iters);
        ec.fit.grad_tol = f.value("grad_tol", ec.fit.grad_tol);
      }
    }
    if (j.contains("barrier")) {
      const auto& b = j.at("barrier");
      if (b.contains("theta_m")) cfg.barrier.theta_m = b.at("theta_m").get<double>();
      if (b.contains("theta_e")) cfg.barrier.theta_e = b.at("theta_e").get<double>();
      if (b.contains("gamma")) cfg.barrier.gamma = b.at("gamma").get<double>();
      if (b.contains("center")) {
        cfg.barrier.center_x = b.at("center").at(0).get<double>();
        cfg.barrier.center_y = b.at("center").at(1).get<double>();
      }
      if (b.contains("radius_sq")) cfg.barrier.radius_sq = b.at("radius_sq").get<double>();
      if (b.contains("gains")) {
        cfg.barrier.gains = b.at("gains").get<std::vector<double>>();
        if (cfg.barrier.gains.size() != 4) {
          throw ConfigError("barrier.gains must have length 4");
        }
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  if (cfg.n_runs < 1 || cfg.n_test_points < 1 || cfg.episode.dt <= 0.0 ||
      cfg.episode.horizon <= 0.0 || cfg.delta_request < 0.0) {
    throw ConfigError("config values out of range");
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return config_from_json_text(read_file(path));
}

namespace {

json run_to_json(const RunRecord& r) {
  json j;
  j["seed"] = r.seed;
  j["excluded"] = r.excluded;
  if (r.excluded) j["exclude_reason"] = r.exclude_reason;
  j["violations_probf"] = r.violations_probf;
  j["violations_baseline"] = r.violations_baseline;
  j["pct_probf"] = r.pct_probf;
  j["pct_baseline"] = r.pct_baseline;
  j["test_point_hash_probf"] = r.test_point_hash_probf;
  j["test_point_hash_baseline"] = r.test_point_hash_baseline;
  j["early_warnings_probf"] = r.early_warnings_probf;
  j["early_warnings_baseline"] = r.early_warnings_baseline;
  j["min_h_probf"] = r.min_h_probf;
  j["min_h_baseline"] = r.min_h_baseline;
  json logs = json::array();
  for (const auto& l : r.episode_logs) {
    logs.push_back({{"episode", l.episode},
                    {"n_points", l.n_points},
                    {"mll", l.mll},
                    {"min_h", l.min_h},
                    {"violated", l.violated},
                    {"delta_events", l.delta_events}});
  }
  j["episodes"] = std::move(logs);
  return j;
}

}  // namespace

void save_report_json(const ExperimentReport& rep, const std::string& path) {
  json j;
  j["system"] = rep.system;
  j["n_runs"] = rep.n_runs;
  j["n_test_points"] = rep.n_test_points;
  j["delta_request"] = rep.delta_request;
  j["violation_threshold"] = rep.violation_threshold;
  j["n_included"] = rep.n_included;
  j["n_excluded"] = rep.n_excluded;
  j["mean_pct_probf"] = rep.mean_pct_probf;
  j["std_pct_probf"] = rep.std_pct_probf;
  j["mean_pct_baseline"] = rep.mean_pct_baseline;
  j["std_pct_baseline"] = rep.std_pct_baseline;
  json runs = json::array();
  for (const auto& r : rep.runs) runs.push_back(run_to_json(r));
  j["runs"] = std::move(runs);
  write_file(path, j.dump(2) + "\n");
}

void save_summary_csv(const ExperimentReport& rep, const std::string& path) {
  std::ostringstream ss;
  ss << "run,seed,method,delta,violations,pct,early_warnings,excluded\n";
  for (std::size_t i = 0; i < rep.runs.size(); ++i) {
    const auto& r = rep.runs[i];
    ss << i << "," << r.seed << ",probf," << rep.delta_request << "," << r.violations_probf
       << "," << r.pct_probf << "," << r.early_warnings_probf << "," << (r.excluded ? 1 : 0)
       << "\n";
    ss << i << "," << r.seed << ",baseline,0," << r.violations_baseline << ","
       << r.pct_baseline << "," << r.early_warnings_baseline << "," << (r.excluded ? 1 : 0)
       << "\n";
  }
  write_file(path, ss.str());
}

void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ostringstream ss;
  const int s = traj.states.empty() ? 0 : static_cast<int>(traj.states.front().size());
  const int m = traj.controls.empty() ? 0 : static_cast<int>(traj.controls.front().size());
  ss << "t";
  for (int d = 0; d < s; ++d) ss << ",x" << d;
  for (int d = 0; d < m; ++d) ss << ",u" << d;
  ss << ",h,delta_used,feasible,slack\n";
  ss << std::setprecision(17);
  for (std::size_t i = 0; i < traj.controls.size(); ++i) {
    ss << traj.times[i];
    for (int d = 0; d < s; ++d) ss << "," << traj.states[i][d];
    for (int d = 0; d < m; ++d) ss << "," << traj.controls[i][d];
    ss << "," << (i < traj.h_values.size() ? traj.h_values[i]
                                           : std::numeric_limits<double>::quiet_NaN());
    if (i < traj.filter_meta.size()) {
      const auto& fm = traj.filter_meta[i];
      ss << "," << fm.delta_used << "," << (fm.feasible_at_requested_delta ? 1 : 0) << ","
         << fm.slack;
    } else {
      ss << ",nan,1,nan";
    }
    ss << "\n";
  }
  write_file(path, ss.str());
}

void save_phase_boundary_csv(SystemKind kind, const std::string& path, int n_samples) {
  std::ostringstream ss;
  ss << std::setprecision(17);
  if (kind == SystemKind::Segway) {
    const double theta_m = 0.2617, theta_e = 0.1383;
    ss << "theta,theta_dot\n";
    for (int i = 0; i < n_samples; ++i) {
      const double t = 2.0 * M_PI * i / n_samples;
      ss << theta_e + theta_m * std::cos(t) << "," << theta_m * std::sin(t) << "\n";
    }
  } else {
    const double cx = 1.85, cy = 0.6, rr = std::sqrt(0.28);
    ss << "x,y\n";
    for (int i = 0; i < n_samples; ++i) {
      const double t = 2.0 * M_PI * i / n_samples;
      ss << cx + rr * std::cos(t) << "," << cy + rr * std::sin(t) << "\n";
    }
  }
  write_file(path, ss.str());
}

void save_episode_logs_jsonl(const std::vector<EpisodeLog>& logs, const std::string& path) {
  std::ostringstream ss;
  for (const auto& l : logs) {
    json j = {{"episode", l.episode}, {"n_points", l.n_points},   {"mll", l.mll},
              {"min_h", l.min_h},     {"violated", l.violated},   {"delta_events", l.delta_events}};
    ss << j.dump() << "\n";
  }
  write_file(path, ss.str());
}

void emit_report(const ExperimentReport& rep, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir);
  save_report_json(rep, dir + "/report.json");
  save_summary_csv(rep, dir + "/summary.csv");
  save_phase_boundary_csv(rep.system == "segway" ? SystemKind::Segway : SystemKind::Quadrotor,
                          dir + "/phase_boundary.csv");
  for (std::size_t i = 0; i < rep.runs.size(); ++i) {
    const auto& r = rep.runs[i];
    for (std::size_t k = 0; k < r.trajs_probf.size(); ++k) {
      save_trajectory_csv(r.trajs_probf[k],
                          dir + "/run" + std::to_string(i) + "_probf_test" + std::to_string(k) +
                              ".csv");
    }
    for (std::size_t k = 0; k < r.trajs_baseline.size(); ++k) {
      save_trajectory_csv(r.trajs_baseline[k], dir + "/run" + std::to_string(i) +
                                                   "_baseline_test" + std::to_string(k) + ".csv");
    }
  }
}

std::uint64_t dataset_hash(const ResidualDataset& data) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  mix(data.X.data(), sizeof(double) * data.X.size());
  mix(data.U.data(), sizeof(double) * data.U.size());
  mix(data.y.data(), sizeof(double) * data.y.size());
  return h;
}

void save_model_checkpoint(const GPResidualModel& model, const std::string& path) {
  json j;
  j["kb"] = kernel_params_to_json(model.hp.kb);
  json ka = json::array();
  for (const auto& k : model.hp.ka) ka.push_back(kernel_params_to_json(k));
  j["ka"] = std::move(ka);
  j["noise_var"] = model.hp.noise_var;
  j["X"] = matrix_to_json(model.data.X);
  j["U"] = matrix_to_json(model.data.U);
  j["y"] = std::vector<double>(model.data.y.data(), model.data.y.data() + model.data.y.size());
  j["dataset_hash"] = dataset_hash(model.data);
  j["mll"] = model.mll;
  write_file(path, j.dump() + "\n");
}

GPResidualModel load_model_checkpoint(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("checkpoint parse error: ") + e.what());
  }
  KernelHyperparams hp;
  hp.kb = kernel_params_from_json(j.at("kb"));
  for (const auto& k : j.at("ka")) hp.ka.push_back(kernel_params_from_json(k));
  hp.noise_var = j.at("noise_var").get<double>();
  ResidualDataset data;
  data.X = matrix_from_json(j.at("X"));
  data.U = matrix_from_json(j.at("U"));
  const auto y = j.at("y").get<std::vector<double>>();
  data.y = Eigen::Map<const Eigen::VectorXd>(y.data(), y.size());
  if (j.at("dataset_hash").get<std::uint64_t>() != dataset_hash(data)) {
    throw ConfigError("checkpoint dataset hash mismatch: " + path);
  }
  GPResidualModel model = train(data, hp);
  const double stored = j.at("mll").get<double>();
  if (data.n() > 0 &&
      std::abs(model.mll - stored) > 1e-9 * std::max(1.0, std::abs(stored))) {
    throw ConfigError("checkpoint mll mismatch after factorization rebuild: " + path);
  }
  return model;
}

}  // namespace probf::io
