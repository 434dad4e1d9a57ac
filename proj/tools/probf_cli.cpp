#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "probf/experiments.hpp"
#include "probf/io.hpp"
#include "probf/validation.hpp"

namespace fs = std::filesystem;
using namespace probf;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string system = "segway";
  std::uint64_t seed = 123;
  double delta = 1.0;
  std::string out_dir = "out";
  bool have_system = false, have_seed = false, have_delta = false, have_out = false;
};

ExperimentConfig resolve_config(const CommonArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    cfg = io::load_experiment_config(args.config_path);
  } else {
    cfg.system = system_from_string(args.system);
    cfg.episode = default_episode_config(cfg.system);
  }
  if (args.have_system) {
    cfg.system = system_from_string(args.system);
    cfg.episode = default_episode_config(cfg.system);  // region/horizon follow the system
  }
  if (args.have_seed) cfg.base_seed = args.seed;
  if (args.have_delta) cfg.delta_request = args.delta;
  if (args.have_out) cfg.out_dir = args.out_dir;
  return cfg;
}

EpisodeConfig episode_for(const ExperimentConfig& cfg, std::uint64_t seed) {
  EpisodeConfig e = cfg.episode;
  e.seed = seed;
  e.delta_request = cfg.delta_request;
  e.violation_threshold = cfg.violation_threshold;
  return e;
}

int cmd_train(const CommonArgs& args) {
  const auto cfg = resolve_config(args);
  const auto sys = make_setup(cfg.system);
  const auto ecfg = episode_for(cfg, cfg.base_seed);
  const auto result = train_episodic(sys, ecfg);
  fs::create_directories(cfg.out_dir);
  io::save_episode_logs_jsonl(result.logs, cfg.out_dir + "/episodes.jsonl");
  for (std::size_t i = 0; i < result.train_trajectories.size(); ++i) {
    io::save_trajectory_csv(result.train_trajectories[i],
                            cfg.out_dir + "/train_episode" + std::to_string(i) + ".csv");
  }
  if (result.diverged) {
    std::cerr << "training diverged: " << result.divergence_reason << "\n";
    return 3;
  }
  io::save_model_checkpoint(result.model, cfg.out_dir + "/model.json");
  std::cout << "trained " << sys.name << " for " << ecfg.n_episodes << " episodes; "
            << result.model.data.n() << " points, mll " << result.model.mll << "\n"
            << "model checkpoint: " << cfg.out_dir << "/model.json\n";
  return 0;
}

int cmd_test(const CommonArgs& args, const std::string& model_path, int n_points,
             bool from_center) {
  const auto cfg = resolve_config(args);
  const auto sys = make_setup(cfg.system);
  const auto ecfg = episode_for(cfg, cfg.base_seed);

  GPResidualModel model;
  if (!model_path.empty()) {
    model = io::load_model_checkpoint(model_path);
  } else {
    std::cout << "no --model given; training first\n";
    const auto result = train_episodic(sys, ecfg);
    if (result.diverged) {
      std::cerr << "training diverged: " << result.divergence_reason << "\n";
      return 3;
    }
    model = result.model;
  }

  std::vector<StateVec> points;
  if (from_center) {
    points.push_back(0.5 * (ecfg.initial_region.lo + ecfg.initial_region.hi));
  } else {
    points = sample_test_points(ecfg.initial_region, n_points, cfg.base_seed);
  }
  const auto out = test_model(sys, model, ecfg, points, cfg.delta_request,
                              cfg.violation_threshold);
  fs::create_directories(cfg.out_dir);
  io::save_phase_boundary_csv(cfg.system, cfg.out_dir + "/phase_boundary.csv");
  for (std::size_t i = 0; i < out.trajectories.size(); ++i) {
    const auto& t = out.trajectories[i];
    io::save_trajectory_csv(t, cfg.out_dir + "/test_delta" + std::to_string(cfg.delta_request) +
                                   "_" + std::to_string(i) + ".csv");
    std::cout << "test " << i << ": min_h " << t.min_h()
              << (count_violation(t, cfg.violation_threshold) ? "  VIOLATION" : "") << "\n";
  }
  std::cout << out.violations << "/" << points.size() << " violations at delta "
            << cfg.delta_request << "\n";
  return 0;
}

int cmd_experiment(const CommonArgs& args) {
  auto cfg = resolve_config(args);
  const auto rep = run_experiment(cfg);
  io::emit_report(rep, cfg.out_dir);
  std::cout << "system " << rep.system << ": " << rep.n_included << " runs ("
            << rep.n_excluded << " excluded)\n"
            << "probf    delta=" << rep.delta_request << ": " << rep.mean_pct_probf << " +- "
            << rep.std_pct_probf << " % violations\n"
            << "baseline delta=0: " << rep.mean_pct_baseline << " +- " << rep.std_pct_baseline
            << " % violations\n"
            << "report: " << cfg.out_dir << "/report.json\n";
  return 0;
}

int cmd_validate() {
  int failures = 0;
  auto show = [&](const validation::OracleReport& r) {
    std::cout << (r.ok() ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.n_pass << "/"
              << r.n_cases << " (max err " << r.max_err << ")\n";
    if (!r.ok()) ++failures;
  };
  show(validation::run_gp_oracle_suite(25, 20240701));
  show(validation::run_mll_suite(25, 20240702));
  show(validation::run_socp_m1_suite(200, 20240703));
  show(validation::run_socp_m2_suite(200, 20240704));
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process chance-constrained safety filtering toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "JSON config file");
    sub->add_option("--system", args.system, "segway|quadrotor")
        ->check(CLI::IsMember({"segway", "quadrotor"}))
        ->each([&](const std::string&) { args.have_system = true; });
    sub->add_option("--seed", args.seed, "base seed")->each([&](const std::string&) {
      args.have_seed = true;
    });
    sub->add_option("--delta", args.delta, "requested confidence multiplier")
        ->each([&](const std::string&) { args.have_delta = true; });
    sub->add_option("--out", args.out_dir, "output directory")->each([&](const std::string&) {
      args.have_out = true;
    });
  };

  auto* train = app.add_subcommand("train", "episodic training for one seed");
  add_common(train);

  auto* test = app.add_subcommand("test", "roll out a trained model on fresh points");
  add_common(test);
  std::string model_path;
  int n_points = 10;
  bool from_center = false;
  test->add_option("--model", model_path, "model checkpoint (trains if omitted)");
  test->add_option("--n", n_points, "number of test points");
  test->add_flag("--center", from_center, "single rollout from the region center");

  auto* exp = app.add_subcommand("experiment", "full multi-seed comparison");
  add_common(exp);

  app.add_subcommand("validate", "run the GP and SOCP oracle suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
      std::cout << app.help();
      return 0;
    }
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (app.got_subcommand("train")) return cmd_train(args);
    if (app.got_subcommand("test")) return cmd_test(args, model_path, n_points, from_center);
    if (app.got_subcommand("experiment")) return cmd_experiment(args);
    if (app.got_subcommand("validate")) return cmd_validate();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ConditioningError& e) {
    std::cerr << "conditioning error: " << e.what() << "\n";
    return 3;
  } catch (const SolverStall& e) {
    std::cerr << "solver stall: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
