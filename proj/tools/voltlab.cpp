#include <cmath>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "voltlab/errors.hpp"
#include "voltlab/grid.hpp"
#include "voltlab/runner.hpp"
#include "voltlab/scenario_config.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kIoError = 3;

void print_summary(const voltlab::RunSummary& s) {
  std::cout << "steps " << s.steps << "  violation_steps " << s.violation_steps << "  max|v-1| "
            << s.max_abs_deviation << "  mean_objective " << s.mean_objective;
  if (s.divergence_step) std::cout << "  diverged at step " << *s.divergence_step;
  std::cout << '\n';
}

void print_eval(const voltlab::EvalReport& r) {
  std::cout << "episodes " << r.episodes.size() << "  mean_objective " << r.mean_objective
            << "  episodes_with_violation " << r.episodes_with_violation << "  sign_change_interval "
            << r.sign_change_interval << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volt/VAr attack simulation harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, grid_path;
  std::uint64_t seed = 0;
  int episodes = 10;

  auto* run = app.add_subcommand("run", "run a scenario and write trace.csv and summary.json");
  run->add_option("--config", config_path, "scenario config")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the config seed");
  auto* out_opt = run->add_option("--out", out_dir, "override the output directory");

  auto* train = app.add_subcommand("train", "train the learned attacker (s3)");
  train->add_option("--config", config_path, "scenario config")->required();

  auto* eval = app.add_subcommand("eval", "greedy rollouts of a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--config", config_path, "scenario config")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes")->required();

  auto* vg = app.add_subcommand("validate-grid", "check a grid file");
  vg->add_option("file", grid_path, "grid file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*vg) {
      const voltlab::Grid grid = voltlab::load_grid_file(grid_path);
      std::cout << grid.name() << ": " << grid.bus_count() << " buses, " << grid.branches().size()
                << " branches, " << grid.units().size() << " units\n";
      return kOk;
    }
    voltlab::ScenarioConfig config = voltlab::load_config(config_path);
    if (*run) {
      if (*seed_opt) config.seed = seed;
      if (*out_opt) config.output_dir = out_dir;
      print_summary(voltlab::run_scenario(config));
    } else if (*train) {
      const auto res = voltlab::train_scenario(config, &std::cout);
      std::cout << "trained " << res.log.size() << " episodes; policy written to "
                << (config.output_dir / "policy.ckpt").string() << '\n';
    } else if (*eval) {
      print_eval(voltlab::evaluate_checkpoint(checkpoint, config, episodes));
    }
  } catch (const voltlab::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const voltlab::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const voltlab::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}
