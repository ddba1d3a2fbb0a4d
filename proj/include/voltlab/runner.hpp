#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "voltlab/grid.hpp"
#include "voltlab/sac.hpp"
#include "voltlab/scenario_config.hpp"
#include "voltlab/simulation.hpp"

namespace voltlab {

struct RunSummary {
  std::string scenario;
  std::int64_t steps = 0;
  std::int64_t violation_steps = 0;
  double max_abs_deviation = 0.0;  // converged steps only
  std::optional<std::int64_t> divergence_step;
  // Per window of 2*holdoff steps over the controlled buses.
  std::vector<double> period_peaks;
  std::vector<double> oscillation_amplitude;
  int dominant_period = 0;  // 0 when no period was detected
  double mean_objective = 0.0;
};

RunSummary summarize(std::span<const StepRecord> records, const ScenarioConfig& config,
                     std::span<const int> controlled_buses);

// Lag in [min_lag, max_lag] maximizing the autocorrelation of x. Returns 0
// for constant or too short input.
int dominant_period(std::span<const double> x, int min_lag, int max_lag);

void write_trace_header(std::ostream& out, const Grid& grid, size_t action_dim);
void write_trace_rows(std::ostream& out, std::span<const StepRecord> records, int episode);
std::string summary_to_json(const RunSummary& summary, int indent = 2);

// Attacker command for the non-learned modes.
Action scripted_action(const ScenarioConfig& config, std::int64_t step, size_t action_dim);

struct SimulationRun {
  RunSummary summary;
  std::vector<StepRecord> records;
};

// Steps a scripted scenario for config.horizon steps (or to divergence when
// configured). No file output.
SimulationRun simulate(const ScenarioConfig& config, const Grid& grid, const ScenarioInputs& inputs);

// Number of whole days in which an episode can start.
std::int64_t episode_days(const ScenarioConfig& config, const ScenarioInputs& inputs);
Timestamp episode_start(const ScenarioConfig& config, std::int64_t day);

enum class EvalPolicy { kGreedy, kRandom };

struct EvalReport {
  std::vector<RunSummary> episodes;
  std::vector<std::int64_t> start_days;
  double mean_objective = 0.0;   // mean over episodes of each episode's mean
  double objective_stddev = 0.0; // sample stddev of the per-episode means
  int episodes_with_violation = 0;
  // Steps per action sign change, pooled over episodes and attacker units.
  // Infinite when the sign never changes.
  double sign_change_interval = 0.0;
};

// Rollouts without learning updates. Episode start days come from `seed`,
// so two policies evaluated with the same seed see the same days.
EvalReport evaluate(SacState& state, const ScenarioConfig& config, const Grid& grid,
                    const ScenarioInputs& inputs, int episodes, EvalPolicy policy,
                    std::uint64_t seed, std::vector<std::vector<StepRecord>>* traces = nullptr);

double sign_change_interval(std::span<const std::vector<StepRecord>> episodes);

struct EpisodeLog {
  int episode = 0;
  std::int64_t start_day = 0;
  std::int64_t env_steps = 0;  // cumulative at episode end
  int steps = 0;
  double episode_return = 0.0;
  double mean_objective = 0.0;
  bool diverged = false;
  int violation_steps = 0;
};

struct TrainResult {
  SacState state;
  std::vector<EpisodeLog> log;
};

SacConfig learner_config(const ScenarioConfig& config, const Simulation& sim);

// SAC training loop. With out_dir set, writes periodic checkpoints, the
// final policy and returns.csv there.
TrainResult train_attacker(const ScenarioConfig& config, const Grid& grid,
                           const ScenarioInputs& inputs,
                           const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                           const std::function<void(const EpisodeLog&)>& on_episode = {});

void write_returns_log(std::ostream& out, std::span<const EpisodeLog> log);

// Loads the config's grid and inputs and validates everything.
struct LoadedScenario {
  Grid grid;
  ScenarioInputs inputs;
};
LoadedScenario load_scenario(const ScenarioConfig& config);

// File-producing entry points used by the CLI.
RunSummary run_scenario(const ScenarioConfig& config);
TrainResult train_scenario(const ScenarioConfig& config, std::ostream* progress = nullptr);
EvalReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const ScenarioConfig& config,
                               int episodes);

std::string eval_report_to_json(const EvalReport& report);

}  // namespace voltlab
