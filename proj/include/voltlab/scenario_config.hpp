#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "voltlab/agents.hpp"
#include "voltlab/grid.hpp"
#include "voltlab/powerflow.hpp"
#include "voltlab/sac.hpp"
#include "voltlab/timeseries.hpp"

namespace voltlab {

enum class ScenarioKind { kBaseline, kS1StaticAttack, kS2TimeseriesAttack, kS3LearnedAttack };

enum class AttackerMode {
  kNone,         // attacker units hold q_rel = 0
  kOscillating,  // +-1 square wave with the configured holdoff
  kZero,         // explicit all-zero action
  kLearned,      // SAC policy
};

// When the benign controllers read voltage. kPreviousStep is the control
// law's timing; kSameStep exists only as a test fixture.
enum class ControllerTiming { kPreviousStep, kSameStep };

enum class WeatherKind { kConstant, kSynthetic, kFile };

struct WeatherConfig {
  WeatherKind kind = WeatherKind::kConstant;
  double irradiance = 1000.0;  // kConstant
  DayType day_type = DayType::kSeasonalYear;
  std::uint64_t seed = 1;
  Timestamp synth_start{};  // first instant of the synthetic series
  std::filesystem::path file;
};

struct ProfileConfig {
  std::string key;
  Channel channel = Channel::kLoadP;
  std::filesystem::path file;
};

struct TrainingConfig {
  SacConfig sac;  // obs/act dims are filled in from the grid
  long train_steps = 40000;
  long warmup_steps = 2000;
  // Multiplies the objective before it enters the replay buffer.
  double reward_scale = 1.0;
  int updates_per_step = 1;
  long checkpoint_every = 10000;
  int eval_episodes = 20;
  std::uint64_t eval_seed = 2024;
};

struct ScenarioConfig {
  std::string name;
  ScenarioKind scenario = ScenarioKind::kBaseline;
  std::filesystem::path grid_file;
  int step_seconds = 900;
  long horizon = 200;
  int episode_length = 96;
  std::vector<int> attacker_buses;
  std::vector<int> controlled_buses;  // empty: units marked voltvar in the grid
  std::vector<int> sensor_buses;
  AttackerMode attacker_mode = AttackerMode::kNone;
  int holdoff = 25;
  ObjectiveParams objective;
  double v_lo = 0.95;
  double v_hi = 1.05;
  double voltvar_d = 15.0;
  double pv_active_limit = 0.9;
  Timestamp start{};
  WeatherConfig weather;
  bool consumers_connected = false;
  std::vector<ProfileConfig> profiles;
  bool terminate_on_divergence = true;
  PowerflowOptions powerflow;
  ControllerTiming controller_timing = ControllerTiming::kPreviousStep;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;
  TrainingConfig training;
};

std::string_view to_string(ScenarioKind kind);
std::string_view to_string(AttackerMode mode);

// Relative paths inside the document resolve against base_dir.
ScenarioConfig parse_config(std::string_view document, const std::filesystem::path& base_dir);
ScenarioConfig load_config(const std::filesystem::path& path);

// Checks the config against itself and the grid it names. Throws
// ValidationError.
void validate(const ScenarioConfig& config, const Grid& grid);

}  // namespace voltlab
