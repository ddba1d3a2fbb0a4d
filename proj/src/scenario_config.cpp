#include "voltlab/scenario_config.hpp"

#include <algorithm>
#include <set>

#include "voltlab/errors.hpp"
#include "voltlab/json_fields.hpp"

namespace voltlab {

using detail::FieldReader;

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kBaseline:
      return "baseline";
    case ScenarioKind::kS1StaticAttack:
      return "s1_static_attack";
    case ScenarioKind::kS2TimeseriesAttack:
      return "s2_timeseries_attack";
    case ScenarioKind::kS3LearnedAttack:
      return "s3_learned_attack";
  }
  return "baseline";
}

std::string_view to_string(AttackerMode mode) {
  switch (mode) {
    case AttackerMode::kNone:
      return "none";
    case AttackerMode::kOscillating:
      return "oscillating";
    case AttackerMode::kZero:
      return "zero";
    case AttackerMode::kLearned:
      return "learned";
  }
  return "none";
}

namespace {

ScenarioKind parse_kind(const FieldReader& f) {
  const std::string s = f.string("scenario");
  for (auto k : {ScenarioKind::kBaseline, ScenarioKind::kS1StaticAttack,
                 ScenarioKind::kS2TimeseriesAttack, ScenarioKind::kS3LearnedAttack})
    if (s == to_string(k)) return k;
  f.fail("scenario", "unknown scenario \"" + s + "\"");
}

AttackerMode default_mode(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kBaseline:
      return AttackerMode::kNone;
    case ScenarioKind::kS1StaticAttack:
    case ScenarioKind::kS2TimeseriesAttack:
      return AttackerMode::kOscillating;
    case ScenarioKind::kS3LearnedAttack:
      return AttackerMode::kLearned;
  }
  return AttackerMode::kNone;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

Timestamp timestamp_field(const FieldReader& f, const char* key) {
  try {
    return parse_timestamp(f.string(key));
  } catch (const ParseError& e) {
    f.fail(key, e.what());
  }
}

}  // namespace

ScenarioConfig parse_config(std::string_view document, const std::filesystem::path& base_dir) {
  const nlohmann::json doc = parse_json_document(document, "config");
  const FieldReader f(doc, "config");
  ScenarioConfig c;
  c.scenario = parse_kind(f);
  c.name = f.string_or("name", std::string(to_string(c.scenario)));
  c.grid_file = resolve(base_dir, f.string("grid_file"));
  c.step_seconds = static_cast<int>(f.integer_or("step_seconds", 900));
  c.horizon = f.integer_or("horizon", 200);
  c.episode_length = static_cast<int>(f.integer_or("episode_length", 96));
  c.attacker_buses = f.int_list("attacker_buses");
  if (f.has("controlled_buses")) c.controlled_buses = f.int_list("controlled_buses");
  c.sensor_buses = f.has("sensor_buses") ? f.int_list("sensor_buses") : c.attacker_buses;

  c.attacker_mode = default_mode(c.scenario);
  if (f.has("attacker_mode")) {
    const std::string m = f.string("attacker_mode");
    bool found = false;
    for (auto mode : {AttackerMode::kNone, AttackerMode::kOscillating, AttackerMode::kZero,
                      AttackerMode::kLearned})
      if (m == to_string(mode)) {
        c.attacker_mode = mode;
        found = true;
      }
    if (!found) f.fail("attacker_mode", "unknown attacker mode \"" + m + "\"");
  }
  c.holdoff = static_cast<int>(f.integer_or("holdoff", 25));

  if (f.has("objective")) {
    const FieldReader o = f.child("objective");
    c.objective.mu = o.number_or("mu", c.objective.mu);
    c.objective.sigma = o.number_or("sigma", c.objective.sigma);
    c.objective.c = o.number_or("c", c.objective.c);
    c.objective.a = o.number_or("a", c.objective.a);
    try {
      c.objective.variant = parse_objective_variant(o.string("variant"));
    } catch (const ParseError& e) {
      o.fail("variant", e.what());
    }
  }

  if (f.has("voltage_band")) {
    const auto band = f.array("voltage_band");
    if (band.size() != 2 || !band[0].second.is_number() || !band[1].second.is_number())
      f.fail("voltage_band", "expected [v_lo, v_hi]");
    c.v_lo = band[0].second.get<double>();
    c.v_hi = band[1].second.get<double>();
  }
  c.voltvar_d = f.number_or("voltvar_step_size", c.voltvar_d);
  c.pv_active_limit = f.number_or("pv_active_limit", c.pv_active_limit);
  c.start = timestamp_field(f, "start");

  const FieldReader w = f.child("weather");
  const std::string wk = w.string("kind");
  if (wk == "constant") {
    c.weather.kind = WeatherKind::kConstant;
    c.weather.irradiance = w.number("irradiance");
  } else if (wk == "synthetic") {
    c.weather.kind = WeatherKind::kSynthetic;
    try {
      c.weather.day_type = parse_day_type(w.string("day_type"));
    } catch (const ParseError& e) {
      w.fail("day_type", e.what());
    }
    c.weather.seed = static_cast<std::uint64_t>(w.integer_or("seed", 1));
    c.weather.synth_start = w.has("start") ? timestamp_field(w, "start") : c.start;
  } else if (wk == "file") {
    c.weather.kind = WeatherKind::kFile;
    c.weather.file = resolve(base_dir, w.string("file"));
  } else {
    w.fail("kind", "expected \"constant\", \"synthetic\" or \"file\"");
  }

  c.consumers_connected = f.boolean_or("consumers_connected", false);
  if (f.has("profiles")) {
    for (const auto& [i, node] : f.array("profiles")) {
      const FieldReader p(node, "config.profiles[" + std::to_string(i) + "]");
      ProfileConfig pc;
      pc.key = p.string("key");
      try {
        pc.channel = parse_channel(p.string("channel"));
      } catch (const ParseError& e) {
        p.fail("channel", e.what());
      }
      pc.file = resolve(base_dir, p.string("file"));
      c.profiles.push_back(pc);
    }
  }

  c.terminate_on_divergence = f.boolean_or("terminate_on_divergence", true);
  if (f.has("powerflow")) {
    const FieldReader p = f.child("powerflow");
    c.powerflow.tolerance = p.number_or("tolerance", c.powerflow.tolerance);
    c.powerflow.max_iterations = static_cast<int>(p.integer_or("max_iterations", c.powerflow.max_iterations));
  }
  if (f.has("controller_timing")) {
    const std::string t = f.string("controller_timing");
    if (t == "previous_step") {
      c.controller_timing = ControllerTiming::kPreviousStep;
    } else if (t == "same_step") {
      c.controller_timing = ControllerTiming::kSameStep;
    } else {
      f.fail("controller_timing", "expected \"previous_step\" or \"same_step\"");
    }
  }
  c.seed = static_cast<std::uint64_t>(f.integer_or("seed", 1));
  c.output_dir = resolve(base_dir, f.string_or("output_dir", "out/" + c.name));

  if (f.has("training")) {
    const FieldReader t = f.child("training");
    TrainingConfig& tc = c.training;
    if (t.has("hidden")) tc.sac.hidden = t.int_list("hidden");
    tc.sac.lr = t.number_or("learning_rate", tc.sac.lr);
    tc.sac.gamma = t.number_or("gamma", tc.sac.gamma);
    tc.sac.tau = t.number_or("tau", tc.sac.tau);
    tc.sac.batch_size = static_cast<int>(t.integer_or("batch_size", tc.sac.batch_size));
    tc.sac.buffer_capacity = static_cast<size_t>(t.integer_or("buffer_capacity", static_cast<std::int64_t>(tc.sac.buffer_capacity)));
    tc.sac.init_log_alpha = t.number_or("init_log_alpha", tc.sac.init_log_alpha);
    tc.sac.auto_alpha = t.boolean_or("auto_alpha", tc.sac.auto_alpha);
    if (t.has("target_entropy")) tc.sac.target_entropy = t.number("target_entropy");
    tc.train_steps = t.integer_or("train_steps", tc.train_steps);
    tc.warmup_steps = t.integer_or("warmup_steps", tc.warmup_steps);
    tc.reward_scale = t.number_or("reward_scale", tc.reward_scale);
    tc.updates_per_step = static_cast<int>(t.integer_or("updates_per_step", tc.updates_per_step));
    tc.checkpoint_every = t.integer_or("checkpoint_every", tc.checkpoint_every);
    tc.eval_episodes = static_cast<int>(t.integer_or("eval_episodes", tc.eval_episodes));
    tc.eval_seed = static_cast<std::uint64_t>(t.integer_or("eval_seed", static_cast<std::int64_t>(tc.eval_seed)));
  }
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_config(text, path.parent_path());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void validate(const ScenarioConfig& c, const Grid& grid) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
  };
  require(c.horizon >= 1, "horizon must be >= 1");
  require(c.step_seconds > 0, "step_seconds must be positive");
  require(c.episode_length >= 1, "episode_length must be >= 1");
  require(c.v_lo < 1.0 && 1.0 < c.v_hi, "voltage_band must satisfy v_lo < 1 < v_hi");
  require(c.holdoff >= 1, "holdoff must be >= 1");
  require(c.objective.sigma != 0.0, "objective sigma must be nonzero");
  require(c.voltvar_d > 0.0, "voltvar_step_size must be positive");
  require(c.pv_active_limit > 0.0 && c.pv_active_limit <= 1.0, "pv_active_limit must lie in (0, 1]");
  require(!c.sensor_buses.empty(), "sensor_buses must not be empty");
  require(c.powerflow.tolerance > 0.0 && c.powerflow.max_iterations >= 1,
          "powerflow tolerance and max_iterations must be positive");

  std::set<int> unit_buses;
  for (const auto& u : grid.units()) unit_buses.insert(u.bus);
  std::set<int> attackers(c.attacker_buses.begin(), c.attacker_buses.end());
  require(attackers.size() == c.attacker_buses.size(), "attacker_buses contains duplicates");
  for (int b : attackers)
    require(unit_buses.count(b) == 1, "attacker bus " + std::to_string(b) + " hosts no single inverter unit");
  for (int b : c.controlled_buses) {
    require(unit_buses.count(b) == 1, "controlled bus " + std::to_string(b) + " hosts no inverter unit");
    require(attackers.count(b) == 0,
            "bus " + std::to_string(b) + " is both an attacker and a controlled bus");
  }
  if (c.controlled_buses.empty()) {
    for (const auto& u : grid.units())
      require(!(u.controller == UnitRole::kVoltVar && attackers.count(u.bus)),
              "bus " + std::to_string(u.bus) + " is both an attacker and a controlled bus");
  }
  for (int b : c.sensor_buses)
    require(b >= 0 && b < grid.bus_count(), "sensor bus " + std::to_string(b) + " does not exist");
  std::set<std::pair<std::string, Channel>> keys;
  for (const auto& p : c.profiles)
    require(keys.insert({p.key, p.channel}).second,
            "profile key \"" + p.key + "\" bound twice for channel " + std::string(to_string(p.channel)));
  if (c.attacker_mode == AttackerMode::kLearned || c.attacker_mode == AttackerMode::kOscillating ||
      c.attacker_mode == AttackerMode::kZero)
    require(!attackers.empty(), "attacker mode needs at least one attacker bus");
  if (c.scenario == ScenarioKind::kS3LearnedAttack) {
    const auto& t = c.training;
    require(t.train_steps >= 1 && t.warmup_steps >= 0, "training steps must be positive");
    require(t.reward_scale > 0.0, "reward_scale must be positive");
    require(t.sac.batch_size >= 1, "batch_size must be >= 1");
    require(t.sac.buffer_capacity >= static_cast<size_t>(t.sac.batch_size),
            "buffer_capacity must hold at least one batch");
    require(t.eval_episodes >= 1, "eval_episodes must be >= 1");
  }
}

}  // namespace voltlab
