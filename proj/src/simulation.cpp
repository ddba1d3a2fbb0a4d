#include "voltlab/simulation.hpp"

#include "voltlab/errors.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace voltlab {

double ScenarioInputs::irradiance(Timestamp t) const {
  return weather ? sample(*weather, t) : constant_irradiance;
}

std::optional<Timestamp> ScenarioInputs::last_instant() const {
  std::optional<Timestamp> last;
  auto narrow = [&](const std::optional<TimeSeries>& s) {
    if (s && (!last || s->end() < *last)) last = s->end();
  };
  narrow(weather);
  for (const auto& [key, prof] : profiles) {
    narrow(prof.p);
    narrow(prof.q);
  }
  return last;
}

ScenarioInputs load_inputs(const ScenarioConfig& config) {
  ScenarioInputs in;
  switch (config.weather.kind) {
    case WeatherKind::kConstant:
      in.constant_irradiance = config.weather.irradiance;
      break;
    case WeatherKind::kSynthetic:
      in.weather = synth_weather(config.weather.day_type, config.weather.seed, config.weather.synth_start);
      break;
    case WeatherKind::kFile:
      in.weather = ingest_file(config.weather.file);
      break;
  }
  if (in.weather && in.weather->channel() != Channel::kIrradiance)
    throw ValidationError("weather series has channel " + std::string(to_string(in.weather->channel())));
  if (config.consumers_connected) {
    for (const auto& pc : config.profiles) {
      TimeSeries s = ingest_file(pc.file);
      if (s.channel() != pc.channel)
        throw ValidationError(pc.file.string() + ": expected channel " +
                              std::string(to_string(pc.channel)) + ", found " +
                              std::string(to_string(s.channel())));
      auto& slot = in.profiles[pc.key];
      if (pc.channel == Channel::kLoadQ) {
        slot.q = std::move(s);
      } else {
        slot.p = std::move(s);
      }
    }
  }
  return in;
}

Simulation::Simulation(const Grid& grid, const ScenarioConfig& config, const ScenarioInputs& inputs)
    : grid_(grid), config_(config), inputs_(inputs), solver_(grid) {
  const std::set<int> attackers(config.attacker_buses.begin(), config.attacker_buses.end());
  const std::set<int> controlled(config.controlled_buses.begin(), config.controlled_buses.end());
  const auto& units = grid.units();
  for (int i = 0; i < static_cast<int>(units.size()); ++i) {
    const auto& u = units[static_cast<size_t>(i)];
    s_rated_.push_back(u.s_rated_mva);
    if (attackers.count(u.bus)) continue;
    const bool benign = controlled.empty() ? u.controller == UnitRole::kVoltVar : controlled.count(u.bus) > 0;
    if (benign) controlled_units_.push_back(i);
  }
  // Attacker order follows the config so actions map onto listed buses.
  for (int b : config.attacker_buses)
    for (int i = 0; i < static_cast<int>(units.size()); ++i)
      if (units[static_cast<size_t>(i)].bus == b) attacker_units_.push_back(i);
  q_rel_.assign(units.size(), 0.0);
  q_avail_.assign(units.size(), 0.0);
  v_mag_ = Eigen::VectorXd::Ones(grid.bus_count());
}

std::vector<int> Simulation::controlled_buses() const {
  std::vector<int> out;
  for (int i : controlled_units_) out.push_back(grid_.units()[static_cast<size_t>(i)].bus);
  std::sort(out.begin(), out.end());
  return out;
}

size_t Simulation::feature_dim() const {
  return config_.sensor_buses.size() + 2 * attacker_units_.size();
}

Simulation::Operating Simulation::operating_point(Timestamp t) const {
  Operating op;
  op.irradiance = inputs_.irradiance(t);
  for (double s : s_rated_) {
    const double p = pv_power(op.irradiance, s, config_.pv_active_limit);
    op.p_unit.push_back(p);
    op.q_avail.push_back(q_available(s, p));
  }
  const int n = grid_.bus_count();
  op.load_p = Eigen::VectorXd::Zero(n);
  op.load_q = Eigen::VectorXd::Zero(n);
  for (const auto& load : grid_.loads()) {
    double p = load.p_mw;
    double q = load.q_mvar;
    if (load.profile_key) {
      if (!config_.consumers_connected) continue;
      const auto it = inputs_.profiles.find(*load.profile_key);
      if (it != inputs_.profiles.end()) {
        if (it->second.p) p = sample(*it->second.p, t);
        if (it->second.q) {
          q = sample(*it->second.q, t);
        } else if (load.p_mw != 0.0) {
          q = load.q_mvar * p / load.p_mw;
        }
      }
    }
    op.load_p[load.bus] += p;
    op.load_q[load.bus] += q;
    op.total_load += p;
  }
  return op;
}

Injections Simulation::injections(const Operating& op, const std::vector<double>& q_rel) const {
  const int n = grid_.bus_count();
  Injections inj = Injections::zero(n);
  inj.p = -op.load_p;
  inj.q = -op.load_q;
  const auto& units = grid_.units();
  for (size_t i = 0; i < units.size(); ++i) {
    inj.p[units[i].bus] += op.p_unit[i];
    inj.q[units[i].bus] += q_rel[i] * op.q_avail[i];
  }
  inj.p /= grid_.s_base_mva();
  inj.q /= grid_.s_base_mva();
  return inj;
}

bool Simulation::reset(Timestamp t0) {
  std::fill(q_rel_.begin(), q_rel_.end(), 0.0);
  time_ = t0;
  step_ = 0;
  const Operating op = operating_point(t0);
  q_avail_ = op.q_avail;
  last_inj_ = injections(op, q_rel_);
  last_ = solver_.solve(last_inj_, config_.powerflow);
  converged_ = last_.converged;
  v_mag_ = converged_ ? last_.v_mag : Eigen::VectorXd::Ones(grid_.bus_count());
  return converged_;
}

StepRecord Simulation::step(const Action& action) {
  if (action.q_rel_cmd.size() != attacker_units_.size())
    throw std::invalid_argument("action has " + std::to_string(action.q_rel_cmd.size()) +
                                " entries, expected " + std::to_string(attacker_units_.size()));
  const Timestamp next = time_ + std::chrono::seconds(config_.step_seconds);
  const Operating op = operating_point(next);

  auto update_controllers = [&](const Eigen::VectorXd& v) {
    for (int i : controlled_units_) {
      const int bus = grid_.units()[static_cast<size_t>(i)].bus;
      const ControllerState s{i, q_rel_[static_cast<size_t>(i)], config_.voltvar_d};
      q_rel_[static_cast<size_t>(i)] = voltvar_step(s, v[bus]).q_rel;
    }
  };

  if (config_.controller_timing == ControllerTiming::kPreviousStep) update_controllers(v_mag_);
  StepRecord rec;
  for (size_t k = 0; k < attacker_units_.size(); ++k) {
    const double a = project(action.q_rel_cmd[k], -1.0, 1.0);
    q_rel_[static_cast<size_t>(attacker_units_[k])] = a;
    rec.action.push_back(a);
  }
  if (config_.controller_timing == ControllerTiming::kSameStep) {
    const PowerflowResult pre = solver_.solve(injections(op, q_rel_), config_.powerflow);
    update_controllers(pre.converged ? pre.v_mag : v_mag_);
  }

  last_inj_ = injections(op, q_rel_);
  last_ = solver_.solve(last_inj_, config_.powerflow);
  converged_ = last_.converged;
  q_avail_ = op.q_avail;
  time_ = next;
  ++step_;
  if (converged_) v_mag_ = last_.v_mag;

  rec.step = step_;
  rec.time = next;
  rec.irradiance = op.irradiance;
  rec.v_mag.assign(last_.v_mag.data(), last_.v_mag.data() + last_.v_mag.size());
  rec.p_unit = op.p_unit;
  rec.q_rel = q_rel_;
  for (size_t i = 0; i < q_rel_.size(); ++i) rec.q_unit.push_back(q_rel_[i] * op.q_avail[i]);
  rec.load_p = op.total_load;
  rec.converged = converged_;
  rec.iterations = last_.iterations;
  rec.objective = converged_ ? objective(filter_observation(rec.v_mag, config_.sensor_buses), config_.objective)
                             : supremum();
  return rec;
}

Observation Simulation::observe() const {
  Observation obs;
  std::vector<double> v(v_mag_.data(), v_mag_.data() + v_mag_.size());
  obs.v_visible = filter_observation(v, config_.sensor_buses);
  for (int i : attacker_units_) {
    const auto k = static_cast<size_t>(i);
    obs.q_rel_now.push_back(q_rel_[k]);
    obs.q_avail_norm.push_back(s_rated_[k] > 0.0 ? q_avail_[k] / s_rated_[k] : 0.0);
  }
  return obs;
}

}  // namespace voltlab
