#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "voltlab/agents.hpp"
#include "voltlab/grid.hpp"
#include "voltlab/powerflow.hpp"
#include "voltlab/scenario_config.hpp"
#include "voltlab/timeseries.hpp"
#include "voltlab/voltvar.hpp"

namespace voltlab {

struct ConsumerProfile {
  std::optional<TimeSeries> p;
  std::optional<TimeSeries> q;
};

// Exogenous data for a scenario: irradiance and consumer profiles by key.
struct ScenarioInputs {
  std::optional<TimeSeries> weather;  // empty: constant irradiance
  double constant_irradiance = 1000.0;
  std::map<std::string, ConsumerProfile> profiles;

  double irradiance(Timestamp t) const;
  // Latest instant for which all series can be sampled.
  std::optional<Timestamp> last_instant() const;
};

ScenarioInputs load_inputs(const ScenarioConfig& config);

struct StepRecord {
  std::int64_t step = 0;
  Timestamp time{};
  double irradiance = 0.0;
  std::vector<double> v_mag;     // every bus
  std::vector<double> p_unit;    // active power per inverter unit (MW)
  std::vector<double> q_rel;     // per inverter unit
  std::vector<double> q_unit;    // reactive power per inverter unit (MVAr)
  std::vector<double> action;    // attacker command as applied
  double load_p = 0.0;           // total consumer load (MW)
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
};

// One grid plus its controllers, stepped in fixed time increments. Holds
// references to the grid, config and inputs, which must outlive it.
class Simulation {
 public:
  Simulation(const Grid& grid, const ScenarioConfig& config, const ScenarioInputs& inputs);

  // Zero setpoints, solves the initial state at t0. Returns whether it
  // converged.
  bool reset(Timestamp t0);

  // Advances one step: sample inputs at t+1, update benign controllers from
  // the last voltages, apply the attacker command, solve, record.
  StepRecord step(const Action& action);

  Observation observe() const;
  std::vector<double> features() const { return observation_features(observe()); }

  const std::vector<int>& attacker_units() const { return attacker_units_; }
  const std::vector<int>& controlled_units() const { return controlled_units_; }
  std::vector<int> controlled_buses() const;
  size_t action_dim() const { return attacker_units_.size(); }
  size_t feature_dim() const;

  Timestamp time() const { return time_; }
  std::int64_t steps_taken() const { return step_; }
  const Eigen::VectorXd& voltages() const { return v_mag_; }
  bool converged() const { return converged_; }
  double supremum() const { return objective_supremum(config_.objective); }
  const PowerflowResult& last_result() const { return last_; }
  const Injections& last_injections() const { return last_inj_; }

 private:
  struct Operating {
    std::vector<double> p_unit;
    std::vector<double> q_avail;
    Eigen::VectorXd load_p, load_q;
    double irradiance = 0.0;
    double total_load = 0.0;
  };

  Operating operating_point(Timestamp t) const;
  Injections injections(const Operating& op, const std::vector<double>& q_rel) const;

  const Grid& grid_;
  const ScenarioConfig& config_;
  const ScenarioInputs& inputs_;
  PowerflowSolver solver_;
  std::vector<int> attacker_units_;
  std::vector<int> controlled_units_;
  std::vector<double> q_rel_;
  std::vector<double> q_avail_;
  std::vector<double> s_rated_;
  Eigen::VectorXd v_mag_;
  PowerflowResult last_;
  Injections last_inj_;
  bool converged_ = false;
  Timestamp time_{};
  std::int64_t step_ = 0;
};

}  // namespace voltlab
