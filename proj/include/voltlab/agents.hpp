#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace voltlab {

// What the attacker sees after each step: voltages at its sensor buses
// plus its own setpoint state.
struct Observation {
  std::vector<double> v_visible;
  std::vector<double> q_rel_now;
  std::vector<double> q_avail_norm;
};

// Relative reactive setpoints for the attacker units, each in [-1, 1].
struct Action {
  std::vector<double> q_rel_cmd;
};

enum class ObjectiveVariant {
  kAsPrinted,  // 2 a exp(-d^2 / (2 sigma^2) - c)
  kShifted,    // 2 (a exp(-d^2 / (2 sigma^2)) - c)
};

ObjectiveVariant parse_objective_variant(std::string_view text);
std::string_view to_string(ObjectiveVariant variant);

struct ObjectiveParams {
  double mu = 1.0;
  double sigma = -0.05;
  double c = -1.2;
  double a = -2.5;
  ObjectiveVariant variant = ObjectiveVariant::kAsPrinted;
};

// Voltages at the sensor buses in ascending bus-id order. Throws
// std::out_of_range for a sensor outside the voltage vector.
std::vector<double> filter_observation(std::span<const double> all_voltages,
                                       std::span<const int> sensor_buses);

// Attacker objective of the mean filtered voltage. Even in (mean - mu) and
// increasing in its magnitude. Throws std::invalid_argument on empty input.
double objective(std::span<const double> v_filtered, const ObjectiveParams& params);

// Least upper bound of objective() as |mean - mu| grows.
double objective_supremum(const ObjectiveParams& params);

// Square wave: +1 for the first `holdoff` steps of each 2*holdoff period,
// -1 for the rest.
Action oscillating_action(std::int64_t step, int holdoff, size_t n_units);

// Network input for the learner: voltage deviations scaled by 1/0.05,
// followed by setpoints and normalized headroom.
std::vector<double> observation_features(const Observation& obs);

}  // namespace voltlab
