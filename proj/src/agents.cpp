#include "voltlab/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "voltlab/errors.hpp"

namespace voltlab {

ObjectiveVariant parse_objective_variant(std::string_view text) {
  if (text == "as_printed") return ObjectiveVariant::kAsPrinted;
  if (text == "shifted") return ObjectiveVariant::kShifted;
  throw ParseError("unknown objective variant \"" + std::string(text) + "\"");
}

std::string_view to_string(ObjectiveVariant variant) {
  return variant == ObjectiveVariant::kShifted ? "shifted" : "as_printed";
}

std::vector<double> filter_observation(std::span<const double> all_voltages,
                                       std::span<const int> sensor_buses) {
  std::vector<int> ids(sensor_buses.begin(), sensor_buses.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<double> out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= all_voltages.size())
      throw std::out_of_range("filter_observation: unknown bus id " + std::to_string(id));
    out.push_back(all_voltages[static_cast<size_t>(id)]);
  }
  return out;
}

double objective(std::span<const double> v_filtered, const ObjectiveParams& p) {
  if (v_filtered.empty()) throw std::invalid_argument("objective: empty voltage vector");
  const double mean =
      std::accumulate(v_filtered.begin(), v_filtered.end(), 0.0) / static_cast<double>(v_filtered.size());
  const double d = mean - p.mu;
  const double g = -d * d / (2.0 * p.sigma * p.sigma);
  if (p.variant == ObjectiveVariant::kAsPrinted) return 2.0 * p.a * std::exp(g - p.c);
  return 2.0 * (p.a * std::exp(g) - p.c);
}

double objective_supremum(const ObjectiveParams& p) {
  return p.variant == ObjectiveVariant::kAsPrinted ? 0.0 : -2.0 * p.c;
}

Action oscillating_action(std::int64_t step, int holdoff, size_t n_units) {
  if (holdoff < 1) throw std::invalid_argument("oscillating_action: holdoff must be >= 1");
  const std::int64_t period = 2 * static_cast<std::int64_t>(holdoff);
  const std::int64_t phase = ((step % period) + period) % period;
  return Action{std::vector<double>(n_units, phase < holdoff ? 1.0 : -1.0)};
}

std::vector<double> observation_features(const Observation& obs) {
  std::vector<double> x;
  x.reserve(obs.v_visible.size() + obs.q_rel_now.size() + obs.q_avail_norm.size());
  for (double v : obs.v_visible) x.push_back((v - 1.0) / 0.05);
  x.insert(x.end(), obs.q_rel_now.begin(), obs.q_rel_now.end());
  x.insert(x.end(), obs.q_avail_norm.begin(), obs.q_avail_norm.end());
  return x;
}

}  // namespace voltlab
