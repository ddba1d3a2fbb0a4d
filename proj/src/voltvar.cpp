#include "voltlab/voltvar.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace voltlab {

double project(double q, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("project: lo must not exceed hi");
  return std::min(hi, std::max(lo, q));
}

ControllerState voltvar_step(const ControllerState& state, double v_measured) {
  assert(v_measured > 0.0);
  ControllerState next = state;
  next.q_rel = project(state.q_rel - state.d * (v_measured - 1.0), -1.0, 1.0);
  return next;
}

double apply_setpoint(const ControllerState& state, double q_avail) {
  return state.q_rel * q_avail;
}

}  // namespace voltlab
