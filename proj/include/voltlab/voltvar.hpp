#pragma once

namespace voltlab {

// Clamp onto [lo, hi]. lo > hi is a programming error.
double project(double q, double lo, double hi);

// Memory of one benign inverter's distributed Volt/VAr controller. q_rel is
// the reactive setpoint as a fraction of the inverter's current headroom.
struct ControllerState {
  int unit = 0;
  double q_rel = 0.0;
  double d = 15.0;
};

// One synchronous update q <- [q - d (v - 1)] projected onto [-1, 1].
ControllerState voltvar_step(const ControllerState& state, double v_measured);

// Absolute reactive power (MVAr) for the current headroom q_avail.
double apply_setpoint(const ControllerState& state, double q_avail);

}  // namespace voltlab
