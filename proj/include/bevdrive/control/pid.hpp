#pragma once

#include <algorithm>
#include <cmath>

namespace bevdrive {

/// Textbook PID with integral windup clamp. The derivative term is zero on
/// the first update after a reset.
struct PidState {
  double kp = 1.0, ki = 0.0, kd = 0.0;
  double windup_clamp = 5.0;
  double integral = 0.0;
  double prev_error = 0.0;
  bool has_prev = false;

  PidState() = default;
  PidState(double p, double i, double d, double clamp = 5.0)
      : kp(p), ki(i), kd(d), windup_clamp(clamp) {}

  void reset() {
    integral = 0.0;
    prev_error = 0.0;
    has_prev = false;
  }

  double update(double error, double dt) {
    integral = std::clamp(integral + error * dt, -windup_clamp, windup_clamp);
    const double deriv = has_prev ? (error - prev_error) / dt : 0.0;
    prev_error = error;
    has_prev = true;
    return kp * error + ki * integral + kd * deriv;
  }
};

}  // namespace bevdrive
