#pragma once

#include "skylane/dynamics/state.hpp"

namespace skylane {

struct ControllerOutput {
  MotorVector motor_cmd = MotorVector::Zero();
  Quat attitude_cmd = Quat::Identity();
  double thrust_cmd = 0.0;
  Vec3 accel_cmd = Vec3::Zero();
  Vec3 rate_cmd = Vec3::Zero();
};

/// Cascaded law: position P -> velocity (saturated) -> acceleration P ->
/// attitude + collective thrust -> body-rate P -> torque -> X mixer.
/// Output motor speeds are clamped to [0, max_motor_speed].
ControllerOutput run_controller_detailed(const UavState& state, const ControlSetpoint& setpoint,
                                         const UavParams& params, const ControllerGains& gains, double dt);

inline MotorVector run_controller(const UavState& state, const ControlSetpoint& setpoint, const UavParams& params,
                                  const ControllerGains& gains, double dt) {
  return run_controller_detailed(state, setpoint, params, gains, dt).motor_cmd;
}

/// Per-rotor thrusts realizing (collective thrust, body torque) for the X
/// layout, before clamping.
Eigen::Vector4d mix(const UavParams& params, double thrust, const Vec3& torque);

/// Nose-up pitch angle (radians) of an attitude: negative when the nose
/// points below the horizon.
double nose_up_pitch(const Quat& q);

}  // namespace skylane
