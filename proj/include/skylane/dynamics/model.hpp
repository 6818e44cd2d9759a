#pragma once

#include "skylane/dynamics/state.hpp"

namespace skylane {

/// One semi-implicit Euler substep of the quadrotor model: first-order motor
/// lag, health-scaled rotor thrust and reaction torque, linear drag against
/// the wind-relative velocity, linear rate damping, Euler's rigid-body
/// equation, quaternion exponential update, then velocity and position.
///
/// Throws ValidationError for dt outside (0, 0.01] or out-of-range motor
/// commands, NumericError for non-finite inputs.
UavState step_dynamics(const UavState& state, const UavParams& params, const MotorVector& motor_cmd,
                       const Vec3& wind, double dt);

/// Total body thrust and torque produced by effective rotor speeds.
struct Wrench {
  double thrust = 0.0;
  Vec3 torque = Vec3::Zero();
  Eigen::Vector4d rotor_thrust = Eigen::Vector4d::Zero();
};
Wrench rotor_wrench(const UavParams& params, const MotorVector& effective_speed);

/// Quaternion exponential of a rotation vector.
Quat rotation_vector_to_quat(const Vec3& rv);

}  // namespace skylane
