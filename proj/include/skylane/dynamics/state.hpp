#pragma once

#include <array>
#include <optional>

#include "skylane/dynamics/params.hpp"
#include "skylane/world/types.hpp"

namespace skylane {

using MotorVector = Eigen::Vector4d;

struct UavState {
  LocalPoint position = LocalPoint::Zero();
  Vec3 velocity = Vec3::Zero();          // world ENU
  Quat attitude = Quat::Identity();      // body FLU -> world ENU
  Vec3 angular_rate = Vec3::Zero();      // body frame
  MotorVector motor_speed = MotorVector::Zero();
  MotorVector health = MotorVector::Ones();  // per-motor efficiency in [0, 1]
};

enum class SetpointMode { kPositionHold, kVelocity, kWaypoint };

/// What the vehicle is asked to do. For velocity mode `target` is a velocity
/// vector; when `hold_altitude` is set its vertical component is replaced by
/// an altitude-hold law.
struct ControlSetpoint {
  SetpointMode mode = SetpointMode::kPositionHold;
  Vec3 target = Vec3::Zero();
  double yaw = 0.0;  // radians, CCW from east
  double speed_limit = 1e9;
  std::optional<double> hold_altitude;
};

}  // namespace skylane
