#pragma once

#include <array>

#include <json.hpp>

#include "skylane/world/types.hpp"

namespace skylane {

/// Physical parameters of an X-configuration quadrotor. Defaults describe a
/// ~1.5 kg delivery quad (see docs/parameters.md).
struct UavParams {
  double mass = 1.5;                 // kg
  double gravity = 9.81;             // m/s^2
  Eigen::Matrix3d inertia = Eigen::Vector3d(0.03, 0.03, 0.05).asDiagonal();  // kg m^2
  double thrust_coeff = 1.5e-5;      // N / (rad/s)^2
  double torque_coeff = 2.5e-7;      // N m / (rad/s)^2
  double motor_tau = 0.02;           // s
  double drag_coeff = 0.1;           // N / (m/s)
  double damp_coeff = 0.005;         // N m / (rad/s)
  double arm_length = 0.225;         // m
  double max_motor_speed = 1000.0;   // rad/s
  double body_radius = 0.5;          // m, collision sphere

  static constexpr int kRotors = 4;

  /// Motor speed at which total thrust balances weight.
  double hover_speed() const;
};

/// Throws ValidationError unless every field is positive and the inertia is
/// symmetric positive-definite.
void validate_params(const UavParams& p);

/// Applies the keys present in `overrides` (UavParams field names) on top of
/// `base`. Inertia may be a 3-vector (diagonal) or a 3x3 nested array.
UavParams params_from_json(const nlohmann::json& overrides, UavParams base = {});
nlohmann::json params_to_json(const UavParams& p);

/// Cascaded controller gains. rate_p multiplies the inertia matrix.
struct ControllerGains {
  double pos_p = 1.0;       // 1/s
  double vel_p = 2.0;       // 1/s
  double att_p = 8.0;       // 1/s
  double rate_p = 20.0;     // 1/s, torque = rate_p * J * rate error
  double v_max = 12.0;      // m/s
  double tilt_max_deg = 30.0;
};

ControllerGains gains_from_json(const nlohmann::json& overrides, ControllerGains base = {});

/// Rotor geometry in the body FLU frame (x forward, y left, z up):
/// 0 front-right, 1 rear-left, 2 front-left, 3 rear-right. Rotors 0 and 1
/// spin counterclockwise seen from above and push the body clockwise.
struct RotorLayout {
  std::array<Vec2, 4> position;    // (x, y) arm tips
  std::array<double, 4> yaw_sign;  // body z reaction torque sign
};

RotorLayout x_layout(double arm_length);

}  // namespace skylane
