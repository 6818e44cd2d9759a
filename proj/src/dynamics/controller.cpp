#include "skylane/dynamics/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace skylane {
namespace {

Vec3 saturate(const Vec3& v, double limit) {
  const double n = v.norm();
  if (n > limit && n > 0.0) return v * (limit / n);
  return v;
}

Eigen::Matrix4d allocation_matrix(const UavParams& p) {
  const RotorLayout layout = x_layout(p.arm_length);
  Eigen::Matrix4d b;
  for (int i = 0; i < 4; ++i) {
    b(0, i) = 1.0;
    b(1, i) = layout.position[i].y();
    b(2, i) = -layout.position[i].x();
    b(3, i) = layout.yaw_sign[i] * p.torque_coeff / p.thrust_coeff;
  }
  return b;
}

}  // namespace

Eigen::Vector4d mix(const UavParams& params, double thrust, const Vec3& torque) {
  const Eigen::Vector4d wrench(thrust, torque.x(), torque.y(), torque.z());
  return allocation_matrix(params).partialPivLu().solve(wrench);
}

double nose_up_pitch(const Quat& q) {
  const Vec3 nose = q * Vec3::UnitX();
  return std::asin(std::clamp(nose.z(), -1.0, 1.0));
}

ControllerOutput run_controller_detailed(const UavState& s, const ControlSetpoint& sp, const UavParams& p,
                                         const ControllerGains& g, double /*dt*/) {
  ControllerOutput out;
  const double limit = std::min(g.v_max, std::max(0.0, sp.speed_limit));

  Vec3 v_cmd = Vec3::Zero();
  if (sp.mode == SetpointMode::kVelocity) {
    v_cmd = sp.target;
    if (sp.hold_altitude) v_cmd.z() = g.pos_p * (*sp.hold_altitude - s.position.z());
    v_cmd = saturate(v_cmd, limit);
  } else {
    v_cmd = saturate(g.pos_p * (sp.target - s.position), limit);
  }

  out.accel_cmd = g.vel_p * (v_cmd - s.velocity);
  Vec3 force = p.mass * (out.accel_cmd + Vec3(0.0, 0.0, p.gravity)) + p.drag_coeff * s.velocity;

  // Keep a minimum upward component and cap the tilt.
  force.z() = std::max(force.z(), 0.2 * p.mass * p.gravity);
  const double tan_tilt = std::tan(g.tilt_max_deg * std::numbers::pi / 180.0);
  const double horiz = force.head<2>().norm();
  if (horiz > tan_tilt * force.z()) force.head<2>() *= tan_tilt * force.z() / horiz;

  const Vec3 z_b = force.normalized();
  const Vec3 heading(std::cos(sp.yaw), std::sin(sp.yaw), 0.0);
  Vec3 y_b = z_b.cross(heading);
  if (y_b.norm() < 1e-6) y_b = z_b.cross(Vec3::UnitX());
  y_b.normalize();
  const Vec3 x_b = y_b.cross(z_b);
  Eigen::Matrix3d r_des;
  r_des.col(0) = x_b;
  r_des.col(1) = y_b;
  r_des.col(2) = z_b;
  out.attitude_cmd = Quat(r_des).normalized();

  const Vec3 z_now = s.attitude * Vec3::UnitZ();
  out.thrust_cmd = std::max(0.0, force.dot(z_now));

  Quat err = s.attitude.conjugate() * out.attitude_cmd;
  if (err.w() < 0.0) err.coeffs() *= -1.0;
  out.rate_cmd = 2.0 * g.att_p * err.vec();

  const Vec3& rate = s.angular_rate;
  const Vec3 torque = g.rate_p * (p.inertia * (out.rate_cmd - rate)) + rate.cross(p.inertia * rate);

  const Eigen::Vector4d rotor = mix(p, out.thrust_cmd, torque);
  for (int i = 0; i < 4; ++i) {
    const double t = std::max(0.0, rotor[i]);
    out.motor_cmd[i] = std::min(std::sqrt(t / p.thrust_coeff), p.max_motor_speed);
  }
  return out;
}

}  // namespace skylane
