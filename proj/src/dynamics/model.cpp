#include "skylane/dynamics/model.hpp"

#include <cmath>

#include "skylane/errors.hpp"

namespace skylane {

Quat rotation_vector_to_quat(const Vec3& rv) {
  const double angle = rv.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * rv.x(), 0.5 * rv.y(), 0.5 * rv.z());
    return q.normalized();
  }
  const Vec3 axis = rv / angle;
  const double s = std::sin(0.5 * angle);
  return Quat(std::cos(0.5 * angle), axis.x() * s, axis.y() * s, axis.z() * s);
}

Wrench rotor_wrench(const UavParams& params, const MotorVector& speed) {
  const RotorLayout layout = x_layout(params.arm_length);
  Wrench w;
  for (int i = 0; i < 4; ++i) {
    const double sq = speed[i] * speed[i];
    const double t = params.thrust_coeff * sq;
    const double q = params.torque_coeff * sq;
    w.rotor_thrust[i] = t;
    w.thrust += t;
    // r x (0, 0, t) = (y t, -x t, 0)
    w.torque.x() += layout.position[i].y() * t;
    w.torque.y() -= layout.position[i].x() * t;
    w.torque.z() += layout.yaw_sign[i] * q;
  }
  return w;
}

UavState step_dynamics(const UavState& s, const UavParams& p, const MotorVector& cmd, const Vec3& wind, double dt) {
  if (!(dt > 0.0) || dt > 0.01) throw ValidationError("step_dynamics: dt must be in (0, 0.01]");
  if (!cmd.allFinite() || !wind.allFinite() || !s.position.allFinite() || !s.velocity.allFinite() ||
      !s.attitude.coeffs().allFinite() || !s.angular_rate.allFinite() || !s.motor_speed.allFinite()) {
    throw NumericError("step_dynamics: non-finite input");
  }
  if ((cmd.array() < 0.0).any() || (cmd.array() > p.max_motor_speed).any()) {
    throw ValidationError("step_dynamics: motor command outside [0, max_motor_speed]");
  }

  UavState n = s;
  n.motor_speed = s.motor_speed + dt * (cmd - s.motor_speed) / p.motor_tau;
  n.motor_speed = n.motor_speed.cwiseMax(0.0).cwiseMin(p.max_motor_speed);

  const MotorVector effective = n.motor_speed.cwiseProduct(s.health);
  const Wrench w = rotor_wrench(p, effective);

  const Vec3 thrust_world = s.attitude * Vec3(0.0, 0.0, w.thrust);
  const Vec3 force = thrust_world - p.drag_coeff * (s.velocity - wind) + Vec3(0.0, 0.0, -p.mass * p.gravity);

  const Vec3& rate = s.angular_rate;
  const Vec3 torque = w.torque - p.damp_coeff * rate;
  const Vec3 rate_dot = p.inertia.ldlt().solve(torque - rate.cross(p.inertia * rate));
  n.angular_rate = rate + dt * rate_dot;

  n.attitude = (s.attitude * rotation_vector_to_quat(n.angular_rate * dt)).normalized();

  n.velocity = s.velocity + dt * force / p.mass;
  n.position = s.position + dt * n.velocity;
  return n;
}

}  // namespace skylane
