#include "skylane/dynamics/params.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "skylane/errors.hpp"

namespace skylane {

double UavParams::hover_speed() const { return std::sqrt(mass * gravity / (kRotors * thrust_coeff)); }

void validate_params(const UavParams& p) {
  const double scalars[] = {p.mass,       p.gravity,    p.thrust_coeff,    p.torque_coeff, p.motor_tau, p.drag_coeff,
                            p.damp_coeff, p.arm_length, p.max_motor_speed, p.body_radius};
  for (double v : scalars) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("uav params: every field must be positive and finite");
  }
  if (!p.inertia.allFinite() || !p.inertia.isApprox(p.inertia.transpose(), 1e-12)) {
    throw ValidationError("uav params: inertia must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(p.inertia);
  if (eig.eigenvalues().minCoeff() <= 0.0) throw ValidationError("uav params: inertia must be positive-definite");
  if (p.hover_speed() >= p.max_motor_speed) throw ValidationError("uav params: cannot hover below max motor speed");
}

UavParams params_from_json(const nlohmann::json& j, UavParams p) {
  if (j.is_null()) return p;
  if (!j.is_object()) throw ValidationError("uav params must be an object");
  auto num = [&](const char* key, double& field) {
    if (j.contains(key)) {
      if (!j[key].is_number()) throw ValidationError(std::string("uav params: ") + key + " must be a number");
      field = j[key].get<double>();
    }
  };
  num("mass", p.mass);
  num("gravity", p.gravity);
  num("thrust_coeff", p.thrust_coeff);
  num("torque_coeff", p.torque_coeff);
  num("motor_tau", p.motor_tau);
  num("drag_coeff", p.drag_coeff);
  num("damp_coeff", p.damp_coeff);
  num("arm_length", p.arm_length);
  num("max_motor_speed", p.max_motor_speed);
  num("body_radius", p.body_radius);
  if (j.contains("rotor_count") && j["rotor_count"] != 4) throw ValidationError("only rotor_count 4 is supported");
  if (j.contains("inertia")) {
    const auto& in = j["inertia"];
    if (in.is_array() && in.size() == 3 && in[0].is_number()) {
      p.inertia = Eigen::Vector3d(in[0].get<double>(), in[1].get<double>(), in[2].get<double>()).asDiagonal();
    } else if (in.is_array() && in.size() == 3 && in[0].is_array()) {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) p.inertia(r, c) = in[r][c].get<double>();
    } else {
      throw ValidationError("uav params: inertia must be a 3-vector or 3x3 matrix");
    }
  }
  validate_params(p);
  return p;
}

nlohmann::json params_to_json(const UavParams& p) {
  nlohmann::json in = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) in.push_back({p.inertia(r, 0), p.inertia(r, 1), p.inertia(r, 2)});
  return {{"mass", p.mass},
          {"gravity", p.gravity},
          {"inertia", in},
          {"thrust_coeff", p.thrust_coeff},
          {"torque_coeff", p.torque_coeff},
          {"motor_tau", p.motor_tau},
          {"drag_coeff", p.drag_coeff},
          {"damp_coeff", p.damp_coeff},
          {"arm_length", p.arm_length},
          {"rotor_count", 4},
          {"max_motor_speed", p.max_motor_speed},
          {"body_radius", p.body_radius}};
}

ControllerGains gains_from_json(const nlohmann::json& j, ControllerGains g) {
  if (j.is_null()) return g;
  g.pos_p = j.value("pos_p", g.pos_p);
  g.vel_p = j.value("vel_p", g.vel_p);
  g.att_p = j.value("att_p", g.att_p);
  g.rate_p = j.value("rate_p", g.rate_p);
  g.v_max = j.value("v_max", g.v_max);
  g.tilt_max_deg = j.value("tilt_max_deg", g.tilt_max_deg);
  if (!(g.pos_p > 0 && g.vel_p > 0 && g.att_p > 0 && g.rate_p > 0 && g.v_max > 0 && g.tilt_max_deg > 0 &&
        g.tilt_max_deg < 90)) {
    throw ValidationError("controller gains out of range");
  }
  return g;
}

RotorLayout x_layout(double arm_length) {
  const double c = arm_length / std::numbers::sqrt2;
  return {{Vec2(c, -c), Vec2(-c, c), Vec2(c, c), Vec2(-c, -c)}, {-1.0, -1.0, 1.0, 1.0}};
}

}  // namespace skylane
