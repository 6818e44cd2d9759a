#include "skylane/world/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>

#include "skylane/errors.hpp"

namespace skylane {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

Vec2 xy(const Vec3& v) { return {v.x(), v.y()}; }

// Clips the parameter interval [t0, t1] of p(t) = a + t*d against lo <= p <= hi
// on one axis. Returns false when the interval becomes empty.
bool clip_axis(double a, double d, double lo, double hi, double& t0, double& t1) {
  if (d == 0.0) return a >= lo && a <= hi;
  double ta = (lo - a) / d;
  double tb = (hi - a) / d;
  if (ta > tb) std::swap(ta, tb);
  t0 = std::max(t0, ta);
  t1 = std::min(t1, tb);
  return t0 <= t1;
}

// Smallest t >= 0 where the 2D ray o + t*d hits the disk |x - c| <= r, or the
// entry/exit roots of the quadratic. Returns the root interval, empty if none.
bool disk_interval(const Vec2& o, const Vec2& d, const Vec2& c, double r, double& t0, double& t1) {
  const Vec2 m = o - c;
  const double a = d.squaredNorm();
  const double c0 = m.squaredNorm() - r * r;
  if (a == 0.0) {
    if (c0 > 0.0) return false;
    t0 = -kInf;
    t1 = kInf;
    return true;
  }
  const double b = m.dot(d);
  const double disc = b * b - a * c0;
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  t0 = (-b - sq) / a;
  t1 = (-b + sq) / a;
  return true;
}

}  // namespace

void validate_obstacle(const Obstacle& obs) {
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          if (!(s.radius > 0.0) || !s.center.allFinite()) throw ValidationError("sphere: radius must be > 0");
        } else if constexpr (std::is_same_v<T, Box>) {
          if (!(s.min.array() < s.max.array()).all()) throw ValidationError("box: min must be < max componentwise");
        } else {
          if (!(s.radius > 0.0) || !(s.height > 0.0) || !s.base.allFinite()) {
            throw ValidationError("cylinder: radius and height must be > 0");
          }
        }
      },
      obs.shape);
  if (!obs.velocity.allFinite()) throw ValidationError("obstacle velocity not finite");
}

Obstacle translated(const Obstacle& obs, const Vec3& offset) {
  Obstacle out = obs;
  std::visit(
      [&](auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          s.center += offset;
        } else if constexpr (std::is_same_v<T, Box>) {
          s.min += offset;
          s.max += offset;
        } else {
          s.base += offset;
        }
      },
      out.shape);
  return out;
}

double distance_to_obstacle(const LocalPoint& p, const Obstacle& obs) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return std::max(0.0, (p - s.center).norm() - s.radius);
        } else if constexpr (std::is_same_v<T, Box>) {
          const Vec3 q = p.cwiseMax(s.min).cwiseMin(s.max);
          return (p - q).norm();
        } else {
          const double radial = std::max(0.0, (xy(p) - xy(s.base)).norm() - s.radius);
          const double vertical = std::max({0.0, s.base.z() - p.z(), p.z() - (s.base.z() + s.height)});
          return std::hypot(radial, vertical);
        }
      },
      obs.shape);
}

bool point_in_obstacle(const LocalPoint& p, const Obstacle& obs) {
  return std::visit(
      [&](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return (p - s.center).squaredNorm() <= s.radius * s.radius;
        } else if constexpr (std::is_same_v<T, Box>) {
          return (p.array() >= s.min.array()).all() && (p.array() <= s.max.array()).all();
        } else {
          return p.z() >= s.base.z() && p.z() <= s.base.z() + s.height &&
                 (xy(p) - xy(s.base)).squaredNorm() <= s.radius * s.radius;
        }
      },
      obs.shape);
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  return (p - closest_point_on_segment(p, a, b)).norm();
}

Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b, double* t_out) {
  const Vec3 d = b - a;
  const double len2 = d.squaredNorm();
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
  if (t_out != nullptr) *t_out = t;
  return a + t * d;
}

double segment_segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1) {
  const Vec3 d1 = p1 - p0;
  const Vec3 d2 = q1 - q0;
  const Vec3 r = p0 - q0;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0, t = 0.0;
  if (a <= 0.0 && e <= 0.0) return r.norm();
  if (a <= 0.0) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= 0.0) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p0 + s * d1) - (q0 + t * d2)).norm();
}

bool segment_intersects_obstacle(const LocalPoint& a, const LocalPoint& b, const Obstacle& obs) {
  if (a == b) return point_in_obstacle(a, obs);
  return std::visit(
      [&](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return point_segment_distance(s.center, a, b) <= s.radius;
        } else if constexpr (std::is_same_v<T, Box>) {
          const Vec3 d = b - a;
          double t0 = 0.0, t1 = 1.0;
          for (int i = 0; i < 3; ++i) {
            if (!clip_axis(a[i], d[i], s.min[i], s.max[i], t0, t1)) return false;
          }
          return true;
        } else {
          const Vec3 d = b - a;
          double t0 = 0.0, t1 = 1.0;
          if (!clip_axis(a.z(), d.z(), s.base.z(), s.base.z() + s.height, t0, t1)) return false;
          const Vec3 pa = a + t0 * d;
          const Vec3 pb = a + t1 * d;
          const Vec3 c(s.base.x(), s.base.y(), 0.0);
          const Vec3 qa(pa.x(), pa.y(), 0.0), qb(pb.x(), pb.y(), 0.0);
          return point_segment_distance(c, qa, qb) <= s.radius;
        }
      },
      obs.shape);
}

std::optional<double> ray_intersect(const LocalPoint& origin, const Vec3& dir, const Sphere& s) {
  const Vec3 m = origin - s.center;
  const double b = m.dot(dir);
  const double c = m.squaredNorm() - s.radius * s.radius;
  if (c <= 0.0) return 0.0;
  if (b > 0.0) return std::nullopt;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  return -b - std::sqrt(disc);
}

std::optional<double> ray_intersect(const LocalPoint& origin, const Vec3& dir, const Obstacle& obs) {
  return std::visit(
      [&](const auto& s) -> std::optional<double> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return ray_intersect(origin, dir, s);
        } else if constexpr (std::is_same_v<T, Box>) {
          double t0 = 0.0, t1 = kInf;
          for (int i = 0; i < 3; ++i) {
            if (!clip_axis(origin[i], dir[i], s.min[i], s.max[i], t0, t1)) return std::nullopt;
          }
          return t0;
        } else {
          double t0 = 0.0, t1 = kInf;
          if (!clip_axis(origin.z(), dir.z(), s.base.z(), s.base.z() + s.height, t0, t1)) return std::nullopt;
          double d0, d1;
          if (!disk_interval(xy(origin), xy(dir), xy(s.base), s.radius, d0, d1)) {
            return std::nullopt;
          }
          t0 = std::max(t0, d0);
          t1 = std::min(t1, d1);
          if (t0 > t1) return std::nullopt;
          return t0;
        }
      },
      obs.shape);
}

void validate_zone(const NoFlyZone& zone) {
  const auto& poly = zone.footprint;
  if (poly.size() < 3) throw ValidationError("no-fly zone footprint needs >= 3 vertices");
  if (!(zone.floor < zone.ceiling)) throw ValidationError("no-fly zone floor must be below ceiling");
  if (zone.active_from > zone.active_until) throw ValidationError("no-fly zone window inverted");
  double area2 = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p0 = poly[i];
    const Vec2& p1 = poly[(i + 1) % n];
    const Vec2& p2 = poly[(i + 2) % n];
    if (!p0.allFinite()) throw ValidationError("no-fly zone vertex not finite");
    if (cross2(p1 - p0, p2 - p1) < 0.0) throw ValidationError("no-fly zone footprint must be convex and CCW");
    area2 += cross2(p0, p1);
  }
  if (!(area2 > 0.0)) throw ValidationError("no-fly zone footprint must be counterclockwise with positive area");
}

bool segment_intersects_convex_polygon(const Vec2& a, const Vec2& b, const std::vector<Vec2>& poly) {
  // Cyrus-Beck clipping against inward half-planes, boundary included.
  constexpr double kEps = 1e-9;
  const Vec2 d = b - a;
  double t0 = 0.0, t1 = 1.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = poly[(i + 1) % n] - poly[i];
    const double scale = std::max(1.0, e.norm());
    const double f0 = cross2(e, a - poly[i]) / scale;
    const double fd = cross2(e, d) / scale;
    if (fd == 0.0) {
      if (f0 < -kEps) return false;
      continue;
    }
    const double t = (-kEps - f0) / fd;
    if (fd > 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 > t1) return false;
  }
  return true;
}

bool segment_intersects_nfz(const LocalPoint& a, const LocalPoint& b, const NoFlyZone& zone, Tick at_tick) {
  if (!zone.active_at(at_tick)) return false;
  const double lo = std::min(a.z(), b.z());
  const double hi = std::max(a.z(), b.z());
  if (hi < zone.floor || lo > zone.ceiling) return false;
  return segment_intersects_convex_polygon(xy(a), xy(b), zone.footprint);
}

namespace {

Vec3 vec3_from(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(std::string(what) + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json vec3_to(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

}  // namespace

Obstacle obstacle_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("obstacle: expected an object");
  Obstacle o;
  o.id = j.value("id", 0u);
  const std::string shape = j.value("shape", std::string());
  if (shape == "sphere") {
    o.shape = Sphere{vec3_from(j.at("center"), "obstacle center"), j.at("radius").get<double>()};
  } else if (shape == "box") {
    o.shape = Box{vec3_from(j.at("min"), "obstacle min"), vec3_from(j.at("max"), "obstacle max")};
  } else if (shape == "cylinder") {
    o.shape = Cylinder{vec3_from(j.at("base"), "obstacle base"), j.at("radius").get<double>(),
                       j.at("height").get<double>()};
  } else {
    throw ValidationError("obstacle: unknown shape '" + shape + "'");
  }
  o.dynamic = j.value("dynamic", false);
  if (j.contains("velocity")) o.velocity = vec3_from(j["velocity"], "obstacle velocity");
  if (!o.dynamic) o.velocity = Vec3::Zero();
  validate_obstacle(o);
  return o;
}

nlohmann::json obstacle_to_json(const Obstacle& o) {
  nlohmann::json j = {{"id", o.id}, {"dynamic", o.dynamic}, {"velocity", vec3_to(o.velocity)}};
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          j["shape"] = "sphere";
          j["center"] = vec3_to(s.center);
          j["radius"] = s.radius;
        } else if constexpr (std::is_same_v<T, Box>) {
          j["shape"] = "box";
          j["min"] = vec3_to(s.min);
          j["max"] = vec3_to(s.max);
        } else {
          j["shape"] = "cylinder";
          j["base"] = vec3_to(s.base);
          j["radius"] = s.radius;
          j["height"] = s.height;
        }
      },
      o.shape);
  return j;
}

NoFlyZone zone_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("no-fly zone: expected an object");
  NoFlyZone z;
  z.id = j.value("id", 0u);
  for (const auto& v : j.at("footprint")) {
    if (!v.is_array() || v.size() != 2) throw ValidationError("no-fly zone: footprint vertices are [e, n]");
    z.footprint.emplace_back(v[0].get<double>(), v[1].get<double>());
  }
  z.floor = j.at("floor").get<double>();
  z.ceiling = j.at("ceiling").get<double>();
  z.active_from = j.value("active_from", z.active_from);
  z.active_until = j.value("active_until", z.active_until);
  validate_zone(z);
  return z;
}

nlohmann::json zone_to_json(const NoFlyZone& z) {
  nlohmann::json fp = nlohmann::json::array();
  for (const Vec2& v : z.footprint) fp.push_back({v.x(), v.y()});
  return {{"id", z.id},         {"footprint", fp},         {"floor", z.floor},
          {"ceiling", z.ceiling}, {"active_from", z.active_from}, {"active_until", z.active_until}};
}

}  // namespace skylane
