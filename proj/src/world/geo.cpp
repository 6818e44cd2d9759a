#include "skylane/world/geo.hpp"

#include <cmath>
#include <numbers>

#include "skylane/errors.hpp"

namespace skylane {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void check_range(const GeodeticPoint& p) {
  if (!std::isfinite(p.lat_deg) || !std::isfinite(p.lon_deg) || !std::isfinite(p.alt_m) ||
      std::abs(p.lat_deg) > 90.0 || std::abs(p.lon_deg) > 180.0) {
    throw ValidationError("geodetic point out of range");
  }
}

Vec3 to_ecef(const GeodeticPoint& p) {
  using namespace wgs84;
  const double lat = p.lat_deg * kDegToRad;
  const double lon = p.lon_deg * kDegToRad;
  const double s = std::sin(lat);
  const double n = kSemiMajor / std::sqrt(1.0 - kEccSq * s * s);
  return {(n + p.alt_m) * std::cos(lat) * std::cos(lon), (n + p.alt_m) * std::cos(lat) * std::sin(lon),
          (n * (1.0 - kEccSq) + p.alt_m) * s};
}

GeodeticPoint from_ecef(const Vec3& x) {
  using namespace wgs84;
  const double lon = std::atan2(x.y(), x.x());
  const double r = std::hypot(x.x(), x.y());
  // Fixed-point iteration on latitude; converges to machine precision in a
  // handful of steps away from the poles.
  double lat = std::atan2(x.z(), r * (1.0 - kEccSq));
  double alt = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double s = std::sin(lat);
    const double n = kSemiMajor / std::sqrt(1.0 - kEccSq * s * s);
    alt = r / std::cos(lat) - n;
    const double next = std::atan2(x.z(), r * (1.0 - kEccSq * n / (n + alt)));
    const bool done = std::abs(next - lat) < 1e-15;
    lat = next;
    if (done) break;
  }
  const double s = std::sin(lat);
  const double n = kSemiMajor / std::sqrt(1.0 - kEccSq * s * s);
  if (std::abs(std::cos(lat)) > 1e-9) {
    alt = r / std::cos(lat) - n;
  } else {
    alt = std::abs(x.z()) - n * (1.0 - kEccSq);
  }
  return {lat / kDegToRad, lon / kDegToRad, alt};
}

Eigen::Matrix3d ecef_to_enu_rotation(const GeodeticPoint& datum) {
  const double lat = datum.lat_deg * kDegToRad;
  const double lon = datum.lon_deg * kDegToRad;
  const double sl = std::sin(lat), cl = std::cos(lat);
  const double so = std::sin(lon), co = std::cos(lon);
  Eigen::Matrix3d r;
  r << -so, co, 0.0,
       -sl * co, -sl * so, cl,
       cl * co, cl * so, sl;
  return r;
}

}  // namespace

LocalPoint geodetic_to_local(const GeodeticPoint& p, const GeodeticPoint& datum) {
  check_range(p);
  check_range(datum);
  return ecef_to_enu_rotation(datum) * (to_ecef(p) - to_ecef(datum));
}

GeodeticPoint local_to_geodetic(const LocalPoint& p, const GeodeticPoint& datum) {
  check_range(datum);
  if (!p.allFinite()) throw ValidationError("local point not finite");
  const Vec3 ecef = to_ecef(datum) + ecef_to_enu_rotation(datum).transpose() * p;
  return from_ecef(ecef);
}

}  // namespace skylane
