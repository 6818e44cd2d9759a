#pragma once

#include "skylane/world/types.hpp"

namespace skylane {

struct GeodeticPoint {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double alt_m = 0.0;
};

/// WGS-84 geodetic to East-North-Up about `datum` (tangent-plane frame).
LocalPoint geodetic_to_local(const GeodeticPoint& p, const GeodeticPoint& datum);
/// Exact inverse of geodetic_to_local.
GeodeticPoint local_to_geodetic(const LocalPoint& p, const GeodeticPoint& datum);

namespace wgs84 {
inline constexpr double kSemiMajor = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;
inline constexpr double kEccSq = kFlattening * (2.0 - kFlattening);
}  // namespace wgs84

}  // namespace skylane
