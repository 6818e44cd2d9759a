#pragma once

#include <cstdint>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace skylane {

/// Local East-North-Up coordinates in meters: x = east, y = north, z = up.
using LocalPoint = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Quat = Eigen::Quaterniond;

using Tick = std::uint64_t;
using NodeId = std::uint32_t;
using AirportId = std::uint32_t;
using AirwayId = std::uint32_t;
using UavId = std::uint32_t;
using PlanId = std::uint32_t;

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace skylane
