#include "skylane/sensing/vfh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "skylane/errors.hpp"

namespace skylane {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDeg = std::numbers::pi / 180.0;

int circ_dist(int a, int b, int n) {
  const int d = std::abs(a - b) % n;
  return std::min(d, n - d);
}

struct Valley {
  int start = 0;  // first free sector, counterclockwise order
  int width = 0;
};

}  // namespace

double wrap_bearing(double rad) {
  double w = std::fmod(rad, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w -= kTwoPi;
  return w;
}

int HistogramParams::sectors() const {
  const double n = 360.0 / sector_width_deg;
  if (!(sector_width_deg > 0.0) || std::abs(n - std::round(n)) > 1e-9) {
    throw ValidationError("histogram: sector width must divide 360");
  }
  return static_cast<int>(std::lround(n));
}

HistogramParams vfh_defaults(double max_range) {
  HistogramParams p;
  p.b = 1.0;
  p.a = 2.0 * max_range * p.b;
  p.threshold = 0.3 * p.a;
  p.smoothing = 2;
  p.sector_width_deg = 5.0;
  return p;
}

int PolarHistogram::sector_of(double bearing) const {
  const int n = sectors();
  const int k = static_cast<int>(wrap_bearing(bearing) / (sector_width_deg * kDeg));
  return std::clamp(k, 0, n - 1);
}

double PolarHistogram::sector_center(int k) const { return (k + 0.5) * sector_width_deg * kDeg; }

PolarHistogram build_histogram(const PointCloud& cloud, const HistogramParams& params) {
  const int n = params.sectors();
  if (params.smoothing < 0) throw ValidationError("histogram: smoothing must be >= 0");
  PolarHistogram h;
  h.sector_width_deg = params.sector_width_deg;
  h.threshold = params.threshold;
  h.raw.assign(static_cast<std::size_t>(n), 0.0);
  h.density.assign(static_cast<std::size_t>(n), 0.0);

  for (const LidarPoint& p : cloud.points) {
    if (std::abs(p.range * std::sin(p.elevation)) > params.band_height) continue;
    const double w = std::max(0.0, params.a - params.b * p.range);
    h.raw[static_cast<std::size_t>(h.sector_of(p.azimuth + params.heading_offset))] += w;
  }

  const int l = params.smoothing;
  const double norm = static_cast<double>((l + 1) * (l + 1));
  for (int k = 0; k < n; ++k) {
    double acc = 0.0;
    for (int i = -l; i <= l; ++i) {
      const int idx = ((k + i) % n + n) % n;
      acc += (l + 1 - std::abs(i)) * h.raw[static_cast<std::size_t>(idx)];
    }
    h.density[static_cast<std::size_t>(k)] = acc / norm;
  }
  return h;
}

Steering select_heading(const PolarHistogram& hist, double target_bearing, int s_max) {
  const int n = hist.sectors();
  const auto free = [&](int k) { return hist.density[static_cast<std::size_t>(k)] < hist.threshold; };
  const int target = hist.sector_of(target_bearing);

  int blocked = -1;
  int free_count = 0;
  for (int k = 0; k < n; ++k) {
    if (free(k)) {
      ++free_count;
    } else if (blocked < 0) {
      blocked = k;
    }
  }
  if (free_count == 0) return {true, target_bearing, -1};
  if (blocked < 0) return {false, target_bearing, target};

  // Collect valleys walking counterclockwise from a blocked sector.
  std::vector<Valley> valleys;
  for (int step = 1; step <= n; ++step) {
    const int k = (blocked + step) % n;
    if (!free(k)) continue;
    const int prev = (k - 1 + n) % n;
    if (free(prev)) {
      ++valleys.back().width;
    } else {
      valleys.push_back({k, 1});
    }
  }

  const Valley* best = nullptr;
  int best_dist = n + 1;
  int best_near = -1;
  for (const Valley& v : valleys) {
    const int end = (v.start + v.width - 1) % n;
    const int offset = ((target - v.start) % n + n) % n;
    int near, dist;
    if (offset < v.width) {
      near = target;
      dist = 0;
    } else {
      const int ds = circ_dist(target, v.start, n);
      const int de = circ_dist(target, end, n);
      if (ds < de || (ds == de && v.start < end)) {
        near = v.start;
        dist = ds;
      } else {
        near = end;
        dist = de;
      }
    }
    if (dist < best_dist || (dist == best_dist && near < best_near)) {
      best = &v;
      best_dist = dist;
      best_near = near;
    }
  }

  const Valley& v = *best;
  const int half = s_max / 2;
  const double width_rad = hist.sector_width_deg * kDeg;
  if (v.width < s_max) {
    const int k = (v.start + v.width / 2) % n;
    return {false, wrap_bearing((v.start + 0.5 * v.width) * width_rad), k};
  }
  const int from_start = ((best_near - v.start) % n + n) % n;
  const int to_end = v.width - 1 - from_start;
  int k;
  if (best_dist == 0) {
    if (from_start >= half && to_end >= half) return {false, target_bearing, target};
    k = from_start < half ? (v.start + half) % n : (v.start + v.width - 1 - half + n) % n;
  } else {
    k = best_near == v.start ? (v.start + half) % n : (v.start + v.width - 1 - half + n) % n;
  }
  return {false, hist.sector_center(k), k};
}

ControlSetpoint avoidance_override(const ControlSetpoint& sp, const Steering& steering, double target_bearing,
                                   double heading_density, const SpeedPolicy& policy) {
  const double altitude = sp.mode == SetpointMode::kVelocity && sp.hold_altitude ? *sp.hold_altitude : sp.target.z();
  ControlSetpoint out;
  out.yaw = sp.yaw;
  out.hold_altitude = altitude;
  out.mode = SetpointMode::kVelocity;
  if (steering.stop) {
    out.target = Vec3::Zero();
    out.speed_limit = policy.cruise;
    return out;
  }
  const double ratio = std::clamp(heading_density / policy.density_max, 0.0, 1.0);
  const double speed = policy.cruise * std::max(policy.min_fraction, 1.0 - ratio);
  if (steering.bearing == target_bearing) {
    ControlSetpoint same = sp;
    same.speed_limit = std::min(sp.speed_limit, speed);
    return same;
  }
  out.target = Vec3(std::cos(steering.bearing), std::sin(steering.bearing), 0.0) * speed;
  out.speed_limit = speed;
  return out;
}

}  // namespace skylane
