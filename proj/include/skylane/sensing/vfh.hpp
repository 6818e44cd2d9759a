#pragma once

#include <optional>
#include <vector>

#include "skylane/dynamics/state.hpp"
#include "skylane/sensing/lidar.hpp"

namespace skylane {

struct HistogramParams {
  double sector_width_deg = 5.0;
  double a = 60.0;          // weight intercept
  double b = 1.0;           // weight slope per meter
  double threshold = 18.0;  // free below this smoothed density
  int smoothing = 2;        // half-width of the smoothing window
  double band_height = 2.0; // |height above/below sensor| kept, m
  double heading_offset = 0.0;  // rad added to sensor azimuth -> world bearing

  int sectors() const;
};

/// Constants used by the shipped scenarios: b = 1, a = 2 * max_range * b,
/// threshold = 0.3 a, smoothing 2, 5 degree sectors.
HistogramParams vfh_defaults(double max_range);

struct PolarHistogram {
  double sector_width_deg = 5.0;
  double threshold = 0.0;
  std::vector<double> density;  // smoothed
  std::vector<double> raw;      // before smoothing

  int sectors() const { return static_cast<int>(density.size()); }
  int sector_of(double bearing) const;
  double sector_center(int k) const;
};

/// Weights each in-band point by max(0, a - b * range) into its bearing
/// sector, then smooths with a centered triangular window of half-width
/// `smoothing` (weights 1 .. smoothing+1 .. 1, normalized to unit sum).
PolarHistogram build_histogram(const PointCloud& cloud, const HistogramParams& params);

struct Steering {
  bool stop = false;
  double bearing = 0.0;  // world bearing, rad CCW from east
  int sector = -1;
};

/// VFH valley selection. Free sectors have density < threshold; valleys are
/// maximal circular runs of free sectors. The valley whose nearest sector is
/// closest to the target is chosen (ties: lower sector index). Inside a wide
/// valley (>= s_max sectors) the heading sits s_max/2 sectors in from the
/// near edge; in a narrow valley it is the valley center. When the target
/// sector itself lies at least s_max/2 sectors from both edges of a wide
/// valley (or every sector is free) the target bearing is returned as is.
Steering select_heading(const PolarHistogram& hist, double target_bearing, int s_max);

struct SpeedPolicy {
  double cruise = 5.0;
  double density_max = 18.0;  // density at which speed reaches the floor
  double min_fraction = 0.2;
};

/// Turns a steering decision into a setpoint. Undeflected steering keeps the
/// original setpoint (speed-limited); a deflection becomes a level velocity
/// command along the steering bearing; stop becomes a zero-velocity hold.
/// The original setpoint's altitude is always preserved.
ControlSetpoint avoidance_override(const ControlSetpoint& setpoint, const Steering& steering,
                                   double target_bearing, double heading_density, const SpeedPolicy& policy);

/// Wraps to [0, 2 pi).
double wrap_bearing(double rad);

}  // namespace skylane
