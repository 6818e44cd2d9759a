#pragma once

#include "skylane/errors.hpp"
#include "skylane/world/types.hpp"

namespace skylane {

/// Fixed-step simulation clock. Elapsed time is always derived from the
/// integer tick counter, never accumulated.
class SimClock {
 public:
  SimClock() = default;
  SimClock(int ticks_per_second, int physics_substeps)
      : ticks_per_second_(ticks_per_second), substeps_(physics_substeps) {
    if (ticks_per_second <= 0 || physics_substeps <= 0) {
      throw ValidationError("clock: tick rate and substeps must be positive");
    }
  }

  Tick tick() const { return tick_; }
  int ticks_per_second() const { return ticks_per_second_; }
  int physics_substeps() const { return substeps_; }
  double tick_duration() const { return 1.0 / ticks_per_second_; }
  double physics_dt() const { return tick_duration() / substeps_; }
  double elapsed() const { return static_cast<double>(tick_) * tick_duration(); }

  void advance() { ++tick_; }

 private:
  Tick tick_ = 0;
  int ticks_per_second_ = 30;
  int substeps_ = 8;
};

}  // namespace skylane
