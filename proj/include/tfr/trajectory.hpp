#ifndef TFR_TRAJECTORY_HPP
#define TFR_TRAJECTORY_HPP

#include <span>
#include <string>
#include <vector>

#include "tfr/params.hpp"
#include "tfr/time_grid.hpp"

namespace tfr {

// One joint draw of TFR per period center, with its phase labels.
// tau is the period the transition starts from (kBeforeGrid when the
// country entered the grid already declining, kNotReached when no decline
// has been seen); lambda is the first Phase III period or kNotReached.
struct LatentTrajectory {
  static constexpr int kBeforeGrid = -1;
  static constexpr int kNotReached = 1 << 30;

  std::string country;
  std::vector<double> f;
  std::vector<Phase> phase;
  int tau = kNotReached;
  int lambda = kNotReached;
};

// TFR at an arbitrary time, linear between period centers, clamped flat
// outside their span. Throws on an empty trajectory; *clamped reports
// whether clamping occurred.
double interpolate(std::span<const double> f, const TimeGrid& grid, double t,
                   bool* clamped = nullptr);

inline double interpolate(const LatentTrajectory& traj, const TimeGrid& grid,
                          double t, bool* clamped = nullptr) {
  return interpolate(std::span<const double>(traj.f), grid, t, clamped);
}

}  // namespace tfr

#endif
