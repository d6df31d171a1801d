#ifndef TFR_TIME_GRID_HPP
#define TFR_TIME_GRID_HPP

#include <string>

#include "tfr/error.hpp"

namespace tfr {

// Five-year estimation/projection grid. A period (t, t+5) is summarized by
// its center, January 1 of year t+3, so the center of period k is
// start_year + 3 + 5k as a decimal year.
class TimeGrid {
 public:
  static constexpr int kPeriodLen = 5;
  static constexpr int kCenterOffset = 3;

  TimeGrid(int start_year, int estimation_end, int horizon_year)
      : start_year_(start_year),
        estimation_end_(estimation_end),
        horizon_year_(horizon_year) {
    auto bad = [&](const std::string& what) {
      throw ValidationError("TimeGrid: " + what);
    };
    if (!(start_year_ < estimation_end_ && estimation_end_ < horizon_year_))
      bad("years must satisfy start < estimation end < horizon");
    if ((estimation_end_ - start_year_) % kPeriodLen != 0)
      bad("estimation end must lie on a period boundary");
    if ((horizon_year_ - start_year_) % kPeriodLen != 0)
      bad("horizon must lie on a period boundary");
  }

  int start_year() const { return start_year_; }
  int estimation_end() const { return estimation_end_; }
  int horizon_year() const { return horizon_year_; }

  int n_periods() const { return (horizon_year_ - start_year_) / kPeriodLen; }
  int n_estimation_periods() const {
    return (estimation_end_ - start_year_) / kPeriodLen;
  }
  int n_future_periods() const {
    return n_periods() - n_estimation_periods();
  }

  int period_start(int k) const { return start_year_ + kPeriodLen * k; }
  double center(int k) const {
    return static_cast<double>(start_year_ + kCenterOffset + kPeriodLen * k);
  }

  // Period index whose start year is `year`, or -1.
  int period_of_start(int year) const {
    const int off = year - start_year_;
    if (off < 0 || off % kPeriodLen != 0) return -1;
    const int k = off / kPeriodLen;
    return k < n_periods() ? k : -1;
  }

  bool in_estimation_window(double t) const {
    return t >= start_year_ && t <= estimation_end_;
  }

  // Linear-interpolation weights of time t between the two nearest period
  // centers of a series with n_values periods. Times outside the span of
  // centers are clamped flat onto the nearest center and flagged.
  struct Weights {
    int left;
    double w_left;
    double w_right;
    bool clamped;
  };
  Weights weights_at(double t, int n_values) const {
    if (n_values <= 0)
      throw ValidationError("weights_at: empty series");
    if (n_values == 1 || t <= center(0)) {
      return {0, 1.0, 0.0, t < center(0) || n_values == 1};
    }
    if (t >= center(n_values - 1)) {
      return {n_values - 2, 0.0, 1.0, t > center(n_values - 1)};
    }
    int l = static_cast<int>((t - center(0)) / kPeriodLen);
    if (l > n_values - 2) l = n_values - 2;
    const double wl = (center(l + 1) - t) / kPeriodLen;
    return {l, wl, 1.0 - wl, false};
  }

 private:
  int start_year_;
  int estimation_end_;
  int horizon_year_;
};

}  // namespace tfr

#endif
