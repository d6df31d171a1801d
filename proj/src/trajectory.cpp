#include "tfr/trajectory.hpp"

#include "tfr/error.hpp"

namespace tfr {

double interpolate(std::span<const double> f, const TimeGrid& grid, double t,
                   bool* clamped) {
  if (f.empty())
    throw ValidationError("interpolate: empty trajectory");
  const auto w = grid.weights_at(t, static_cast<int>(f.size()));
  if (clamped) *clamped = w.clamped;
  const auto l = static_cast<std::size_t>(w.left);
  double v = w.w_left * f[l];
  if (w.w_right != 0.0) v += w.w_right * f[l + 1];
  return v;
}

}  // namespace tfr
