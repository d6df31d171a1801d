#ifndef TFR_FAN_CHART_HPP
#define TFR_FAN_CHART_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace tfr {

// One period of a fan: nested central bands around the median.
struct FanPoint {
  double year = 0;
  double q025 = 0;
  double q10 = 0;
  double q50 = 0;
  double q90 = 0;
  double q975 = 0;
};

struct FanChartSpec {
  std::string title;
  double present_year = 0;  // dashed vertical marker
  std::vector<FanPoint> past;    // estimation fan (warm colors)
  std::vector<FanPoint> future;  // projection fan (cool colors)
};

// Deterministic SVG: 95% and 80% bands as polygons, median polyline,
// axes with year/TFR ticks and the present marker. Identical input gives
// byte-identical output.
void render_fan_chart(std::ostream& out, const FanChartSpec& spec);

}  // namespace tfr

#endif
