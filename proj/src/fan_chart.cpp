#include "tfr/fan_chart.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "tfr/csv.hpp"
#include "tfr/error.hpp"

namespace tfr {

namespace {

constexpr double kWidth = 760;
constexpr double kHeight = 460;
constexpr double kLeft = 56;
constexpr double kRight = 20;
constexpr double kTop = 36;
constexpr double kBottom = 44;

constexpr const char* kPastBand95 = "#f6c9a8";
constexpr const char* kPastBand80 = "#ef9e66";
constexpr const char* kPastMedian = "#c2551b";
constexpr const char* kFutureBand95 = "#bcd7ee";
constexpr const char* kFutureBand80 = "#7fb2dd";
constexpr const char* kFutureMedian = "#1f62a0";

struct Scale {
  double year_lo, year_hi, tfr_lo, tfr_hi;

  double x(double year) const {
    return kLeft + (year - year_lo) / (year_hi - year_lo) *
                       (kWidth - kLeft - kRight);
  }
  double y(double tfr) const {
    return kHeight - kBottom -
           (tfr - tfr_lo) / (tfr_hi - tfr_lo) * (kHeight - kTop - kBottom);
  }
};

std::string pt(double v) { return csv::fixed(v, 2); }

void band(std::ostream& out, const Scale& s,
          const std::vector<FanPoint>& points, double FanPoint::*lo,
          double FanPoint::*hi, const char* fill) {
  if (points.empty()) return;
  out << "<path fill=\"" << fill << "\" stroke=\"none\" d=\"";
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << (i == 0 ? "M" : "L") << pt(s.x(points[i].year)) << ' '
        << pt(s.y(points[i].*hi));
  }
  for (std::size_t i = points.size(); i-- > 0;) {
    out << "L" << pt(s.x(points[i].year)) << ' ' << pt(s.y(points[i].*lo));
  }
  out << "Z\"/>\n";
}

void median_line(std::ostream& out, const Scale& s,
                 const std::vector<FanPoint>& points, const char* color) {
  if (points.empty()) return;
  out << "<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i) out << ' ';
    out << pt(s.x(points[i].year)) << ',' << pt(s.y(points[i].q50));
  }
  out << "\"/>\n";
}

}  // namespace

void render_fan_chart(std::ostream& out, const FanChartSpec& spec) {
  if (spec.past.empty() && spec.future.empty())
    throw ValidationError("render_fan_chart: nothing to draw");

  Scale s{1e300, -1e300, 0.0, -1e300};
  auto widen = [&](const std::vector<FanPoint>& points) {
    for (const auto& p : points) {
      s.year_lo = std::min(s.year_lo, p.year);
      s.year_hi = std::max(s.year_hi, p.year);
      s.tfr_hi = std::max(s.tfr_hi, p.q975);
    }
  };
  widen(spec.past);
  widen(spec.future);
  if (s.year_hi <= s.year_lo) s.year_hi = s.year_lo + 1;
  s.tfr_hi = std::max(1.0, s.tfr_hi * 1.08);

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
      << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";

  // Axes and ticks.
  const int year_step = (s.year_hi - s.year_lo) > 60 ? 20 : 10;
  const int first_tick =
      static_cast<int>(std::ceil(s.year_lo / year_step)) * year_step;
  for (int year = first_tick; year <= static_cast<int>(s.year_hi);
       year += year_step) {
    const double x = s.x(year);
    out << "<line x1=\"" << pt(x) << "\" y1=\"" << pt(kHeight - kBottom)
        << "\" x2=\"" << pt(x) << "\" y2=\"" << pt(kHeight - kBottom + 5)
        << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << pt(x) << "\" y=\"" << pt(kHeight - kBottom + 20)
        << "\" font-size=\"11\" text-anchor=\"middle\" fill=\"#444\">" << year
        << "</text>\n";
  }
  for (int tfr = 0; tfr <= static_cast<int>(s.tfr_hi); ++tfr) {
    const double y = s.y(tfr);
    out << "<line x1=\"" << pt(kLeft) << "\" y1=\"" << pt(y) << "\" x2=\""
        << pt(kWidth - kRight) << "\" y2=\"" << pt(y)
        << "\" stroke=\"#e4e4e4\"/>\n";
    out << "<text x=\"" << pt(kLeft - 8) << "\" y=\"" << pt(y + 4)
        << "\" font-size=\"11\" text-anchor=\"end\" fill=\"#444\">" << tfr
        << "</text>\n";
  }
  out << "<line x1=\"" << pt(kLeft) << "\" y1=\"" << pt(kTop) << "\" x2=\""
      << pt(kLeft) << "\" y2=\"" << pt(kHeight - kBottom)
      << "\" stroke=\"#444\"/>\n";
  out << "<line x1=\"" << pt(kLeft) << "\" y1=\"" << pt(kHeight - kBottom)
      << "\" x2=\"" << pt(kWidth - kRight) << "\" y2=\""
      << pt(kHeight - kBottom) << "\" stroke=\"#444\"/>\n";

  band(out, s, spec.past, &FanPoint::q025, &FanPoint::q975, kPastBand95);
  band(out, s, spec.past, &FanPoint::q10, &FanPoint::q90, kPastBand80);
  band(out, s, spec.future, &FanPoint::q025, &FanPoint::q975, kFutureBand95);
  band(out, s, spec.future, &FanPoint::q10, &FanPoint::q90, kFutureBand80);
  median_line(out, s, spec.past, kPastMedian);
  median_line(out, s, spec.future, kFutureMedian);

  if (spec.present_year > s.year_lo && spec.present_year < s.year_hi) {
    const double x = s.x(spec.present_year);
    out << "<line x1=\"" << pt(x) << "\" y1=\"" << pt(kTop) << "\" x2=\""
        << pt(x) << "\" y2=\"" << pt(kHeight - kBottom)
        << "\" stroke=\"#666\" stroke-dasharray=\"5,4\"/>\n";
  }

  out << "<text x=\"" << pt(kLeft) << "\" y=\"" << pt(kTop - 12)
      << "\" font-size=\"14\" fill=\"#222\">" << spec.title << "</text>\n";
  out << "<text x=\"" << pt(14) << "\" y=\"" << pt(kTop + 2)
      << "\" font-size=\"11\" fill=\"#444\">TFR</text>\n";
  out << "</svg>\n";
}

}  // namespace tfr
