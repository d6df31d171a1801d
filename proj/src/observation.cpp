#include "tfr/observation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "tfr/csv.hpp"

namespace tfr {

namespace {

constexpr const char* kObsHeader =
    "country,ref_date,value,source,method,study_id,study_end_year";
constexpr const char* kRefHeader = "country,period_start_year,value";

std::string at_line(int line, const std::string& msg) {
  return "line " + std::to_string(line) + ": " + msg;
}

}  // namespace

std::string_view to_string(Source s) {
  switch (s) {
    case Source::VR: return "VR";
    case Source::DHS: return "DHS";
    case Source::MICS: return "MICS";
    case Source::MIS: return "MIS";
    case Source::Census: return "Census";
    case Source::Survey: return "Survey";
    case Source::SurveyNational: return "Survey-National";
    default: return "Other";
  }
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Direct: return "Direct";
    case Method::Cohort: return "Cohort";
    default: return "Indirect";
  }
}

std::optional<Source> source_from_string(std::string_view s) {
  for (int i = 0; i < kNumSources; ++i) {
    const auto src = static_cast<Source>(i);
    if (s == to_string(src)) return src;
  }
  return std::nullopt;
}

std::optional<Method> method_from_string(std::string_view s) {
  for (int i = 0; i < kNumMethods; ++i) {
    const auto m = static_cast<Method>(i);
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

ParseReport parse_observations(std::istream& in, const TimeGrid& grid,
                               const ObservationLimits& limits) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header)
    throw ParseError("observations: empty file");
  {
    std::string joined;
    for (std::size_t i = 0; i < header->size(); ++i) {
      if (i) joined += ',';
      joined += (*header)[i];
    }
    if (joined != kObsHeader)
      throw ParseError(at_line(reader.line(),
                               "observations: expected header '" +
                                   std::string(kObsHeader) + "'"));
  }

  ParseReport report;
  while (auto row = reader.next()) {
    const int line = reader.line();
    if (row->size() != 7)
      throw ParseError(at_line(line, "expected 7 fields, got " +
                                         std::to_string(row->size())));
    Observation obs;
    obs.country = (*row)[0];
    if (obs.country.empty())
      throw ParseError(at_line(line, "empty country"));

    const auto ref_date = csv::to_double((*row)[1]);
    const auto value = csv::to_double((*row)[2]);
    const auto end_year = csv::to_double((*row)[6]);
    if (!ref_date || !value || !end_year)
      throw ParseError(at_line(line, "malformed numeric field"));
    obs.ref_date = *ref_date;
    obs.value = *value;
    obs.study_end_year = *end_year;

    const auto src = source_from_string((*row)[3]);
    if (!src)
      throw ValidationError(at_line(line, "unknown source '" + (*row)[3] + "'"));
    obs.source = *src;
    const auto mth = method_from_string((*row)[4]);
    if (!mth)
      throw ValidationError(at_line(line, "unknown method '" + (*row)[4] + "'"));
    obs.method = *mth;
    obs.study_id = (*row)[5];

    if (!grid.in_estimation_window(obs.ref_date))
      throw ValidationError(at_line(
          line, "ref_date " + csv::num(obs.ref_date) +
                    " outside estimation window [" +
                    std::to_string(grid.start_year()) + ", " +
                    std::to_string(grid.estimation_end()) + "]"));

    if (!(obs.value > limits.min_value && obs.value < limits.max_value)) {
      report.rejected.push_back({line, "value out of range"});
      continue;
    }
    if (obs.ref_date > obs.study_end_year) {
      report.rejected.push_back({line, "ref_date after study end"});
      continue;
    }

    const auto w = grid.weights_at(obs.ref_date, grid.n_estimation_periods());
    if (w.clamped)
      report.warnings.push_back(at_line(
          line, "ref_date " + csv::num(obs.ref_date) +
                    " outside period centers; attached to nearest center"));

    report.observations.push_back(std::move(obs));
  }
  return report;
}

void write_observations(std::ostream& out, std::span<const Observation> obs) {
  out << kObsHeader << "\n";
  for (const auto& o : obs) {
    out << csv::quote_field(o.country) << ',' << csv::num(o.ref_date) << ','
        << csv::num(o.value) << ',' << to_string(o.source) << ','
        << to_string(o.method) << ',' << csv::quote_field(o.study_id) << ','
        << csv::num(o.study_end_year) << "\n";
  }
}

std::map<std::string, ReferenceSeries> parse_reference_series(
    std::istream& in, const TimeGrid& grid) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header)
    throw ParseError("reference series: empty file");
  {
    std::string joined;
    for (std::size_t i = 0; i < header->size(); ++i) {
      if (i) joined += ',';
      joined += (*header)[i];
    }
    if (joined != kRefHeader)
      throw ParseError(at_line(reader.line(),
                               "reference series: expected header '" +
                                   std::string(kRefHeader) + "'"));
  }

  const int n_est = grid.n_estimation_periods();
  std::map<std::string, ReferenceSeries> refs;
  std::map<std::string, std::set<int>> seen;
  while (auto row = reader.next()) {
    const int line = reader.line();
    if (row->size() != 3)
      throw ParseError(at_line(line, "expected 3 fields, got " +
                                         std::to_string(row->size())));
    const std::string country = (*row)[0];
    const auto year = csv::to_long((*row)[1]);
    const auto value = csv::to_double((*row)[2]);
    if (country.empty() || !year || !value)
      throw ParseError(at_line(line, "malformed reference row"));
    const int k = grid.period_of_start(static_cast<int>(*year));
    if (k < 0 || k >= n_est)
      throw ValidationError(at_line(
          line, "period_start_year " + std::to_string(*year) +
                    " is not an estimation period of the grid"));
    if (!(*value > 0))
      throw ValidationError(at_line(line, "reference value must be positive"));

    auto& series = refs[country];
    if (series.values.empty()) {
      series.country = country;
      series.values.assign(n_est, 0.0);
    }
    if (!seen[country].insert(k).second)
      throw ValidationError(at_line(line, "duplicate period for " + country));
    series.values[static_cast<std::size_t>(k)] = *value;
  }

  for (const auto& [country, periods] : seen) {
    if (static_cast<int>(periods.size()) != n_est)
      throw ValidationError("reference series for " + country + " covers " +
                            std::to_string(periods.size()) + " of " +
                            std::to_string(n_est) + " estimation periods");
  }
  return refs;
}

void write_reference_series(std::ostream& out,
                            const std::map<std::string, ReferenceSeries>& refs,
                            const TimeGrid& grid) {
  out << kRefHeader << "\n";
  for (const auto& [country, series] : refs) {
    for (std::size_t k = 0; k < series.values.size(); ++k) {
      out << csv::quote_field(country) << ','
          << grid.period_start(static_cast<int>(k)) << ','
          << csv::num(series.values[k]) << "\n";
    }
  }
}

double reference_at(const ReferenceSeries& ref, const TimeGrid& grid,
                    double t) {
  if (ref.values.empty())
    throw ValidationError("reference series for " + ref.country + " is empty");
  const auto w = grid.weights_at(t, static_cast<int>(ref.values.size()));
  const auto l = static_cast<std::size_t>(w.left);
  double v = w.w_left * ref.values[l];
  if (w.w_right != 0.0) v += w.w_right * ref.values[l + 1];
  return v;
}

}  // namespace tfr
