#ifndef TFR_OBSERVATION_HPP
#define TFR_OBSERVATION_HPP

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tfr/time_grid.hpp"

namespace tfr {

enum class Source {
  VR,
  DHS,
  MICS,
  MIS,
  Census,
  Survey,
  SurveyNational,
  Other,
};
constexpr int kNumSources = 8;

enum class Method { Direct, Cohort, Indirect };
constexpr int kNumMethods = 3;

std::string_view to_string(Source s);
std::string_view to_string(Method m);
std::optional<Source> source_from_string(std::string_view s);
std::optional<Method> method_from_string(std::string_view s);

// One TFR estimate from a data source, in children per woman.
struct Observation {
  std::string country;
  double ref_date = 0;      // decimal year the estimate refers to
  double value = 0;
  Source source = Source::Other;
  Method method = Method::Direct;
  std::string study_id;
  double study_end_year = 0;
};

struct ObservationLimits {
  double min_value = 0.0;   // exclusive
  double max_value = 12.0;  // exclusive
};

struct ParseReport {
  std::vector<Observation> observations;
  struct Rejected {
    int line;
    std::string reason;
  };
  std::vector<Rejected> rejected;
  std::vector<std::string> warnings;
};

// Reads the observation CSV (header country,ref_date,value,source,method,
// study_id,study_end_year). Structural problems and out-of-grid dates
// throw; rows violating value invariants are rejected with a line-numbered
// diagnostic and parsing continues.
ParseReport parse_observations(std::istream& in, const TimeGrid& grid,
                               const ObservationLimits& limits = {});

void write_observations(std::ostream& out, std::span<const Observation> obs);

// Per-country five-year reference TFR series, one value per estimation
// period, treated as unbiased.
struct ReferenceSeries {
  std::string country;
  std::vector<double> values;
};

// Reads the reference CSV (header country,period_start_year,value). Every
// country must cover all estimation periods of the grid exactly once.
std::map<std::string, ReferenceSeries> parse_reference_series(
    std::istream& in, const TimeGrid& grid);

void write_reference_series(std::ostream& out,
                            const std::map<std::string, ReferenceSeries>& refs,
                            const TimeGrid& grid);

// Reference value at an arbitrary time: convex combination of the two
// nearest period values, clamped flat outside the span of centers.
double reference_at(const ReferenceSeries& ref, const TimeGrid& grid, double t);

}  // namespace tfr

#endif
