#ifndef TFR_VALIDATION_HPP
#define TFR_VALIDATION_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tfr/bias_model.hpp"
#include "tfr/inference.hpp"
#include "tfr/observation.hpp"
#include "tfr/projection.hpp"

namespace tfr {

// Out-of-sample split. A study whose end year reaches the cutoff is
// removed in full, including its estimates for years before the cutoff.
struct SplitResult {
  std::vector<Observation> train;
  // Held-out truth: per country, (period start year, reference value) for
  // periods at or after the cutoff.
  std::map<std::string, std::vector<std::pair<int, double>>> heldout;
  std::vector<std::string> flagged;  // countries left without training data
};

SplitResult split(std::span<const Observation> obs,
                  const std::map<std::string, ReferenceSeries>& refs,
                  const TimeGrid& grid, int cutoff_year);

struct ValidationReport {
  struct Entry {
    std::string country;
    int period_start;
    double truth;
    double median;
    double abs_error;
    bool in80;
    bool in95;
  };
  std::vector<Entry> entries;
  double mae = 0;
  double coverage80 = 0;
  double coverage95 = 0;
  long n = 0;
};

// Scores a quantile table (columns must include 0.025/0.1/0.5/0.9/0.975)
// against held-out truth values.
ValidationReport score(
    const QuantileTable& predictions,
    const std::map<std::string, std::vector<std::pair<int, double>>>& truth);

void write_validation_report(std::ostream& out, const ValidationReport& r);

// One slot of the synthetic observation design.
struct ObservationSlot {
  double ref_date = 0;
  Source source = Source::Other;
  Method method = Method::Direct;
  std::string study_id;       // empty: one study per slot
  double study_end_year = 0;  // 0: the observation date
};

struct SyntheticTruth {
  std::string country = "SYN";
  double f0 = 6.0;
  CountryParams params;
  GlobalParams globals;
};

struct SyntheticData {
  LatentTrajectory truth;
  std::vector<Observation> observations;
};

// Draws a true trajectory from the process model over the estimation
// periods, then observations y = f(t) + delta + rho * N(0,1) per slot with
// delta/rho resolved from the bias fit.
SyntheticData simulate_synthetic(const SyntheticTruth& truth,
                                 const BiasModelFit& fit,
                                 std::span<const ObservationSlot> design,
                                 const TimeGrid& grid, std::uint64_t seed);

struct CalibrationConfig {
  SyntheticTruth truth;        // globals also parameterize the generator
  bool redraw_params = true;   // new country params from the world
                               // distribution each replication
  std::vector<ObservationSlot> design;
  McmcConfig mcmc;
  PriorConfig prior;
  double psrf_exclude = 1.2;
  std::uint64_t seed = 0;
  bool parallel = true;
};

struct CalibrationReport {
  struct PeriodRow {
    int period_start;
    double coverage80;
    double coverage95;
    double mae;
  };
  std::vector<PeriodRow> periods;
  double coverage80 = 0;
  double coverage95 = 0;
  double mae = 0;
  int n_reps = 0;
  int n_excluded = 0;  // replications dropped for non-convergence
};

// Repeats simulate -> fit -> score; interval coverage is of the true
// trajectory. Replications run on independent seed substreams.
CalibrationReport calibration_study(int n_reps, const CalibrationConfig& cfg,
                                    const BiasModelFit& fit,
                                    const TimeGrid& grid);

void write_calibration_report(std::ostream& out, const CalibrationReport& r);

}  // namespace tfr

#endif
