#ifndef TFR_PROJECTION_HPP
#define TFR_PROJECTION_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tfr/inference.hpp"
#include "tfr/time_grid.hpp"

namespace tfr {

struct ProjectionConfig {
  std::uint64_t seed = 0;
  bool parallel = true;
  int max_redraws = 100;
  double f_min = 0.5;
  double f_max = 18.0;
  std::vector<double> probs = {0.025, 0.1, 0.5, 0.9, 0.975};
};

struct CountryProjection {
  std::string country;
  // One simulated future trajectory per posterior draw.
  std::vector<std::vector<double>> trajectories;
  // Draw counts of the phase at the end of the estimation period.
  std::array<long, 3> phase_at_present{};
  int clamp_events = 0;
};

struct ProjectionResult {
  std::vector<int> future_period_starts;
  std::vector<double> probs;
  std::vector<CountryProjection> countries;
  // quantiles[country][future period][prob], from the same sample so the
  // curves cannot cross.
  std::vector<std::vector<std::vector<double>>> quantiles;
};

// Forward-simulates every posterior draw from the end of the estimation
// period to the horizon, re-deriving the phase of each sampled past
// trajectory and applying the phase rules step by step as the future
// unfolds. Draws use independent seed substreams, so scheduling cannot
// change the result.
ProjectionResult project(const PosteriorSample& sample, const TimeGrid& grid,
                         const ProjectionConfig& config = {});

// Empirical quantile with linear interpolation between order statistics.
double sample_quantile(std::vector<double> values, double p);

struct QuantileRow {
  std::string country;
  int period_start = 0;
  std::vector<double> q;
};

struct QuantileTable {
  std::vector<double> probs;
  std::vector<QuantileRow> rows;
};

// Pointwise quantiles of the projected trajectories; the 0.5 column is the
// point forecast. Requires at least two trajectories.
QuantileTable summarize(const ProjectionResult& result,
                        const std::vector<double>& probs);

// Quantiles of the retained posterior draws of past TFR, same layout.
QuantileTable summarize_estimation(const PosteriorSample& sample,
                                   const TimeGrid& grid,
                                   const std::vector<double>& probs);

void write_trajectories(std::ostream& out, const ProjectionResult& result);
void write_quantiles(std::ostream& out, const QuantileTable& table);
QuantileTable read_quantiles(std::istream& in);

}  // namespace tfr

#endif
