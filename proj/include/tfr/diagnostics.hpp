#ifndef TFR_DIAGNOSTICS_HPP
#define TFR_DIAGNOSTICS_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tfr/inference.hpp"

namespace tfr {

constexpr double kPsrfFlagThreshold = 1.1;

// Split-chain potential scale reduction factor, floored at 1.
double split_psrf(const std::vector<std::vector<double>>& chains);

// Effective sample size across chains, with Geyer's initial positive
// sequence truncation of the autocorrelation sum.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

// Autocorrelations at lags 1..max_lag of a single sequence.
std::vector<double> autocorrelations(std::span<const double> x, int max_lag);

struct DiagnosticsReport {
  struct Row {
    std::string name;
    double psrf;  // NaN when between-chain statistics are unavailable
    double ess;
    double lag1;
    double lag5;
    double lag10;
    bool flagged;
  };
  std::vector<Row> rows;
  bool between_chains = false;
  std::string notice;

  bool any_flagged() const;
};

// Per-scalar convergence summary over every latent TFR value, country
// parameter and global parameter in the sample.
DiagnosticsReport diagnostics(const PosteriorSample& sample);

void write_diagnostics_csv(std::ostream& out, const DiagnosticsReport& report);
void write_diagnostics_text(std::ostream& out, const DiagnosticsReport& report);

}  // namespace tfr

#endif
