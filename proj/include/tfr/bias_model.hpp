#ifndef TFR_BIAS_MODEL_HPP
#define TFR_BIAS_MODEL_HPP

#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tfr/observation.hpp"
#include "tfr/time_grid.hpp"

namespace tfr {

struct BiasOptions {
  double rho_min = 0.05;  // floor on any fitted error SD
  // Vital-registration rows from these countries bypass the regression and
  // get bias 0 with this fixed error SD.
  double vr_rho = 0.025;
  std::set<std::string> vr_high_quality;
  bool per_country = false;  // also fit each country separately
  bool saturated = false;    // one indicator per source x method cell
  int min_cell_count = 2;    // smaller cells pool into (Other, method)
};

// Deviation of one observation from the reference series.
struct ResidualRow {
  std::string country;
  Source source;
  Method method;
  double z;  // observed minus reference at the observation date
};

std::vector<ResidualRow> residuals(
    std::span<const Observation> obs,
    const std::map<std::string, ReferenceSeries>& refs, const TimeGrid& grid);

// Rows of one source x method design cell, after pooling.
struct CellStats {
  Source source;
  Method method;
  std::vector<double> z;
  int n() const { return static_cast<int>(z.size()); }
};

std::vector<CellStats> group_cells(std::span<const ResidualRow> rows,
                                   int min_cell_count);

struct OlsFit {
  std::vector<double> coef;
  std::vector<double> fitted;  // one value per design cell
  std::vector<std::string> columns;
};

// OLS of the per-row deviations on the data-quality design (intercept plus
// source and method indicators, or the saturated cell indicators). Throws
// on a rank-deficient design, naming the aliased columns.
OlsFit fit_bias(const std::vector<CellStats>& cells, bool saturated);

// Regression of |z - delta_hat| on the same design; fitted values scaled by
// sqrt(pi/2) under the half-normal identity and floored at rho_min.
OlsFit fit_error_sd(const std::vector<CellStats>& cells,
                    const std::vector<double>& delta_per_cell, bool saturated,
                    double rho_min);

struct BiasCell {
  Source source;
  Method method;
  double delta_hat = 0;
  double rho_hat = 0;
  int n = 0;
  double rmse() const;
};

class BiasModelFit {
 public:
  std::vector<BiasCell> table;  // pooled fit, cells in canonical order
  std::vector<double> beta;     // bias regression coefficients
  std::vector<double> gamma;    // error-SD coefficients (x . gamma = rho)
  std::vector<std::string> columns;
  BiasOptions options;
  // Per-country resolved values, only when options.per_country is set.
  std::map<std::tuple<std::string, Source, Method>, std::pair<double, double>>
      per_country;

  struct Resolved {
    double delta;
    double rho;
  };
  // Lookup for one observation's cell; falls back to the (Other, method)
  // catch-all and throws when neither is present.
  Resolved resolve(const std::string& country, Source source,
                   Method method) const;
};

BiasModelFit fit_bias_model(std::span<const Observation> obs,
                            const std::map<std::string, ReferenceSeries>& refs,
                            const TimeGrid& grid,
                            const BiasOptions& options = {});

// Table CSV, layout source,method,delta_hat,rho_hat,rmse,n.
void write_bias_table(std::ostream& out, const BiasModelFit& fit);
BiasModelFit read_bias_table(std::istream& in, const BiasOptions& options = {});

}  // namespace tfr

#endif
