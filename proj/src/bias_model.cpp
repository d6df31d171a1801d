#include "tfr/bias_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "tfr/csv.hpp"
#include "tfr/error.hpp"

namespace tfr {

namespace {

constexpr double kSqrtHalfPi = 1.2533141373155003;  // sqrt(pi/2)

using CellKey = std::pair<Source, Method>;

// Design matrix over the given cells. Additive: intercept + indicators for
// every non-baseline source and method level present. Saturated: one
// indicator per cell.
struct Design {
  Eigen::MatrixXd x;  // cells x columns
  std::vector<std::string> columns;
};

Design build_design(const std::vector<CellStats>& cells, bool saturated) {
  Design d;
  const int n = static_cast<int>(cells.size());
  if (saturated) {
    d.x = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      d.x(i, i) = 1.0;
      d.columns.push_back("cell:" + std::string(to_string(cells[i].source)) +
                          "/" + std::string(to_string(cells[i].method)));
    }
    return d;
  }
  std::vector<Source> sources;
  std::vector<Method> methods;
  for (const auto& c : cells) {
    if (std::find(sources.begin(), sources.end(), c.source) == sources.end())
      sources.push_back(c.source);
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end())
      methods.push_back(c.method);
  }
  std::sort(sources.begin(), sources.end());
  std::sort(methods.begin(), methods.end());

  const int p = 1 + static_cast<int>(sources.size() + methods.size()) - 2;
  d.x = Eigen::MatrixXd::Zero(n, p);
  d.columns.push_back("intercept");
  for (std::size_t j = 1; j < sources.size(); ++j)
    d.columns.push_back("source:" + std::string(to_string(sources[j])));
  for (std::size_t j = 1; j < methods.size(); ++j)
    d.columns.push_back("method:" + std::string(to_string(methods[j])));

  for (int i = 0; i < n; ++i) {
    d.x(i, 0) = 1.0;
    int col = 1;
    for (std::size_t j = 1; j < sources.size(); ++j, ++col)
      if (cells[i].source == sources[j]) d.x(i, col) = 1.0;
    for (std::size_t j = 1; j < methods.size(); ++j, ++col)
      if (cells[i].method == methods[j]) d.x(i, col) = 1.0;
  }
  return d;
}

// Weighted least squares of per-cell responses, weights = cell counts.
// Equivalent to row-level OLS because covariates are constant within cells.
OlsFit solve_wls(const std::vector<CellStats>& cells,
                 const std::vector<double>& response, bool saturated) {
  const Design design = build_design(cells, saturated);
  const int n = static_cast<int>(cells.size());
  const int p = static_cast<int>(design.columns.size());

  Eigen::MatrixXd a(n, p);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    const double sw = std::sqrt(static_cast<double>(cells[i].n()));
    a.row(i) = design.x.row(i) * sw;
    b(i) = response[static_cast<std::size_t>(i)] * sw;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    const auto perm = qr.colsPermutation().indices();
    std::string aliased;
    for (int j = qr.rank(); j < p; ++j) {
      if (!aliased.empty()) aliased += ", ";
      aliased += design.columns[static_cast<std::size_t>(perm[j])];
    }
    throw ValidationError("bias model: rank-deficient design; aliased "
                          "columns: " + aliased);
  }

  OlsFit fit;
  Eigen::VectorXd coef = qr.solve(b);
  Eigen::VectorXd fitted = design.x * coef;
  fit.coef.assign(coef.data(), coef.data() + p);
  fit.fitted.assign(fitted.data(), fitted.data() + n);
  fit.columns = design.columns;
  return fit;
}

}  // namespace

std::vector<ResidualRow> residuals(
    std::span<const Observation> obs,
    const std::map<std::string, ReferenceSeries>& refs, const TimeGrid& grid) {
  std::vector<ResidualRow> rows;
  rows.reserve(obs.size());
  for (const auto& o : obs) {
    const auto it = refs.find(o.country);
    if (it == refs.end())
      throw ValidationError("residuals: no reference series for country " +
                            o.country);
    rows.push_back({o.country, o.source, o.method,
                    o.value - reference_at(it->second, grid, o.ref_date)});
  }
  return rows;
}

std::vector<CellStats> group_cells(std::span<const ResidualRow> rows,
                                   int min_cell_count) {
  std::map<CellKey, CellStats> cells;
  for (const auto& r : rows) {
    auto& cell = cells[{r.source, r.method}];
    cell.source = r.source;
    cell.method = r.method;
    cell.z.push_back(r.z);
  }
  // Pool undersized cells into the catch-all of the same method type.
  for (auto it = cells.begin(); it != cells.end();) {
    if (it->first.first != Source::Other && it->second.n() < min_cell_count) {
      auto& other = cells[{Source::Other, it->first.second}];
      other.source = Source::Other;
      other.method = it->first.second;
      other.z.insert(other.z.end(), it->second.z.begin(), it->second.z.end());
      it = cells.erase(it);
    } else {
      ++it;
    }
  }
  std::vector<CellStats> out;
  out.reserve(cells.size());
  for (auto& [key, cell] : cells) out.push_back(std::move(cell));
  return out;
}

OlsFit fit_bias(const std::vector<CellStats>& cells, bool saturated) {
  if (cells.empty())
    throw ValidationError("fit_bias: no design cells");
  std::vector<double> means;
  means.reserve(cells.size());
  for (const auto& c : cells)
    means.push_back(std::accumulate(c.z.begin(), c.z.end(), 0.0) / c.n());
  return solve_wls(cells, means, saturated);
}

OlsFit fit_error_sd(const std::vector<CellStats>& cells,
                    const std::vector<double>& delta_per_cell, bool saturated,
                    double rho_min) {
  if (cells.size() != delta_per_cell.size())
    throw ValidationError("fit_error_sd: cell/delta size mismatch");
  std::vector<double> abs_dev;
  abs_dev.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    double s = 0;
    for (double z : cells[i].z) s += std::fabs(z - delta_per_cell[i]);
    abs_dev.push_back(s / cells[i].n());
  }
  OlsFit fit = solve_wls(cells, abs_dev, saturated);
  for (auto& c : fit.coef) c *= kSqrtHalfPi;
  for (auto& f : fit.fitted) f = std::max(rho_min, f * kSqrtHalfPi);
  return fit;
}

double BiasCell::rmse() const {
  return std::sqrt(delta_hat * delta_hat + rho_hat * rho_hat);
}

BiasModelFit::Resolved BiasModelFit::resolve(const std::string& country,
                                             Source source,
                                             Method method) const {
  if (source == Source::VR && options.vr_high_quality.count(country))
    return {0.0, options.vr_rho};
  if (options.per_country) {
    auto it = per_country.find({country, source, method});
    if (it != per_country.end())
      return {it->second.first, it->second.second};
  }
  for (const auto& key : {std::pair{source, method},
                         std::pair{Source::Other, method}}) {
    for (const auto& cell : table)
      if (cell.source == key.first && cell.method == key.second)
        return {cell.delta_hat, cell.rho_hat};
  }
  throw ValidationError("bias model: unresolved cell " +
                        std::string(to_string(source)) + "/" +
                        std::string(to_string(method)));
}

BiasModelFit fit_bias_model(std::span<const Observation> obs,
                            const std::map<std::string, ReferenceSeries>& refs,
                            const TimeGrid& grid, const BiasOptions& options) {
  if (obs.empty())
    throw ValidationError("fit_bias_model: no observations");

  const auto all_rows = residuals(obs, refs, grid);
  std::vector<ResidualRow> rows;
  rows.reserve(all_rows.size());
  for (const auto& r : all_rows) {
    if (r.source == Source::VR && options.vr_high_quality.count(r.country))
      continue;  // fixed values, kept out of the regression
    rows.push_back(r);
  }
  if (rows.empty())
    throw ValidationError("fit_bias_model: no observations outside "
                          "designated vital-registration series");

  BiasModelFit fit;
  fit.options = options;

  const auto cells = group_cells(rows, options.min_cell_count);
  OlsFit bias = fit_bias(cells, options.saturated);
  OlsFit err =
      fit_error_sd(cells, bias.fitted, options.saturated, options.rho_min);
  fit.beta = std::move(bias.coef);
  fit.gamma = std::move(err.coef);
  fit.columns = std::move(bias.columns);
  for (std::size_t i = 0; i < cells.size(); ++i)
    fit.table.push_back({cells[i].source, cells[i].method, bias.fitted[i],
                         err.fitted[i], cells[i].n()});

  if (options.per_country) {
    std::map<std::string, std::vector<ResidualRow>> by_country;
    for (const auto& r : rows) by_country[r.country].push_back(r);
    for (const auto& [country, crows] : by_country) {
      const auto ccells = group_cells(crows, options.min_cell_count);
      OlsFit cbias = fit_bias(ccells, options.saturated);
      OlsFit cerr = fit_error_sd(ccells, cbias.fitted, options.saturated,
                                 options.rho_min);
      for (std::size_t i = 0; i < ccells.size(); ++i)
        fit.per_country[{country, ccells[i].source, ccells[i].method}] = {
            cbias.fitted[i], cerr.fitted[i]};
    }
  }
  return fit;
}

void write_bias_table(std::ostream& out, const BiasModelFit& fit) {
  out << "source,method,delta_hat,rho_hat,rmse,n\n";
  for (const auto& cell : fit.table) {
    out << to_string(cell.source) << ',' << to_string(cell.method) << ','
        << csv::num(cell.delta_hat) << ',' << csv::num(cell.rho_hat) << ','
        << csv::num(cell.rmse()) << ',' << cell.n << "\n";
  }
}

BiasModelFit read_bias_table(std::istream& in, const BiasOptions& options) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header || header->size() != 6 || (*header)[0] != "source")
    throw ParseError("bias table: bad header");
  BiasModelFit fit;
  fit.options = options;
  while (auto row = reader.next()) {
    if (row->size() != 6)
      throw ParseError("bias table: line " + std::to_string(reader.line()) +
                       ": expected 6 fields");
    const auto src = source_from_string((*row)[0]);
    const auto mth = method_from_string((*row)[1]);
    const auto delta = csv::to_double((*row)[2]);
    const auto rho = csv::to_double((*row)[3]);
    const auto n = csv::to_long((*row)[5]);
    if (!src || !mth || !delta || !rho || !n)
      throw ParseError("bias table: line " + std::to_string(reader.line()) +
                       ": malformed row");
    fit.table.push_back(
        {*src, *mth, *delta, *rho, static_cast<int>(*n)});
  }
  if (fit.table.empty())
    throw ValidationError("bias table: no cells");
  return fit;
}

}  // namespace tfr
