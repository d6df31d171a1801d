#include "tfr/projection.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "tfr/csv.hpp"
#include "tfr/error.hpp"
#include "tfr/fertility_model.hpp"
#include "tfr/parallel.hpp"
#include "tfr/rng.hpp"

namespace tfr {

double sample_quantile(std::vector<double> values, double p) {
  if (values.empty())
    throw ValidationError("sample_quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0))
    throw ValidationError("sample_quantile: probability outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

ProjectionResult project(const PosteriorSample& sample, const TimeGrid& grid,
                         const ProjectionConfig& config) {
  if (sample.draws.empty())
    throw ValidationError("project: empty posterior sample");
  const int n_future = grid.n_future_periods();
  if (n_future <= 0)
    throw ValidationError("project: horizon does not extend past the "
                          "estimation period");

  ProjectionResult result;
  result.probs = config.probs;
  for (int k = 0; k < n_future; ++k)
    result.future_period_starts.push_back(
        grid.period_start(grid.n_estimation_periods() + k));

  const auto n_draws = static_cast<int>(sample.draws.size());
  const Rng root(config.seed);

  for (std::size_t c = 0; c < sample.countries.size(); ++c) {
    CountryProjection cp;
    cp.country = sample.countries[c];
    cp.trajectories.assign(static_cast<std::size_t>(n_draws), {});
    std::vector<int> clamps(static_cast<std::size_t>(n_draws), 0);
    std::vector<std::array<long, 3>> phases(
        static_cast<std::size_t>(n_draws), std::array<long, 3>{0, 0, 0});

    parallel_for(n_draws, config.parallel, [&](int i) {
      const auto& draw = sample.draws[static_cast<std::size_t>(i)];
      Rng rng = root.child(
          (static_cast<std::uint64_t>(c) << 32) ^ static_cast<std::uint64_t>(i));

      PhaseTracker tracker;
      tracker.reset(sample.f_value(draw, static_cast<int>(c), 0));
      for (int k = 1; k < sample.n_periods; ++k)
        tracker.push(sample.f_value(draw, static_cast<int>(c), k));
      ++phases[static_cast<std::size_t>(i)]
              [static_cast<std::size_t>(tracker.state())];

      auto& out = cp.trajectories[static_cast<std::size_t>(i)];
      out.reserve(static_cast<std::size_t>(n_future));
      simulate_forward(tracker, n_future, draw.params[c], draw.globals,
                       config.f_min, config.f_max, config.max_redraws, rng,
                       out, &clamps[static_cast<std::size_t>(i)]);
    });

    for (int i = 0; i < n_draws; ++i) {
      cp.clamp_events += clamps[static_cast<std::size_t>(i)];
      for (std::size_t p = 0; p < 3; ++p)
        cp.phase_at_present[p] += phases[static_cast<std::size_t>(i)][p];
    }
    result.countries.push_back(std::move(cp));
  }

  // Pointwise quantiles from the full set of trajectories.
  for (const auto& cp : result.countries) {
    std::vector<std::vector<double>> per_period(
        static_cast<std::size_t>(n_future));
    for (const auto& traj : cp.trajectories)
      for (int k = 0; k < n_future; ++k)
        per_period[static_cast<std::size_t>(k)].push_back(
            traj[static_cast<std::size_t>(k)]);
    std::vector<std::vector<double>> q;
    for (auto& values : per_period) {
      std::vector<double> row;
      for (double p : config.probs)
        row.push_back(sample_quantile(values, p));
      q.push_back(std::move(row));
    }
    result.quantiles.push_back(std::move(q));
  }
  return result;
}

QuantileTable summarize(const ProjectionResult& result,
                        const std::vector<double>& probs) {
  if (result.countries.empty())
    throw ValidationError("summarize: empty projection result");
  QuantileTable table;
  table.probs = probs;
  for (const auto& cp : result.countries) {
    if (cp.trajectories.size() < 2)
      throw ValidationError("summarize: need at least 2 trajectories for " +
                            cp.country);
    for (std::size_t k = 0; k < result.future_period_starts.size(); ++k) {
      std::vector<double> values;
      values.reserve(cp.trajectories.size());
      for (const auto& traj : cp.trajectories) values.push_back(traj[k]);
      QuantileRow row;
      row.country = cp.country;
      row.period_start = result.future_period_starts[k];
      for (double p : probs) row.q.push_back(sample_quantile(values, p));
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

QuantileTable summarize_estimation(const PosteriorSample& sample,
                                   const TimeGrid& grid,
                                   const std::vector<double>& probs) {
  if (sample.draws.size() < 2)
    throw ValidationError("summarize_estimation: need at least 2 draws");
  QuantileTable table;
  table.probs = probs;
  for (std::size_t c = 0; c < sample.countries.size(); ++c) {
    for (int k = 0; k < sample.n_periods; ++k) {
      std::vector<double> values;
      values.reserve(sample.draws.size());
      for (const auto& d : sample.draws)
        values.push_back(sample.f_value(d, static_cast<int>(c), k));
      QuantileRow row;
      row.country = sample.countries[c];
      row.period_start = grid.period_start(k);
      for (double p : probs) row.q.push_back(sample_quantile(values, p));
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

void write_trajectories(std::ostream& out, const ProjectionResult& result) {
  out << "country,draw,period,f\n";
  for (const auto& cp : result.countries) {
    for (std::size_t i = 0; i < cp.trajectories.size(); ++i) {
      for (std::size_t k = 0; k < result.future_period_starts.size(); ++k) {
        out << csv::quote_field(cp.country) << ',' << (i + 1) << ','
            << result.future_period_starts[k] << ','
            << csv::num(cp.trajectories[i][k]) << "\n";
      }
    }
  }
}

void write_quantiles(std::ostream& out, const QuantileTable& table) {
  out << "country,period";
  for (double p : table.probs) {
    // 0.025 -> q025, 0.1 -> q10, 0.975 -> q975
    const long milli = std::lround(p * 1000);
    char buf[24];
    if (milli % 10 == 0)
      std::snprintf(buf, sizeof(buf), "%02ld", milli / 10);
    else
      std::snprintf(buf, sizeof(buf), "%03ld", milli);
    out << ",q" << buf;
  }
  out << "\n";
  for (const auto& row : table.rows) {
    out << csv::quote_field(row.country) << ',' << row.period_start;
    for (double v : row.q) out << ',' << csv::num(v);
    out << "\n";
  }
}

QuantileTable read_quantiles(std::istream& in) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header || header->size() < 3 || (*header)[0] != "country")
    throw ParseError("quantiles: bad header");
  QuantileTable table;
  for (std::size_t j = 2; j < header->size(); ++j) {
    const std::string& name = (*header)[j];
    if (name.size() < 2 || name[0] != 'q')
      throw ParseError("quantiles: bad column name " + name);
    const std::string digits = name.substr(1);
    const auto v = csv::to_long(digits);
    if (!v) throw ParseError("quantiles: bad column name " + name);
    double p = static_cast<double>(*v);
    p /= digits.size() >= 3 ? 1000.0 : 100.0;
    table.probs.push_back(p);
  }
  while (auto row = reader.next()) {
    if (row->size() != 2 + table.probs.size())
      throw ParseError("quantiles: line " + std::to_string(reader.line()) +
                       ": wrong field count");
    QuantileRow qr;
    qr.country = (*row)[0];
    const auto year = csv::to_long((*row)[1]);
    if (!year)
      throw ParseError("quantiles: line " + std::to_string(reader.line()) +
                       ": bad period");
    qr.period_start = static_cast<int>(*year);
    for (std::size_t j = 2; j < row->size(); ++j) {
      const auto v = csv::to_double((*row)[j]);
      if (!v)
        throw ParseError("quantiles: line " + std::to_string(reader.line()) +
                         ": bad value");
      qr.q.push_back(*v);
    }
    table.rows.push_back(std::move(qr));
  }
  return table;
}

}  // namespace tfr
