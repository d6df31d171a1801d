#include "tfr/validation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "tfr/csv.hpp"
#include "tfr/diagnostics.hpp"
#include "tfr/error.hpp"
#include "tfr/fertility_model.hpp"
#include "tfr/parallel.hpp"
#include "tfr/rng.hpp"

namespace tfr {

SplitResult split(std::span<const Observation> obs,
                  const std::map<std::string, ReferenceSeries>& refs,
                  const TimeGrid& grid, int cutoff_year) {
  if (grid.period_of_start(cutoff_year) < 0 &&
      cutoff_year != grid.horizon_year())
    throw ValidationError("split: cutoff must lie on a period boundary");

  // A study is identified by (country, study_id); if any of its rows ends
  // at or past the cutoff, the whole study goes.
  std::set<std::pair<std::string, std::string>> removed;
  for (const auto& o : obs)
    if (o.study_end_year >= cutoff_year)
      removed.insert({o.country, o.study_id});

  SplitResult result;
  std::set<std::string> with_train;
  std::set<std::string> all_countries;
  for (const auto& o : obs) {
    all_countries.insert(o.country);
    if (removed.count({o.country, o.study_id})) continue;
    with_train.insert(o.country);
    result.train.push_back(o);
  }
  for (const auto& c : all_countries)
    if (!with_train.count(c)) result.flagged.push_back(c);

  const int first_heldout = (cutoff_year - grid.start_year()) / 5;
  for (const auto& [country, series] : refs) {
    std::vector<std::pair<int, double>> rows;
    for (int k = first_heldout;
         k < static_cast<int>(series.values.size()); ++k)
      rows.emplace_back(grid.period_start(k),
                        series.values[static_cast<std::size_t>(k)]);
    if (!rows.empty()) result.heldout[country] = std::move(rows);
  }
  return result;
}

namespace {

int prob_column(const QuantileTable& table, double p) {
  for (std::size_t j = 0; j < table.probs.size(); ++j)
    if (std::fabs(table.probs[j] - p) < 1e-9) return static_cast<int>(j);
  throw ValidationError("score: quantile table lacks the " + csv::num(p) +
                        " column");
}

}  // namespace

ValidationReport score(
    const QuantileTable& predictions,
    const std::map<std::string, std::vector<std::pair<int, double>>>& truth) {
  const int q025 = prob_column(predictions, 0.025);
  const int q10 = prob_column(predictions, 0.1);
  const int q50 = prob_column(predictions, 0.5);
  const int q90 = prob_column(predictions, 0.9);
  const int q975 = prob_column(predictions, 0.975);

  std::map<std::pair<std::string, int>, const QuantileRow*> by_key;
  std::set<std::string> predicted_countries;
  for (const auto& row : predictions.rows) {
    by_key[{row.country, row.period_start}] = &row;
    predicted_countries.insert(row.country);
  }
  for (const auto& c : predicted_countries)
    if (!truth.count(c))
      throw ValidationError("score: no truth for predicted country " + c);

  ValidationReport report;
  double abs_sum = 0;
  long hits80 = 0, hits95 = 0;
  for (const auto& [country, rows] : truth) {
    for (const auto& [year, value] : rows) {
      const auto it = by_key.find({country, year});
      if (it == by_key.end())
        throw ValidationError("score: no prediction for " + country +
                              " period " + std::to_string(year));
      const auto& q = it->second->q;
      ValidationReport::Entry e;
      e.country = country;
      e.period_start = year;
      e.truth = value;
      e.median = q[static_cast<std::size_t>(q50)];
      e.abs_error = std::fabs(e.median - value);
      e.in80 = value >= q[static_cast<std::size_t>(q10)] &&
               value <= q[static_cast<std::size_t>(q90)];
      e.in95 = value >= q[static_cast<std::size_t>(q025)] &&
               value <= q[static_cast<std::size_t>(q975)];
      abs_sum += e.abs_error;
      hits80 += e.in80 ? 1 : 0;
      hits95 += e.in95 ? 1 : 0;
      report.entries.push_back(std::move(e));
    }
  }
  report.n = static_cast<long>(report.entries.size());
  if (report.n == 0)
    throw ValidationError("score: nothing to score");
  report.mae = abs_sum / static_cast<double>(report.n);
  report.coverage80 = static_cast<double>(hits80) / static_cast<double>(report.n);
  report.coverage95 = static_cast<double>(hits95) / static_cast<double>(report.n);
  return report;
}

void write_validation_report(std::ostream& out, const ValidationReport& r) {
  out << "country,period,truth,median,abs_error,in80,in95\n";
  for (const auto& e : r.entries) {
    out << csv::quote_field(e.country) << ',' << e.period_start << ','
        << csv::num(e.truth) << ',' << csv::num(e.median) << ','
        << csv::num(e.abs_error) << ',' << (e.in80 ? 1 : 0) << ','
        << (e.in95 ? 1 : 0) << "\n";
  }
  out << "aggregate,,,," << csv::num(r.mae) << ','
      << csv::num(r.coverage80) << ',' << csv::num(r.coverage95) << "\n";
}

SyntheticData simulate_synthetic(const SyntheticTruth& truth,
                                 const BiasModelFit& fit,
                                 std::span<const ObservationSlot> design,
                                 const TimeGrid& grid, std::uint64_t seed) {
  Rng rng{seed};
  const int k = grid.n_estimation_periods();

  SyntheticData data;
  data.truth.country = truth.country;
  data.truth.f.push_back(truth.f0);
  PhaseTracker tracker;
  tracker.reset(truth.f0);
  simulate_forward(tracker, k - 1, truth.params, truth.globals, kTfrFloor,
                   18.0, 100, rng, data.truth.f);
  const auto phases = detect_phases(data.truth.f);
  data.truth.phase = phases.labels;
  data.truth.tau = phases.tau;
  data.truth.lambda = phases.lambda;

  int slot_id = 0;
  for (const auto& slot : design) {
    const auto resolved =
        fit.resolve(truth.country, slot.source, slot.method);
    Observation o;
    o.country = truth.country;
    o.ref_date = slot.ref_date;
    o.value = interpolate(data.truth, grid, slot.ref_date) + resolved.delta +
              resolved.rho * rng.normal();
    o.source = slot.source;
    o.method = slot.method;
    o.study_id = slot.study_id.empty()
                     ? "syn-" + std::to_string(++slot_id)
                     : slot.study_id;
    o.study_end_year =
        slot.study_end_year > 0 ? slot.study_end_year : slot.ref_date;
    data.observations.push_back(std::move(o));
  }
  return data;
}

CalibrationReport calibration_study(int n_reps, const CalibrationConfig& cfg,
                                    const BiasModelFit& fit,
                                    const TimeGrid& grid) {
  if (n_reps < 1)
    throw ValidationError("calibration_study: n_reps must be >= 1");
  const int k = grid.n_estimation_periods();
  const Rng root(cfg.seed);

  struct RepOutcome {
    bool excluded = false;
    std::vector<double> truth;
    std::vector<std::array<double, 4>> bounds;  // q10 q90 q025 q975
    std::vector<double> median;
  };
  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(n_reps));

  parallel_for(n_reps, cfg.parallel, [&](int rep) {
    Rng rng = root.child(static_cast<std::uint64_t>(rep) + 101);
    SyntheticTruth truth = cfg.truth;
    if (cfg.redraw_params) {
      // Fresh country parameters from the world distribution, matching the
      // supports the sampler uses.
      truth.params.delta = cfg.truth.params.delta;
      for (std::size_t j = 0; j < 4; ++j)
        truth.params.delta[j] =
            rng.trunc_normal(truth.globals.psi.loc[j],
                             truth.globals.psi.scale[j], 0.0,
                             cfg.prior.delta_max);
      truth.params.d =
          rng.trunc_normal(truth.globals.psi.loc[4], truth.globals.psi.scale[4],
                           cfg.prior.d_min, cfg.prior.d_max);
      truth.params.mu = rng.trunc_normal(truth.globals.mu_bar,
                                         truth.globals.sigma_mu, 1e-6,
                                         cfg.prior.f_max);
      truth.params.ar = rng.trunc_normal(truth.globals.rho_bar,
                                         truth.globals.sigma_rho, 1e-9,
                                         1.0 - 1e-9);
    }

    const std::uint64_t data_seed =
        splitmix64(cfg.seed ^ (static_cast<std::uint64_t>(rep) * 2654435761ULL));
    const SyntheticData data =
        simulate_synthetic(truth, fit, cfg.design, grid, data_seed);

    // The reference only seeds the chain start here; a flat series keeps
    // the sampled truth out of the fit entirely.
    std::map<std::string, ReferenceSeries> refs;
    refs[truth.country] = {
        truth.country,
        std::vector<double>(static_cast<std::size_t>(k), truth.f0)};

    ModelData model = prepare_model_data(data.observations, refs, fit, grid,
                                         cfg.prior);
    InitBundle init;
    init.globals = truth.globals;

    McmcConfig mcmc = cfg.mcmc;
    mcmc.seed = splitmix64(cfg.seed + 77) ^ static_cast<std::uint64_t>(rep);
    mcmc.parallel_chains = false;  // replications already run in parallel

    auto& outcome = outcomes[static_cast<std::size_t>(rep)];
    PosteriorSample sample;
    try {
      sample = run_mcmc(model, mcmc, init);
    } catch (const Error&) {
      outcome.excluded = true;
      return;
    }

    if (mcmc.n_chains >= 2) {
      double worst = 1.0;
      std::vector<std::vector<double>> chains(
          static_cast<std::size_t>(mcmc.n_chains));
      for (int period = 0; period < k; ++period) {
        for (auto& c : chains) c.clear();
        for (const auto& d : sample.draws)
          chains[static_cast<std::size_t>(d.chain - 1)].push_back(
              sample.f_value(d, 0, period));
        worst = std::max(worst, split_psrf(chains));
      }
      if (worst > cfg.psrf_exclude) {
        outcome.excluded = true;
        return;
      }
    }

    outcome.truth = data.truth.f;
    for (int period = 0; period < k; ++period) {
      std::vector<double> values;
      values.reserve(sample.draws.size());
      for (const auto& d : sample.draws)
        values.push_back(sample.f_value(d, 0, period));
      outcome.bounds.push_back({sample_quantile(values, 0.1),
                                sample_quantile(values, 0.9),
                                sample_quantile(values, 0.025),
                                sample_quantile(values, 0.975)});
      outcome.median.push_back(sample_quantile(values, 0.5));
    }
  });

  CalibrationReport report;
  std::vector<long> hits80(static_cast<std::size_t>(k), 0);
  std::vector<long> hits95(static_cast<std::size_t>(k), 0);
  std::vector<double> abs_err(static_cast<std::size_t>(k), 0.0);
  long included = 0;
  for (const auto& outcome : outcomes) {
    if (outcome.excluded) {
      ++report.n_excluded;
      continue;
    }
    ++included;
    for (int period = 0; period < k; ++period) {
      const auto kk = static_cast<std::size_t>(period);
      const double t = outcome.truth[kk];
      if (t >= outcome.bounds[kk][0] && t <= outcome.bounds[kk][1])
        ++hits80[kk];
      if (t >= outcome.bounds[kk][2] && t <= outcome.bounds[kk][3])
        ++hits95[kk];
      abs_err[kk] += std::fabs(outcome.median[kk] - t);
    }
  }
  report.n_reps = static_cast<int>(included);
  if (included == 0)
    throw ValidationError("calibration_study: every replication was excluded");

  double c80 = 0, c95 = 0, mae = 0;
  for (int period = 0; period < k; ++period) {
    const auto kk = static_cast<std::size_t>(period);
    CalibrationReport::PeriodRow row;
    row.period_start = grid.period_start(period);
    row.coverage80 = static_cast<double>(hits80[kk]) / included;
    row.coverage95 = static_cast<double>(hits95[kk]) / included;
    row.mae = abs_err[kk] / included;
    c80 += row.coverage80;
    c95 += row.coverage95;
    mae += row.mae;
    report.periods.push_back(row);
  }
  report.coverage80 = c80 / k;
  report.coverage95 = c95 / k;
  report.mae = mae / k;
  return report;
}

void write_calibration_report(std::ostream& out, const CalibrationReport& r) {
  out << "period,coverage80,coverage95,mae\n";
  for (const auto& row : r.periods) {
    out << row.period_start << ',' << csv::fixed(row.coverage80, 4) << ','
        << csv::fixed(row.coverage95, 4) << ',' << csv::fixed(row.mae, 4)
        << "\n";
  }
  out << "overall," << csv::fixed(r.coverage80, 4) << ','
      << csv::fixed(r.coverage95, 4) << ',' << csv::fixed(r.mae, 4) << "\n";
  out << "replications," << r.n_reps << ",excluded," << r.n_excluded << "\n";
}

}  // namespace tfr
