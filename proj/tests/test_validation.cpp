#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "tfr/rng.hpp"
#include "tfr/validation.hpp"

using namespace tfr;

namespace {

const TimeGrid kGrid{1950, 2015, 2100};

Observation study_obs(const std::string& country, const std::string& study,
                      double t, double end, double y = 5.0) {
  Observation o;
  o.country = country;
  o.ref_date = t;
  o.value = y;
  o.source = Source::DHS;
  o.method = Method::Direct;
  o.study_id = study;
  o.study_end_year = end;
  return o;
}

std::map<std::string, ReferenceSeries> flat_ref(const std::string& country,
                                                double value) {
  ReferenceSeries ref;
  ref.country = country;
  ref.values.assign(static_cast<std::size_t>(kGrid.n_estimation_periods()),
                    value);
  return {{country, ref}};
}

BiasModelFit cell_fit(Source s, Method m, double delta, double rho) {
  BiasModelFit fit;
  fit.table.push_back({s, m, delta, rho, 10});
  return fit;
}

SyntheticTruth nigeria_like_truth() {
  SyntheticTruth truth;
  truth.country = "SYN";
  truth.f0 = 6.5;
  truth.params.delta = {1.2, 2.0, 2.0, 1.3};
  truth.params.d = 0.35;
  truth.params.mu = 1.7;
  truth.params.ar = 0.85;
  truth.globals.psi.loc = {1.2, 2.0, 2.0, 1.3, 0.35};
  truth.globals.psi.scale = {0.3, 0.4, 0.4, 0.3, 0.1};
  truth.globals.mu_bar = 1.7;
  truth.globals.sigma_mu = 0.2;
  truth.globals.rho_bar = 0.85;
  truth.globals.sigma_rho = 0.06;
  truth.globals.sigma_eps = {0.12, 0.18, 0.1};
  return truth;
}

}  // namespace

TEST_SUITE_BEGIN("validation");

TEST_CASE("a study reaching past the cutoff is removed in full") {
  std::vector<Observation> obs;
  // 1988..2008 estimates, all from one study ending in 2008.
  for (int year = 1988; year <= 2008; year += 2)
    obs.push_back(study_obs("NGA", "long-study", year, 2008.4));
  // A short study ending before the cutoff.
  obs.push_back(study_obs("NGA", "short-study", 2003.0, 2004.0));

  const auto refs = flat_ref("NGA", 6.0);
  const auto result = split(obs, refs, kGrid, 2005);
  REQUIRE(result.train.size() == 1);
  CHECK(result.train[0].study_id == "short-study");
  CHECK(result.flagged.empty());

  // Held-out truth covers exactly the post-cutoff estimation periods.
  REQUIRE(result.heldout.count("NGA"));
  const auto& held = result.heldout.at("NGA");
  CHECK(held.size() == 2);  // 2005 and 2010 periods
  CHECK(held[0].first == 2005);
  CHECK(held[1].first == 2010);
}

TEST_CASE("a study ending before the cutoff is fully retained") {
  std::vector<Observation> obs;
  for (int year = 1990; year <= 2004; year += 2)
    obs.push_back(study_obs("NGA", "ok", year, 2004.5));
  const auto result = split(obs, flat_ref("NGA", 6.0), kGrid, 2005);
  CHECK(result.train.size() == obs.size());
}

TEST_CASE("empty input splits to empty output") {
  const auto result = split({}, {}, kGrid, 2005);
  CHECK(result.train.empty());
  CHECK(result.heldout.empty());
  CHECK(result.flagged.empty());
}

TEST_CASE("countries losing all training data are flagged") {
  std::vector<Observation> obs = {
      study_obs("NGA", "a", 2000.0, 2010.0),
      study_obs("BWA", "b", 2000.0, 2004.0),
  };
  auto refs = flat_ref("NGA", 6.0);
  const auto bwa = flat_ref("BWA", 4.0);
  refs.insert(bwa.begin(), bwa.end());
  const auto result = split(obs, refs, kGrid, 2005);
  REQUIRE(result.flagged.size() == 1);
  CHECK(result.flagged[0] == "NGA");
}

TEST_CASE("split never leaks and is idempotent on random corpora") {
  Rng rng(314);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<Observation> obs;
    const int n_studies = 3 + static_cast<int>(rng.uniform() * 10);
    for (int s = 0; s < n_studies; ++s) {
      const double end = 1970 + rng.uniform() * 45.0;
      const int rows = 1 + static_cast<int>(rng.uniform() * 8);
      for (int r = 0; r < rows; ++r) {
        const double t = std::max(1950.0, end - rng.uniform() * 25.0);
        obs.push_back(study_obs(rng.uniform() < 0.5 ? "NGA" : "BWA",
                                "study-" + std::to_string(s), t, end));
      }
    }
    const auto result = split(obs, {}, kGrid, 2005);
    std::set<std::string> kept;
    for (const auto& o : result.train) {
      CHECK(o.study_end_year < 2005);
      kept.insert(o.country + "/" + o.study_id);
    }
    // Idempotence: splitting the training set again changes nothing.
    const auto again = split(result.train, {}, kGrid, 2005);
    CHECK(again.train.size() == result.train.size());
    // No partial studies: every kept study keeps all of its rows.
    std::map<std::string, int> input_counts, kept_counts;
    for (const auto& o : obs) ++input_counts[o.country + "/" + o.study_id];
    for (const auto& o : result.train)
      ++kept_counts[o.country + "/" + o.study_id];
    for (const auto& [key, count] : kept_counts)
      CHECK(count == input_counts[key]);
  }
}

TEST_CASE("perfect predictions score zero error and full coverage") {
  QuantileTable table;
  table.probs = {0.025, 0.1, 0.5, 0.9, 0.975};
  std::map<std::string, std::vector<std::pair<int, double>>> truth;
  for (int year : {2005, 2010}) {
    table.rows.push_back({"NGA", year, {4.0, 4.2, 4.5, 4.8, 5.0}});
    truth["NGA"].emplace_back(year, 4.5);
  }
  const auto report = score(table, truth);
  CHECK(report.mae == doctest::Approx(0.0));
  CHECK(report.coverage80 == doctest::Approx(1.0));
  CHECK(report.coverage95 == doctest::Approx(1.0));
  CHECK(report.n == 2);
}

TEST_CASE("a constructed miss scores zero coverage") {
  QuantileTable table;
  table.probs = {0.025, 0.1, 0.5, 0.9, 0.975};
  std::map<std::string, std::vector<std::pair<int, double>>> truth;
  for (int year : {2005, 2010}) {
    table.rows.push_back({"NGA", year, {4.0, 4.2, 4.5, 4.8, 5.0}});
    truth["NGA"].emplace_back(year, 4.5 + 10.0 * (5.0 - 4.0));
  }
  const auto report = score(table, truth);
  CHECK(report.coverage80 == doctest::Approx(0.0));
  CHECK(report.coverage95 == doctest::Approx(0.0));
  CHECK(report.mae == doctest::Approx(10.0));
}

TEST_CASE("score rejects mismatched countries") {
  QuantileTable table;
  table.probs = {0.025, 0.1, 0.5, 0.9, 0.975};
  table.rows.push_back({"NGA", 2005, {4.0, 4.2, 4.5, 4.8, 5.0}});
  std::map<std::string, std::vector<std::pair<int, double>>> truth;
  truth["BWA"].emplace_back(2005, 4.5);
  CHECK_THROWS_AS(score(table, truth), ValidationError);
}

TEST_CASE("score is invariant to row order and duplicated rows") {
  QuantileTable table;
  table.probs = {0.025, 0.1, 0.5, 0.9, 0.975};
  table.rows.push_back({"NGA", 2005, {4.0, 4.2, 4.5, 4.8, 5.0}});
  table.rows.push_back({"BWA", 2005, {3.0, 3.2, 3.5, 3.8, 4.0}});
  std::map<std::string, std::vector<std::pair<int, double>>> truth;
  truth["NGA"].emplace_back(2005, 4.4);
  truth["BWA"].emplace_back(2005, 3.6);
  const auto a = score(table, truth);

  std::reverse(table.rows.begin(), table.rows.end());
  table.rows.push_back(table.rows.front());  // exact duplicate
  const auto b = score(table, truth);
  CHECK(a.mae == doctest::Approx(b.mae));
  CHECK(a.coverage80 == doctest::Approx(b.coverage80));
}

TEST_CASE("noiseless synthetic observations equal truth plus bias") {
  const auto truth = nigeria_like_truth();
  const auto fit = cell_fit(Source::DHS, Method::Direct, 0.3, 0.0);
  std::vector<ObservationSlot> design;
  for (int k = 0; k < 13; ++k)
    design.push_back({kGrid.center(k), Source::DHS, Method::Direct, "", 0});

  const auto data = simulate_synthetic(truth, fit, design, kGrid, 5);
  REQUIRE(data.observations.size() == design.size());
  REQUIRE(data.truth.f.size() == 13);
  for (std::size_t i = 0; i < design.size(); ++i) {
    const double expected =
        interpolate(data.truth, kGrid, design[i].ref_date) + 0.3;
    CHECK(data.observations[i].value == doctest::Approx(expected));
  }
  CHECK(data.truth.phase.size() == 13);
}

TEST_CASE("synthetic noise matches the requested bias and spread") {
  const auto truth = nigeria_like_truth();
  const double delta = 0.4, rho = 0.9;
  const auto fit = cell_fit(Source::MIS, Method::Indirect, delta, rho);
  std::vector<ObservationSlot> design;
  for (int i = 0; i < 100000; ++i)
    design.push_back(
        {kGrid.center(i % 13), Source::MIS, Method::Indirect, "", 0});

  const auto data = simulate_synthetic(truth, fit, design, kGrid, 17);
  double sum = 0;
  for (std::size_t i = 0; i < design.size(); ++i)
    sum += data.observations[i].value -
           interpolate(data.truth, kGrid, design[i].ref_date);
  const double mean = sum / static_cast<double>(design.size());
  double ss = 0;
  for (std::size_t i = 0; i < design.size(); ++i) {
    const double e = data.observations[i].value -
                     interpolate(data.truth, kGrid, design[i].ref_date) -
                     delta;
    ss += (e - (mean - delta)) * (e - (mean - delta));
  }
  const double sd = std::sqrt(ss / static_cast<double>(design.size() - 1));
  CHECK(std::fabs(mean - delta) < 3.0 * rho / std::sqrt(100000.0));
  CHECK(sd == doctest::Approx(rho).epsilon(0.02));
}

TEST_CASE("synthetic generation is bit-reproducible") {
  const auto truth = nigeria_like_truth();
  const auto fit = cell_fit(Source::DHS, Method::Direct, 0.1, 0.5);
  std::vector<ObservationSlot> design;
  for (int k = 0; k < 13; ++k)
    design.push_back({kGrid.center(k) + 0.7, Source::DHS, Method::Direct,
                      "", 0});
  const auto a = simulate_synthetic(truth, fit, design, kGrid, 99);
  const auto b = simulate_synthetic(truth, fit, design, kGrid, 99);
  for (std::size_t k = 0; k < a.truth.f.size(); ++k)
    CHECK(a.truth.f[k] == b.truth.f[k]);
  for (std::size_t i = 0; i < a.observations.size(); ++i)
    CHECK(a.observations[i].value == b.observations[i].value);
}

TEST_CASE("small calibration study is roughly calibrated") {
  const TimeGrid grid{1950, 1985, 2000};  // 7 estimation periods
  auto truth = nigeria_like_truth();
  const auto fit = cell_fit(Source::DHS, Method::Direct, 0.1, 0.45);

  CalibrationConfig cfg;
  cfg.truth = truth;
  cfg.redraw_params = true;
  for (int k = 0; k < 7; ++k) {
    cfg.design.push_back({grid.center(k), Source::DHS, Method::Direct, "", 0});
    cfg.design.push_back(
        {grid.center(k) + 2.0, Source::DHS, Method::Direct, "", 0});
  }
  cfg.mcmc.n_chains = 2;
  cfg.mcmc.n_iter = 2500;
  cfg.mcmc.burn_in = 500;
  cfg.mcmc.thin = 4;
  cfg.mcmc.sample_globals = false;
  cfg.seed = 2718;

  const auto report = calibration_study(40, cfg, fit, grid);
  CHECK(report.n_reps + report.n_excluded == 40);
  CHECK(report.n_reps >= 35);
  // Loose binomial bands for a smoke test at n = 40 x 7.
  CHECK(report.coverage95 > 0.85);
  CHECK(report.coverage95 <= 1.0);
  CHECK(report.coverage80 > 0.65);
  CHECK(report.coverage80 < 0.95);
  CHECK(std::isfinite(report.mae));
  CHECK(report.periods.size() == 7);

  std::ostringstream out;
  write_calibration_report(out, report);
  CHECK(out.str().find("period,coverage80,coverage95,mae") == 0);
}

TEST_SUITE_END();
