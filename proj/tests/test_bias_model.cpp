#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "tfr/bias_model.hpp"
#include "tfr/rng.hpp"

using namespace tfr;

namespace {

const TimeGrid kGrid{1950, 2015, 2100};

std::map<std::string, ReferenceSeries> flat_ref(const std::string& country,
                                                double value) {
  ReferenceSeries ref;
  ref.country = country;
  ref.values.assign(static_cast<std::size_t>(kGrid.n_estimation_periods()),
                    value);
  return {{country, ref}};
}

Observation make_obs(const std::string& country, double t, double y,
                     Source s = Source::DHS, Method m = Method::Direct) {
  Observation o;
  o.country = country;
  o.ref_date = t;
  o.value = y;
  o.source = s;
  o.method = m;
  o.study_id = "s";
  o.study_end_year = t;
  return o;
}

const BiasCell& cell_of(const BiasModelFit& fit, Source s, Method m) {
  for (const auto& cell : fit.table)
    if (cell.source == s && cell.method == m) return cell;
  REQUIRE(false);
  return fit.table.front();
}

}  // namespace

TEST_SUITE_BEGIN("bias_model");

TEST_CASE("residuals subtract the reference at the observation date") {
  const auto refs = flat_ref("NGA", 6.0);

  std::vector<Observation> obs = {make_obs("NGA", kGrid.center(2), 6.0)};
  auto rows = residuals(obs, refs, kGrid);
  CHECK(rows[0].z == doctest::Approx(0.0));

  obs = {make_obs("NGA", kGrid.center(2), 6.5)};
  rows = residuals(obs, refs, kGrid);
  CHECK(rows[0].z == doctest::Approx(0.5));
}

TEST_CASE("residuals use the convex combination between reference periods") {
  ReferenceSeries ref;
  ref.country = "NGA";
  ref.values.assign(13, 6.0);
  ref.values[1] = 5.5;  // centers 0 and 1: 6.0 then 5.5
  const std::map<std::string, ReferenceSeries> refs{{"NGA", ref}};

  const auto obs =
      std::vector<Observation>{make_obs("NGA", kGrid.center(0) + 1.0, 6.5)};
  const auto rows = residuals(obs, refs, kGrid);
  CHECK(rows[0].z == doctest::Approx(6.5 - (4.0 * 6.0 + 1.0 * 5.5) / 5.0));
}

TEST_CASE("residuals name the country missing a reference") {
  const auto refs = flat_ref("NGA", 6.0);
  const auto obs = std::vector<Observation>{make_obs("BWA", 1990.0, 5.0)};
  CHECK_THROWS_WITH_AS(residuals(obs, refs, kGrid),
                       doctest::Contains("BWA"), ValidationError);
}

TEST_CASE("zero residuals give zero coefficients and biases") {
  const auto refs = flat_ref("NGA", 6.0);
  std::vector<Observation> obs;
  for (int i = 0; i < 4; ++i) {
    obs.push_back(make_obs("NGA", kGrid.center(i), 6.0, Source::DHS,
                           Method::Direct));
    obs.push_back(make_obs("NGA", kGrid.center(i), 6.0, Source::MIS,
                           Method::Direct));
  }
  const auto fit = fit_bias_model(obs, refs, kGrid);
  for (double b : fit.beta) CHECK(b == doctest::Approx(0.0).epsilon(1e-12));
  for (const auto& cell : fit.table)
    CHECK(cell.delta_hat == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("saturated design reduces to group means, independent of order") {
  const auto refs = flat_ref("NGA", 6.0);
  std::vector<Observation> obs;
  const double dhs_mean = 0.3, mis_mean = -0.2;
  for (int i = 0; i < 6; ++i) {
    obs.push_back(make_obs("NGA", kGrid.center(i % 13),
                           6.0 + dhs_mean + (i % 2 ? 0.1 : -0.1), Source::DHS,
                           Method::Direct));
    obs.push_back(make_obs("NGA", kGrid.center((i + 3) % 13),
                           6.0 + mis_mean + (i % 2 ? 0.2 : -0.2), Source::MIS,
                           Method::Indirect));
  }
  BiasOptions options;
  options.saturated = true;
  const auto fit = fit_bias_model(obs, refs, kGrid, options);
  CHECK(cell_of(fit, Source::DHS, Method::Direct).delta_hat ==
        doctest::Approx(dhs_mean).epsilon(1e-10));
  CHECK(cell_of(fit, Source::MIS, Method::Indirect).delta_hat ==
        doctest::Approx(mis_mean).epsilon(1e-10));

  std::reverse(obs.begin(), obs.end());
  const auto fit2 = fit_bias_model(obs, refs, kGrid, options);
  CHECK(cell_of(fit2, Source::DHS, Method::Direct).delta_hat ==
        doctest::Approx(cell_of(fit, Source::DHS, Method::Direct).delta_hat));
}

TEST_CASE("table2 fixture reproduces the published fit") {
  std::ifstream obs_file(std::string(TFR_FIXTURE_DIR) + "/table2_obs.csv");
  std::ifstream ref_file(std::string(TFR_FIXTURE_DIR) + "/table2_ref.csv");
  REQUIRE(obs_file.good());
  REQUIRE(ref_file.good());
  const auto report = parse_observations(obs_file, kGrid);
  REQUIRE(report.rejected.empty());
  const auto refs = parse_reference_series(ref_file, kGrid);

  // Group counts of the source x method cross.
  std::map<std::pair<Source, Method>, int> counts;
  for (const auto& o : report.observations) ++counts[{o.source, o.method}];
  CHECK(counts.size() == 14);
  CHECK(counts[{Source::DHS, Method::Direct}] == 28);
  CHECK(counts[{Source::DHS, Method::Cohort}] == 10);
  CHECK(counts[{Source::MICS, Method::Indirect}] == 15);
  CHECK(counts[{Source::MIS, Method::Indirect}] == 30);
  CHECK(counts[{Source::SurveyNational, Method::Direct}] == 3);

  const auto fit = fit_bias_model(report.observations, refs, kGrid);
  const auto& dhs_d = cell_of(fit, Source::DHS, Method::Direct);
  CHECK(std::fabs(dhs_d.delta_hat - 0.11) <= 0.005);
  CHECK(std::fabs(dhs_d.rho_hat - 0.38) <= 0.005);
  CHECK(std::fabs(dhs_d.rmse() - 0.40) <= 0.005);
  CHECK(std::fabs(cell_of(fit, Source::MIS, Method::Indirect).delta_hat -
                  0.75) <= 0.005);
  CHECK(dhs_d.n == 28);
}

TEST_CASE("half-normal identity recovers the noise SD") {
  const auto refs = flat_ref("NGA", 6.0);
  Rng rng(2024);
  const double sigma = 0.4;
  std::vector<Observation> obs;
  obs.reserve(100000);
  for (int i = 0; i < 100000; ++i)
    obs.push_back(make_obs("NGA", kGrid.center(i % 13),
                           6.0 + sigma * rng.normal()));
  const auto fit = fit_bias_model(obs, refs, kGrid);
  CHECK(fit.table.size() == 1);
  CHECK(fit.table[0].rho_hat == doctest::Approx(sigma).epsilon(0.02));
}

TEST_CASE("a degenerate cell floors at rho_min") {
  const auto refs = flat_ref("NGA", 6.0);
  std::vector<Observation> obs;
  for (int i = 0; i < 5; ++i)
    obs.push_back(make_obs("NGA", kGrid.center(2), 6.4));
  const auto fit = fit_bias_model(obs, refs, kGrid);
  CHECK(fit.table[0].delta_hat == doctest::Approx(0.4));
  CHECK(fit.table[0].rho_hat == doctest::Approx(fit.options.rho_min));
}

TEST_CASE("rmse column is exactly sqrt(delta^2 + rho^2)") {
  BiasCell cell{Source::DHS, Method::Direct, 0.11, 0.38, 28};
  CHECK(cell.rmse() == doctest::Approx(std::sqrt(0.11 * 0.11 + 0.38 * 0.38))
                           .epsilon(1e-15));
}

TEST_CASE("bias fit is translation equivariant") {
  const auto refs = flat_ref("NGA", 6.0);
  Rng rng(7);
  std::vector<Observation> obs;
  for (int i = 0; i < 40; ++i)
    obs.push_back(make_obs("NGA", kGrid.center(i % 13),
                           6.0 + 0.3 * rng.normal(),
                           i % 2 ? Source::DHS : Source::MIS,
                           i % 3 ? Method::Direct : Method::Indirect));
  const auto fit = fit_bias_model(obs, refs, kGrid);

  auto shifted = obs;
  for (auto& o : shifted) o.value += 0.7;
  const auto fit2 = fit_bias_model(shifted, refs, kGrid);

  for (std::size_t i = 0; i < fit.table.size(); ++i) {
    CHECK(fit2.table[i].delta_hat ==
          doctest::Approx(fit.table[i].delta_hat + 0.7).epsilon(1e-9));
    CHECK(fit2.table[i].rho_hat ==
          doctest::Approx(fit.table[i].rho_hat).epsilon(1e-9));
  }
}

TEST_CASE("aliased columns are reported") {
  // Two cells, three additive columns: the source and method indicators
  // are perfectly confounded.
  const auto refs = flat_ref("NGA", 6.0);
  std::vector<Observation> obs;
  for (int i = 0; i < 4; ++i) {
    obs.push_back(make_obs("NGA", kGrid.center(i), 6.2, Source::DHS,
                           Method::Direct));
    obs.push_back(make_obs("NGA", kGrid.center(i), 5.9, Source::MIS,
                           Method::Indirect));
  }
  CHECK_THROWS_WITH_AS(fit_bias_model(obs, refs, kGrid),
                       doctest::Contains("aliased"), ValidationError);
}

TEST_CASE("designated vital registration bypasses the regression") {
  const auto refs = flat_ref("USA", 2.0);
  std::vector<Observation> obs;
  for (int i = 0; i < 6; ++i) {
    obs.push_back(make_obs("USA", kGrid.center(i), 2.0 + 0.3 * (i % 2),
                           Source::VR, Method::Direct));
    obs.push_back(make_obs("USA", kGrid.center(i), 2.1, Source::DHS,
                           Method::Direct));
  }
  BiasOptions options;
  options.vr_high_quality = {"USA"};
  const auto fit = fit_bias_model(obs, refs, kGrid, options);

  const auto vr = fit.resolve("USA", Source::VR, Method::Direct);
  CHECK(vr.delta == 0.0);
  CHECK(vr.rho == doctest::Approx(options.vr_rho));
  for (const auto& cell : fit.table) CHECK(cell.source != Source::VR);
}

TEST_CASE("undersized cells pool into the catch-all of their method") {
  const auto refs = flat_ref("NGA", 6.0);
  std::vector<Observation> obs;
  for (int i = 0; i < 8; ++i)
    obs.push_back(make_obs("NGA", kGrid.center(i), 6.1 + 0.05 * i,
                           Source::DHS, Method::Direct));
  obs.push_back(make_obs("NGA", kGrid.center(3), 5.2, Source::MICS,
                         Method::Direct));  // n = 1

  const auto fit = fit_bias_model(obs, refs, kGrid);
  bool has_mics = false, has_other = false;
  for (const auto& cell : fit.table) {
    if (cell.source == Source::MICS) has_mics = true;
    if (cell.source == Source::Other && cell.method == Method::Direct) {
      has_other = true;
      CHECK(cell.n == 1);
    }
  }
  CHECK_FALSE(has_mics);
  CHECK(has_other);
  // The pooled cell resolves MICS/Direct lookups.
  const auto r = fit.resolve("NGA", Source::MICS, Method::Direct);
  const auto o = fit.resolve("NGA", Source::Other, Method::Direct);
  CHECK(r.delta == doctest::Approx(o.delta));

  CHECK_THROWS_AS(fit.resolve("NGA", Source::Census, Method::Cohort),
                  ValidationError);
}

TEST_CASE("per-country fits are used when requested") {
  auto refs = flat_ref("NGA", 6.0);
  const auto usa = flat_ref("USA", 2.0);
  refs.insert(usa.begin(), usa.end());

  std::vector<Observation> obs;
  for (int i = 0; i < 6; ++i) {
    obs.push_back(make_obs("NGA", kGrid.center(i), 6.5 + 0.01 * i));
    obs.push_back(make_obs("USA", kGrid.center(i), 2.1 + 0.01 * i));
  }
  BiasOptions options;
  options.per_country = true;
  const auto fit = fit_bias_model(obs, refs, kGrid, options);
  const auto nga = fit.resolve("NGA", Source::DHS, Method::Direct);
  const auto us = fit.resolve("USA", Source::DHS, Method::Direct);
  CHECK(nga.delta == doctest::Approx(0.525).epsilon(1e-6));
  CHECK(us.delta == doctest::Approx(0.125).epsilon(1e-6));
  // A country outside the per-country map falls back to the pooled fit.
  const auto pooled = fit.resolve("BWA", Source::DHS, Method::Direct);
  CHECK(pooled.delta == doctest::Approx(0.325).epsilon(1e-6));
}

TEST_CASE("bias table round-trips through CSV") {
  const auto refs = flat_ref("NGA", 6.0);
  Rng rng(5);
  std::vector<Observation> obs;
  for (int i = 0; i < 30; ++i)
    obs.push_back(make_obs("NGA", kGrid.center(i % 13),
                           6.0 + 0.4 * rng.normal(),
                           i % 2 ? Source::DHS : Source::Census,
                           Method::Direct));
  const auto fit = fit_bias_model(obs, refs, kGrid);

  std::ostringstream out;
  write_bias_table(out, fit);
  std::istringstream in(out.str());
  const auto back = read_bias_table(in);
  REQUIRE(back.table.size() == fit.table.size());
  for (std::size_t i = 0; i < fit.table.size(); ++i) {
    CHECK(back.table[i].source == fit.table[i].source);
    CHECK(back.table[i].delta_hat == fit.table[i].delta_hat);
    CHECK(back.table[i].rho_hat == fit.table[i].rho_hat);
    CHECK(back.table[i].n == fit.table[i].n);
  }
}

TEST_CASE("empty observation set is an error") {
  const auto refs = flat_ref("NGA", 6.0);
  CHECK_THROWS_AS(fit_bias_model({}, refs, kGrid), ValidationError);
}

TEST_SUITE_END();
