#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "tfr/fertility_model.hpp"

using namespace tfr;

namespace {

CountryParams unit_params() {
  CountryParams p;
  p.delta = {1.0, 1.0, 1.0, 1.0};
  p.d = 1.0;
  p.mu = 1.6;
  p.ar = 0.9;
  return p;
}

// Independent scalar evaluation of the decline curve.
double decline_reference(double f, const CountryParams& p) {
  const double s = p.delta[0] + p.delta[1] + p.delta[2] + p.delta[3];
  const double ln9 = std::log(9.0);
  auto lam = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double raw = p.d * (lam((f - 0.5 * p.delta[3]) * 2.0 * ln9 / p.delta[3]) -
                            lam((f - (s - 0.5 * p.delta[0])) * 2.0 * ln9 /
                                p.delta[0]));
  return std::min(p.d, std::max(0.0, raw));
}

double normal_logpdf_reference(double x, double mean, double sd) {
  return -0.5 * std::pow((x - mean) / sd, 2) -
         std::log(sd * std::sqrt(2.0 * M_PI));
}

GlobalParams test_globals() {
  GlobalParams g;
  g.psi.loc = {1.0, 1.0, 1.0, 1.0, 0.6};
  g.psi.scale = {0.5, 0.5, 0.5, 0.5, 0.2};
  g.mu_bar = 1.6;
  g.sigma_mu = 0.3;
  g.rho_bar = 0.8;
  g.sigma_rho = 0.1;
  g.sigma_eps = {0.2, 0.3, 0.15};
  return g;
}

}  // namespace

TEST_SUITE_BEGIN("fertility_model");

TEST_CASE("decline curve is tiny far above the start level") {
  const auto p = unit_params();
  const double s = p.start_level();
  CHECK(decline_g(s + 5.0 * p.delta[0], p) < 0.01 * p.d);
}

TEST_CASE("decline curve plateaus at d between well separated ramps") {
  CountryParams p;
  p.delta = {0.5, 3.0, 3.0, 0.5};
  p.d = 1.2;
  const double f_mid = 0.5 * (0.5 * p.delta[3] + p.start_level() -
                              0.5 * p.delta[0]);
  CHECK(decline_g(f_mid, p) == doctest::Approx(p.d).epsilon(0.01));
  CHECK(decline_g(f_mid, p) == doctest::Approx(decline_reference(f_mid, p))
                                   .epsilon(1e-12));
}

TEST_CASE("decline curve matches an independently coded expression") {
  const auto p = unit_params();
  CHECK(decline_g(2.0, p) ==
        doctest::Approx(decline_reference(2.0, p)).epsilon(1e-12));
  for (double f = 0.1; f < 8.0; f += 0.37)
    CHECK(decline_g(f, p) ==
          doctest::Approx(decline_reference(f, p)).epsilon(1e-12));
}

TEST_CASE("decline curve is non-negative, bounded and continuous") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> du(0.05, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    CountryParams p;
    p.delta = {du(gen), du(gen), du(gen), du(gen)};
    p.d = du(gen);
    double prev = decline_g(0.001, p);
    for (double f = 0.001; f < 2.0 * p.start_level(); f += 0.01) {
      const double g = decline_g(f, p);
      CHECK(g >= 0.0);
      CHECK(g <= p.d * (1.0 + 1e-9));
      CHECK(std::fabs(g - prev) < 0.35 * p.d + 1e-9);
      prev = g;
    }
  }
}

TEST_CASE("decline curve rejects non-finite input") {
  CHECK_THROWS_AS(decline_g(std::nan(""), unit_params()), ValidationError);
}

TEST_CASE("step density modes") {
  const auto p = unit_params();
  const auto g = test_globals();

  // Phase I at the mode of N(0, sigma^2).
  CHECK(step_log_density(6.0, 6.0, Phase::I, p, g) ==
        doctest::Approx(normal_logpdf_reference(0, 0, g.sigma_eps[0])));

  // Phase III stationary point.
  CHECK(step_log_density(p.mu, p.mu, Phase::III, p, g) ==
        doctest::Approx(normal_logpdf_reference(0, 0, g.sigma_eps[2])));
}

TEST_CASE("phase II step density matches an independent evaluation") {
  const auto p = unit_params();
  GlobalParams g = test_globals();
  g.sigma_eps[1] = 0.3;
  const double expected = normal_logpdf_reference(
      4.2 - 5.0 + decline_reference(5.0, p), 0.0, 0.3);
  CHECK(step_log_density(5.0, 4.2, Phase::II, p, g) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("step density rejects a non-positive noise SD") {
  const auto p = unit_params();
  GlobalParams g = test_globals();
  g.sigma_eps[0] = 0.0;
  CHECK_THROWS_AS(step_log_density(6.0, 6.0, Phase::I, p, g),
                  ValidationError);
}

TEST_CASE("phase III is mean reverting in expectation") {
  const auto p = unit_params();
  for (double prev : {0.9, 1.2, 2.0, 2.5}) {
    const double expected_next = p.mu + p.ar * (prev - p.mu);
    const double before = prev - p.mu;
    const double after = expected_next - p.mu;
    CHECK(std::fabs(after) < std::fabs(before));
    CHECK(after * before >= 0.0);
  }
}

TEST_CASE("transition starts at the peak") {
  // Starts above 5.5, rises to the national peak, then declines.
  const std::vector<double> f = {6.0, 6.3, 6.7, 6.5, 6.1, 5.6};
  const auto phases = detect_phases(f);
  CHECK(phases.tau == 2);
  CHECK(phases.labels[0] == Phase::I);
  CHECK(phases.labels[2] == Phase::I);
  CHECK(phases.labels[3] == Phase::II);
  CHECK(phases.labels[5] == Phase::II);
  CHECK(phases.lambda == PhaseTracker::kNotReached);
}

TEST_CASE("a constant high series never leaves phase I") {
  const std::vector<double> f(10, 7.0);
  const auto phases = detect_phases(f);
  for (const auto label : phases.labels) CHECK(label == Phase::I);
  CHECK(phases.tau == PhaseTracker::kNotReached);
  CHECK(phases.lambda == PhaseTracker::kNotReached);
}

TEST_CASE("low start with immediate recovery enters phase III at the "
          "earliest evidence") {
  // Always below 2 with two successive increases at the start; the rule
  // can first fire once both increases are observable.
  const std::vector<double> f = {1.5, 1.6, 1.7, 1.75, 1.8};
  const auto phases = detect_phases(f);
  CHECK(phases.tau == PhaseTracker::kBeforeGrid);
  CHECK(phases.lambda == 2);
  CHECK(phases.labels[0] == Phase::II);
  CHECK(phases.labels[1] == Phase::II);
  CHECK(phases.labels[2] == Phase::III);
  CHECK(phases.labels[4] == Phase::III);
}

TEST_CASE("recovery requires both increases to start below the ceiling") {
  const std::vector<double> f = {6.0, 5.0, 4.0, 3.0, 2.5, 2.6, 2.7};
  const auto phases = detect_phases(f);
  CHECK(phases.lambda == PhaseTracker::kNotReached);  // increases at 2.5, 2.6
  const std::vector<double> g = {6.0, 5.0, 4.0, 3.0, 1.5, 1.6, 1.7};
  const auto phases2 = detect_phases(g);
  CHECK(phases2.lambda == 6);
  CHECK(phases2.labels[6] == Phase::III);
}

TEST_CASE("labels never revert and depend only on the prefix") {
  std::mt19937_64 gen(123);
  std::uniform_real_distribution<double> start(0.8, 8.0);
  std::normal_distribution<double> step(0.0, 0.45);
  for (int rep = 0; rep < 2000; ++rep) {
    std::vector<double> f;
    f.push_back(start(gen));
    const int n = 3 + static_cast<int>(gen() % 28);
    for (int k = 1; k < n; ++k)
      f.push_back(std::max(0.51, f.back() + step(gen)));

    const auto phases = detect_phases(f);
    REQUIRE(static_cast<int>(phases.labels.size()) == n);
    for (int k = 1; k < n; ++k)
      CHECK(static_cast<int>(phases.labels[k]) >=
            static_cast<int>(phases.labels[k - 1]));

    // Idempotence / purity.
    const auto again = detect_phases(f);
    CHECK(again.tau == phases.tau);
    CHECK(again.lambda == phases.lambda);

    // Prefix stability: a diverging continuation cannot change earlier
    // labels.
    if (n >= 6) {
      std::vector<double> other(f.begin(), f.begin() + n / 2);
      for (int k = n / 2; k < n; ++k)
        other.push_back(std::max(0.51, other.back() + step(gen) + 0.2));
      const auto prefix = detect_phases(other);
      for (int k = 0; k < n / 2; ++k)
        CHECK(prefix.labels[k] == phases.labels[k]);
    }
  }
}

TEST_CASE("detect_phases needs at least two periods") {
  const std::vector<double> f = {6.0};
  CHECK_THROWS_AS(detect_phases(f), ValidationError);
}

TEST_CASE("trajectory density is the sum of its step densities") {
  const auto p = unit_params();
  const auto g = test_globals();
  const std::vector<double> f = {6.0, 6.3, 6.1, 5.5, 4.9};
  const auto phases = detect_phases(f);

  double expected = -std::log(18.0 - 0.5);
  PhaseTracker tracker;
  tracker.reset(f[0]);
  for (std::size_t k = 1; k < f.size(); ++k) {
    expected += step_log_density(f[k - 1], f[k], tracker.state(), p, g,
                                 tracker.next_step_is_first_transition());
    tracker.push(f[k]);
  }
  CHECK(trajectory_log_density(f, p, g, 0.5, 18.0) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(phases.labels.back() == Phase::II);

  // Out of support.
  const std::vector<double> low = {6.0, 0.4, 6.1};
  CHECK(trajectory_log_density(low, p, g, 0.5, 18.0) ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("simulated trajectories reproduce their own phase labels") {
  const auto p = unit_params();
  const auto g = test_globals();
  Rng rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    PhaseTracker tracker;
    std::vector<double> f = {6.5};
    tracker.reset(f[0]);
    simulate_forward(tracker, 20, p, g, 0.5, 18.0, 100, rng, f);
    const auto batch = detect_phases(f);
    CHECK(batch.tau == tracker.tau());
    CHECK(batch.lambda == tracker.lambda());
    CHECK(batch.labels.back() == tracker.state());
    for (double v : f) CHECK(v >= 0.5);
  }
}

TEST_SUITE_END();
