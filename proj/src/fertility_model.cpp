#include "tfr/fertility_model.hpp"

#include <cmath>
#include <limits>

#include "tfr/error.hpp"

namespace tfr {

namespace {

constexpr double kLog9 = 2.1972245773362196;  // ln 9

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double normal_log_pdf(double x, double mean, double sd) {
  constexpr double kLogSqrt2Pi = 0.9189385332046727;
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

}  // namespace

DoubleLogistic::DoubleLogistic(const CountryParams& p)
    : d_(p.d),
      start_level_(p.start_level()),
      rate_lo_(2.0 * kLog9 / p.delta[3]),
      rate_hi_(2.0 * kLog9 / p.delta[0]),
      mid_lo_(0.5 * p.delta[3]),
      mid_hi_(start_level_ - 0.5 * p.delta[0]) {}

double DoubleLogistic::operator()(double f) const {
  if (!std::isfinite(f))
    throw ValidationError("decline_g: non-finite TFR");
  double g = d_ * (logistic((f - mid_lo_) * rate_lo_) -
                   logistic((f - mid_hi_) * rate_hi_));
  if (g < 0) g = 0;
  if (g > d_) g = d_;
  return g;
}

double decline_g(double f, const CountryParams& p) {
  return DoubleLogistic(p)(f);
}

double step_log_density(double f_prev, double f_next, Phase phase,
                        const CountryParams& p, const GlobalParams& g,
                        bool first_transition_step) {
  double sd = g.sigma(phase);
  if (phase == Phase::II && first_transition_step)
    sd *= g.first_step_multiplier;
  if (!(sd > 0))
    throw ValidationError("step_log_density: non-positive noise SD");
  switch (phase) {
    case Phase::I:
      return normal_log_pdf(f_next, f_prev, sd);
    case Phase::II:
      return normal_log_pdf(f_next, f_prev - decline_g(f_prev, p), sd);
    default:
      return normal_log_pdf(f_next, p.mu + p.ar * (f_prev - p.mu), sd);
  }
}

void PhaseTracker::reset(double f0) {
  count_ = 1;
  run_max_ = f0;
  run_max_idx_ = 0;
  prev1_ = f0;
  prev2_ = 0;
  lambda_ = kNotReached;
  if (f0 > kTransitionCeiling) {
    state_ = Phase::I;
    tau_ = kNotReached;
    phase2_from_ = kNotReached;
  } else {
    state_ = Phase::II;
    tau_ = kBeforeGrid;
    phase2_from_ = kBeforeGrid;
  }
}

void PhaseTracker::push(double f) {
  const int k = count_;
  if (state_ == Phase::I) {
    if (f >= run_max_) {
      run_max_ = f;
      run_max_idx_ = k;
    } else {
      // First drop below the running maximum; the transition started at
      // the peak. Phase I implies run_max_ > 5.5 already.
      state_ = Phase::II;
      tau_ = run_max_idx_;
      phase2_from_ = k;
    }
  } else if (state_ == Phase::II && k >= 2 && k >= tau_ + 2) {
    if (prev1_ > prev2_ && f > prev1_ && prev2_ < kRecoveryCeiling &&
        prev1_ < kRecoveryCeiling) {
      state_ = Phase::III;
      lambda_ = k;
    }
  }
  prev2_ = prev1_;
  prev1_ = f;
  ++count_;
}

PhaseAssignment detect_phases(std::span<const double> f) {
  if (f.size() < 2)
    throw ValidationError("detect_phases: need at least 2 periods");
  PhaseAssignment out;
  out.labels.reserve(f.size());
  PhaseTracker tracker;
  tracker.reset(f[0]);
  out.labels.push_back(tracker.state());
  for (std::size_t k = 1; k < f.size(); ++k) {
    tracker.push(f[k]);
    out.labels.push_back(tracker.state());
  }
  out.tau = tracker.tau();
  out.lambda = tracker.lambda();
  return out;
}

double trajectory_log_density(std::span<const double> f,
                              const CountryParams& p, const GlobalParams& g,
                              double f_min, double f_max,
                              std::optional<Phase> forced) {
  if (f.empty()) throw ValidationError("trajectory_log_density: empty");
  for (double v : f) {
    if (!(v > f_min && v < f_max))
      return -std::numeric_limits<double>::infinity();
  }
  double lp = -std::log(f_max - f_min);  // flat start
  for_each_step(f, forced,
                [&](int, double prev, double next, Phase phase, bool first) {
                  lp += step_log_density(prev, next, phase, p, g, first);
                });
  return lp;
}

void simulate_forward(PhaseTracker& tracker, int n_steps,
                      const CountryParams& p, const GlobalParams& g,
                      double f_min, double f_max, int max_redraws, Rng& rng,
                      std::vector<double>& out, int* clamp_events) {
  for (int step = 0; step < n_steps; ++step) {
    const Phase phase = tracker.state();
    const double prev = tracker.last();
    double mean;
    switch (phase) {
      case Phase::I: mean = prev; break;
      case Phase::II: mean = prev - decline_g(prev, p); break;
      default: mean = p.mu + p.ar * (prev - p.mu); break;
    }
    double sd = g.sigma(phase);
    if (phase == Phase::II && tracker.next_step_is_first_transition())
      sd *= g.first_step_multiplier;

    double next = mean + sd * rng.normal();
    int attempts = 0;
    while (!(next > f_min && next < f_max) && attempts < max_redraws) {
      next = mean + sd * rng.normal();
      ++attempts;
    }
    if (!(next > f_min && next < f_max)) {
      next = kTfrFloor;
      if (clamp_events) ++*clamp_events;
    }
    out.push_back(next);
    tracker.push(next);
  }
}

}  // namespace tfr
