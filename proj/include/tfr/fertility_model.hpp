#ifndef TFR_FERTILITY_MODEL_HPP
#define TFR_FERTILITY_MODEL_HPP

#include <optional>
#include <span>
#include <vector>

#include "tfr/params.hpp"
#include "tfr/rng.hpp"
#include "tfr/trajectory.hpp"

namespace tfr {

// TFR above which a country is considered pre-transition at the grid start.
constexpr double kTransitionCeiling = 5.5;
// Recovery (Phase III) can only begin below this level.
constexpr double kRecoveryCeiling = 2.0;
// Hard floor for any simulated TFR.
constexpr double kTfrFloor = 0.5;

// Expected five-year decrement during the transition: difference of two
// logistic ramps, each spanning its delta width between 10% and 90%,
// clamped to [0, d]. Near zero at the transition start level and as TFR
// approaches zero, plateauing at d in mid-transition.
class DoubleLogistic {
 public:
  explicit DoubleLogistic(const CountryParams& p);

  double operator()(double f) const;
  double start_level() const { return start_level_; }
  double max_decrement() const { return d_; }

 private:
  double d_;
  double start_level_;
  double rate_lo_;  // 2 ln 9 / delta4
  double rate_hi_;  // 2 ln 9 / delta1
  double mid_lo_;   // 0.5 * delta4
  double mid_hi_;   // start_level - 0.5 * delta1
};

double decline_g(double f, const CountryParams& p);

// Log-density of one five-year step f_prev -> f_next under the given phase.
// first_transition_step applies the configured noise multiplier for the
// first decline step.
double step_log_density(double f_prev, double f_next, Phase phase,
                        const CountryParams& p, const GlobalParams& g,
                        bool first_transition_step = false);

// Phase state machine. The state after seeing periods 0..k governs the
// step into period k+1, so labels depend only on the values seen so far
// and batch labeling agrees exactly with one-step-ahead simulation:
//   - a country starts in Phase I if its first value exceeds 5.5,
//     otherwise it entered the grid already in Phase II;
//   - Phase II begins when a value first drops below the running maximum;
//     tau records the peak period the decline started from;
//   - Phase III begins at the first period preceded by two successive
//     increases that both start below 2.0, within the transition.
class PhaseTracker {
 public:
  static constexpr int kBeforeGrid = LatentTrajectory::kBeforeGrid;
  static constexpr int kNotReached = LatentTrajectory::kNotReached;

  void reset(double f0);
  void push(double f);

  Phase state() const { return state_; }
  int tau() const { return tau_; }
  int lambda() const { return lambda_; }
  int size() const { return count_; }
  double last() const { return prev1_; }
  // True when the upcoming step is the first one governed by Phase II.
  bool next_step_is_first_transition() const {
    return state_ == Phase::II && phase2_from_ == count_ - 1 &&
           phase2_from_ >= 0;
  }

 private:
  Phase state_ = Phase::I;
  int tau_ = kNotReached;
  int lambda_ = kNotReached;
  int phase2_from_ = kNotReached;  // first period labeled Phase II
  int count_ = 0;
  double run_max_ = 0;
  int run_max_idx_ = 0;
  double prev1_ = 0;
  double prev2_ = 0;
};

struct PhaseAssignment {
  std::vector<Phase> labels;
  int tau = PhaseTracker::kNotReached;
  int lambda = PhaseTracker::kNotReached;
};

// Deterministic per-trajectory phase rules; total for any input of at
// least two periods.
PhaseAssignment detect_phases(std::span<const double> f);

// Walks the steps of a trajectory, reporting for each the phase that
// governs it. fn(step_index k, f_prev, f_next, phase, first_transition)
// is called for the step into period k, k = 1..n-1.
template <class F>
void for_each_step(std::span<const double> f, std::optional<Phase> forced,
                   F&& fn) {
  if (forced) {
    for (std::size_t k = 1; k < f.size(); ++k)
      fn(static_cast<int>(k), f[k - 1], f[k], *forced, false);
    return;
  }
  PhaseTracker tracker;
  tracker.reset(f[0]);
  for (std::size_t k = 1; k < f.size(); ++k) {
    const Phase phase = tracker.state();
    const bool first = tracker.next_step_is_first_transition();
    fn(static_cast<int>(k), f[k - 1], f[k], phase, first);
    tracker.push(f[k]);
  }
}

// Joint log-density of a trajectory: flat start on (f_min, f_max) plus the
// phase-determined step densities. -inf outside the support.
double trajectory_log_density(std::span<const double> f,
                              const CountryParams& p, const GlobalParams& g,
                              double f_min, double f_max,
                              std::optional<Phase> forced = std::nullopt);

// Extends a trajectory by n_steps five-year draws using the tracker's
// current state. Values outside (f_min, f_max) are redrawn up to
// max_redraws times, then clamped to the floor; *clamp_events counts the
// clamps. Appends to out and advances the tracker.
void simulate_forward(PhaseTracker& tracker, int n_steps,
                      const CountryParams& p, const GlobalParams& g,
                      double f_min, double f_max, int max_redraws, Rng& rng,
                      std::vector<double>& out, int* clamp_events = nullptr);

}  // namespace tfr

#endif
