#ifndef TFR_PARAMS_HPP
#define TFR_PARAMS_HPP

#include <array>
#include <cstddef>

namespace tfr {

enum class Phase { I, II, III };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::I: return "I";
    case Phase::II: return "II";
    default: return "III";
  }
}

// Country-level parameters of the three-phase process. `ar` is the
// Phase III autoregressive coefficient (the measurement-error SD uses the
// name rho elsewhere; the two are unrelated).
struct CountryParams {
  std::array<double, 4> delta{};  // decline-curve segment widths, >= 0
  double d = 0;                   // maximum five-year decrement, > 0
  double mu = 0;                  // Phase III long-run mean, > 0
  double ar = 0;                  // in (0, 1)

  // Level at which the fertility transition starts.
  double start_level() const {
    return delta[0] + delta[1] + delta[2] + delta[3];
  }
};

// World distribution of the decline-curve parameters (delta1..4, d):
// independent truncated normals with these locations and scales.
struct WorldDistribution {
  std::array<double, 5> loc{};
  std::array<double, 5> scale{};
};

// World-level parameters shared by all countries.
struct GlobalParams {
  WorldDistribution psi;
  double mu_bar = 0;
  double sigma_mu = 0;
  double rho_bar = 0;    // mean of the AR coefficients, in (0, 1)
  double sigma_rho = 0;  // SD of the AR coefficients
  std::array<double, 3> sigma_eps{};  // per-phase SD of the step noise
  // Multiplier on sigma_eps[II] for the first transition step; 1 disables.
  double first_step_multiplier = 1.0;

  double sigma(Phase p) const {
    return sigma_eps[static_cast<std::size_t>(p)];
  }
};

}  // namespace tfr

#endif
