#ifndef TFR_INFERENCE_HPP
#define TFR_INFERENCE_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tfr/bias_model.hpp"
#include "tfr/observation.hpp"
#include "tfr/params.hpp"
#include "tfr/time_grid.hpp"
#include "tfr/trajectory.hpp"

namespace tfr {

// Hyperprior constants and parameter supports. Vague but proper defaults:
// normal priors for locations, half-normal for scales, uniform(0,1) for the
// AR location. All configurable.
struct PriorConfig {
  std::array<double, 5> psi_loc_mean{1.0, 1.0, 1.0, 1.0, 0.6};
  std::array<double, 5> psi_loc_sd{2.0, 2.0, 2.0, 2.0, 0.5};
  std::array<double, 5> psi_scale_tau{1.0, 1.0, 1.0, 1.0, 0.3};
  double mu_bar_mean = 1.6;
  double mu_bar_sd = 1.0;
  double sigma_mu_tau = 0.5;
  double sigma_rho_tau = 0.25;
  std::array<double, 3> sigma_eps_tau{0.5, 0.5, 0.5};

  double delta_max = 12.0;  // each decline segment width in [0, delta_max]
  double d_min = 0.02;      // max decrement support
  double d_max = 3.0;
  double f_min = 0.5;       // latent TFR support; f0 has a flat prior on it
  double f_max = 18.0;
  double scale_min = 1e-4;  // support of sampled scale parameters
  double scale_max = 100.0;
  double first_step_multiplier = 1.0;
};

struct McmcConfig {
  int n_chains = 3;
  long n_iter = 12000;
  long burn_in = 2000;
  int thin = 10;
  std::uint64_t seed = 0;

  double rw_step_f = 0.25;      // initial random-walk step sizes
  double rw_step_delta = 0.15;
  double slice_width = 0.4;
  int slice_max_steps = 50;
  double target_accept = 0.44;  // Robbins-Monro target during burn-in

  bool sample_f = true;
  bool sample_country_params = true;
  bool sample_globals = true;
  bool pin_f_to_reference = false;  // baseline mode: no past uncertainty
  std::optional<Phase> forced_phase;
  bool parallel_chains = true;
  std::optional<long> final_sample;  // uniform subsample of retained draws

  void validate() const;
};

// Starting state. Anything not supplied falls back to the defaults: latent
// TFR starts at the reference series and parameters are drawn from their
// priors per chain. Blocks excluded from sampling must be supplied here.
struct InitBundle {
  std::optional<GlobalParams> globals;
  std::map<std::string, CountryParams> params;
  std::map<std::string, std::vector<double>> f;
};

// One observation reduced to its likelihood ingredients: value, resolved
// bias and error SD, and interpolation weights onto the period grid.
struct ObsTerm {
  double y = 0;
  double delta = 0;
  double rho = 0;
  int left = 0;
  double w_left = 0;
  double w_right = 0;
};

struct CountryData {
  std::string country;
  std::vector<double> reference;
  std::vector<ObsTerm> obs;
  std::vector<std::vector<int>> obs_at;  // per period, indices into obs
};

struct ModelData {
  TimeGrid grid{1950, 2015, 2100};
  PriorConfig prior;
  std::vector<CountryData> countries;  // sorted by country code
};

// Resolves bias/error per observation, sorts everything into a canonical
// order (so results do not depend on input row order) and indexes
// observations by the periods their interpolation weights touch.
ModelData prepare_model_data(std::span<const Observation> obs,
                             const std::map<std::string, ReferenceSeries>& refs,
                             const BiasModelFit& fit, const TimeGrid& grid,
                             const PriorConfig& prior = {});

// Sum of conditional normal log-densities of the observations given a
// latent trajectory.
double log_likelihood_obs(const LatentTrajectory& traj,
                          std::span<const Observation> obs,
                          const BiasModelFit& fit, const TimeGrid& grid);

struct PosteriorSample {
  std::vector<std::string> countries;
  int n_periods = 0;
  int n_chains = 0;

  struct Draw {
    int chain = 0;
    long iter = 0;
    std::vector<double> f;  // countries x periods, row-major
    std::vector<CountryParams> params;
    GlobalParams globals;
  };
  std::vector<Draw> draws;  // ordered by (chain, iter)

  double f_value(const Draw& d, int country, int period) const {
    return d.f[static_cast<std::size_t>(country) *
                   static_cast<std::size_t>(n_periods) +
               static_cast<std::size_t>(period)];
  }
};

// One-at-a-time sweeps: random-walk Metropolis for latent TFR and decline
// widths, Gibbs draws for conjugate locations, slice sampling for bounded
// and scale parameters. Chains run on independent substreams of the seed
// and merge deterministically, so serial and parallel execution give
// byte-identical results.
PosteriorSample run_mcmc(const ModelData& data, const McmcConfig& config,
                         const InitBundle& init = {});

void write_f_draws(std::ostream& out, const PosteriorSample& sample,
                   const TimeGrid& grid);
void write_param_draws(std::ostream& out, const PosteriorSample& sample);
PosteriorSample read_draws(std::istream& f_csv, std::istream& param_csv,
                           const TimeGrid& grid);

// Last draw of a params CSV, usable as a warm start.
InitBundle warm_start_from_params(std::istream& param_csv);

}  // namespace tfr

#endif
