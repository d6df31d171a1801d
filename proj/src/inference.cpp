#include "tfr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <tuple>

#include "tfr/csv.hpp"
#include "tfr/error.hpp"
#include "tfr/fertility_model.hpp"
#include "tfr/parallel.hpp"
#include "tfr/rng.hpp"

namespace tfr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.9189385332046727;

inline double normal_log_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

// Unnormalized truncated-normal prior kernel: truncation enters as a
// support indicator only, which keeps the location conditionals conjugate.
inline double tn_kernel(double x, double loc, double scale, double lo,
                        double hi) {
  if (!(x >= lo && x <= hi)) return kNegInf;
  const double z = (x - loc) / scale;
  return -0.5 * z * z;
}

inline double half_normal_kernel(double x, double tau) {
  if (!(x > 0)) return kNegInf;
  return -0.5 * x * x / (tau * tau);
}

// Neal (2003) slice sampler: stepping out within [lo, hi], then shrinkage.
template <class LogP>
double slice_sample(Rng& rng, const LogP& logp, double x0, double w,
                    int max_steps, double lo, double hi) {
  const double lp0 = logp(x0);
  if (!std::isfinite(lp0)) return x0;
  const double y = lp0 + std::log(rng.uniform());

  double l = x0 - w * rng.uniform();
  double r = l + w;
  for (int i = 0; i < max_steps; ++i) {
    if (l <= lo) { l = lo; break; }
    if (!(logp(l) > y)) break;
    l -= w;
  }
  if (l < lo) l = lo;
  for (int i = 0; i < max_steps; ++i) {
    if (r >= hi) { r = hi; break; }
    if (!(logp(r) > y)) break;
    r += w;
  }
  if (r > hi) r = hi;

  for (int i = 0; i < 1000; ++i) {
    const double x = l + (r - l) * rng.uniform();
    if (logp(x) > y) return x;
    if (x < x0) l = x; else r = x;
  }
  return x0;
}

CountryParams draw_country_from_prior(Rng& rng, const GlobalParams& g,
                                      const PriorConfig& pc) {
  CountryParams p;
  for (int j = 0; j < 4; ++j)
    p.delta[static_cast<std::size_t>(j)] = rng.trunc_normal(
        g.psi.loc[static_cast<std::size_t>(j)],
        g.psi.scale[static_cast<std::size_t>(j)], 0.0, pc.delta_max);
  p.d = rng.trunc_normal(g.psi.loc[4], g.psi.scale[4], pc.d_min, pc.d_max);
  p.mu = rng.trunc_normal(g.mu_bar, g.sigma_mu, 1e-6, pc.f_max);
  p.ar = rng.trunc_normal(g.rho_bar, g.sigma_rho, 1e-9, 1.0 - 1e-9);
  return p;
}

GlobalParams draw_globals_from_prior(Rng& rng, const PriorConfig& pc) {
  GlobalParams g;
  for (std::size_t j = 0; j < 5; ++j) {
    g.psi.loc[j] = rng.normal(pc.psi_loc_mean[j], pc.psi_loc_sd[j]);
    g.psi.scale[j] = std::clamp(std::fabs(rng.normal(0.0, pc.psi_scale_tau[j])),
                                pc.scale_min, pc.scale_max);
  }
  g.mu_bar = rng.normal(pc.mu_bar_mean, pc.mu_bar_sd);
  g.sigma_mu = std::clamp(std::fabs(rng.normal(0.0, pc.sigma_mu_tau)),
                          pc.scale_min, pc.scale_max);
  g.rho_bar = rng.uniform(0.0, 1.0);
  g.sigma_rho = std::clamp(std::fabs(rng.normal(0.0, pc.sigma_rho_tau)),
                           pc.scale_min, pc.scale_max);
  for (std::size_t p = 0; p < 3; ++p)
    g.sigma_eps[p] = std::clamp(std::fabs(rng.normal(0.0, pc.sigma_eps_tau[p])),
                                pc.scale_min, pc.scale_max);
  g.first_step_multiplier = pc.first_step_multiplier;
  return g;
}

// One chain's mutable state plus the samplers. Updates run in a fixed
// order, so a chain is a pure function of (data, config, init, seed).
class ChainRunner {
 public:
  ChainRunner(const ModelData& data, const McmcConfig& cfg,
              const InitBundle& init, int chain_index)
      : data_(data),
        cfg_(cfg),
        rng_(Rng(cfg.seed).child(static_cast<std::uint64_t>(chain_index) + 1)),
        chain_id_(chain_index + 1) {
    const int n_countries = static_cast<int>(data.countries.size());
    const int k = data.grid.n_estimation_periods();

    if (!cfg_.sample_globals && !init.globals)
      throw ValidationError("run_mcmc: globals are frozen but no initial "
                            "values were supplied");
    globals_ = init.globals ? *init.globals
                            : draw_globals_from_prior(rng_, data.prior);
    globals_.first_step_multiplier = data.prior.first_step_multiplier;

    f_.resize(static_cast<std::size_t>(n_countries));
    params_.resize(static_cast<std::size_t>(n_countries));
    step_f_.assign(static_cast<std::size_t>(n_countries),
                   std::vector<double>(static_cast<std::size_t>(k),
                                       std::log(cfg.rw_step_f)));
    nf_.assign(static_cast<std::size_t>(n_countries),
               std::vector<long>(static_cast<std::size_t>(k), 0));
    step_delta_.assign(static_cast<std::size_t>(n_countries),
                       {std::log(cfg.rw_step_delta), std::log(cfg.rw_step_delta),
                        std::log(cfg.rw_step_delta), std::log(cfg.rw_step_delta)});
    ndelta_.assign(static_cast<std::size_t>(n_countries), {0, 0, 0, 0});

    for (int c = 0; c < n_countries; ++c) {
      const auto& cd = data.countries[static_cast<std::size_t>(c)];
      const auto fit_init = init.f.find(cd.country);
      if (cfg_.pin_f_to_reference || fit_init == init.f.end()) {
        f_[static_cast<std::size_t>(c)] = cd.reference;
      } else {
        if (static_cast<int>(fit_init->second.size()) != k)
          throw ValidationError("run_mcmc: initial trajectory for " +
                                cd.country + " has wrong length");
        f_[static_cast<std::size_t>(c)] = fit_init->second;
      }
      const auto pit = init.params.find(cd.country);
      if (!cfg_.sample_country_params && pit == init.params.end())
        throw ValidationError("run_mcmc: country parameters are frozen but "
                              "none were supplied for " + cd.country);
      params_[static_cast<std::size_t>(c)] =
          pit != init.params.end() ? pit->second
                                   : draw_country_from_prior(rng_, globals_,
                                                             data.prior);
    }

    check_initial_state();
  }

  void run(std::vector<PosteriorSample::Draw>& out) {
    out.clear();
    const long keep = (cfg_.n_iter - cfg_.burn_in) / cfg_.thin;
    out.reserve(static_cast<std::size_t>(keep));
    for (long iter = 1; iter <= cfg_.n_iter; ++iter) {
      adapting_ = iter <= cfg_.burn_in;
      sweep();
      if (iter > cfg_.burn_in && (iter - cfg_.burn_in) % cfg_.thin == 0)
        out.push_back(snapshot(iter));
    }
  }

 private:
  const ModelData& data_;
  const McmcConfig& cfg_;
  Rng rng_;
  int chain_id_;
  bool adapting_ = false;

  std::vector<std::vector<double>> f_;
  std::vector<CountryParams> params_;
  GlobalParams globals_;

  std::vector<std::vector<double>> step_f_;
  std::vector<std::vector<long>> nf_;
  std::vector<std::array<double, 4>> step_delta_;
  std::vector<std::array<long, 4>> ndelta_;

  double process_logp(std::span<const double> f,
                      const CountryParams& p) const {
    return trajectory_log_density(f, p, globals_, data_.prior.f_min,
                                  data_.prior.f_max, cfg_.forced_phase);
  }

  double obs_term_logp(const ObsTerm& t, std::span<const double> f) const {
    double pred = t.w_left * f[static_cast<std::size_t>(t.left)];
    if (t.w_right != 0.0)
      pred += t.w_right * f[static_cast<std::size_t>(t.left) + 1];
    return normal_log_pdf(t.y, pred + t.delta, t.rho);
  }

  double obs_logp(int c, std::span<const double> f) const {
    const auto& cd = data_.countries[static_cast<std::size_t>(c)];
    double lp = 0;
    for (const auto& t : cd.obs) lp += obs_term_logp(t, f);
    return lp;
  }

  double obs_logp_at(int c, int k, std::span<const double> f) const {
    const auto& cd = data_.countries[static_cast<std::size_t>(c)];
    double lp = 0;
    for (int idx : cd.obs_at[static_cast<std::size_t>(k)])
      lp += obs_term_logp(cd.obs[static_cast<std::size_t>(idx)], f);
    return lp;
  }

  double country_prior_logp(const CountryParams& p) const {
    const auto& pc = data_.prior;
    double lp = 0;
    for (std::size_t j = 0; j < 4; ++j)
      lp += tn_kernel(p.delta[j], globals_.psi.loc[j], globals_.psi.scale[j],
                      0.0, pc.delta_max);
    lp += tn_kernel(p.d, globals_.psi.loc[4], globals_.psi.scale[4], pc.d_min,
                    pc.d_max);
    lp += tn_kernel(p.mu, globals_.mu_bar, globals_.sigma_mu, 0.0, pc.f_max);
    lp += tn_kernel(p.ar, globals_.rho_bar, globals_.sigma_rho, 0.0, 1.0);
    return lp;
  }

  void check_initial_state() {
    for (std::size_t c = 0; c < f_.size(); ++c) {
      const auto& name = data_.countries[c].country;
      if (!std::isfinite(process_logp(f_[c], params_[c])))
        throw ValidationError(
            "run_mcmc: non-finite initial log-posterior in process block for " +
            name);
      if (!std::isfinite(obs_logp(static_cast<int>(c), f_[c])))
        throw ValidationError(
            "run_mcmc: non-finite initial log-posterior in observation block "
            "for " + name);
      if (!std::isfinite(country_prior_logp(params_[c])))
        throw ValidationError(
            "run_mcmc: non-finite initial log-posterior in parameter block "
            "for " + name);
    }
    if (!std::isfinite(global_prior_logp()))
      throw ValidationError(
          "run_mcmc: non-finite initial log-posterior in global block");
  }

  double global_prior_logp() const {
    const auto& pc = data_.prior;
    double lp = 0;
    for (std::size_t j = 0; j < 5; ++j) {
      lp += normal_log_pdf(globals_.psi.loc[j], pc.psi_loc_mean[j],
                           pc.psi_loc_sd[j]);
      lp += half_normal_kernel(globals_.psi.scale[j], pc.psi_scale_tau[j]);
    }
    lp += normal_log_pdf(globals_.mu_bar, pc.mu_bar_mean, pc.mu_bar_sd);
    lp += half_normal_kernel(globals_.sigma_mu, pc.sigma_mu_tau);
    lp += globals_.rho_bar > 0 && globals_.rho_bar < 1 ? 0.0 : kNegInf;
    lp += half_normal_kernel(globals_.sigma_rho, pc.sigma_rho_tau);
    for (std::size_t p = 0; p < 3; ++p)
      lp += half_normal_kernel(globals_.sigma_eps[p], pc.sigma_eps_tau[p]);
    return lp;
  }

  void rm_adapt(double& log_step, long& n, bool accepted) {
    if (!adapting_) return;
    ++n;
    const double gamma = 1.0 / std::sqrt(static_cast<double>(n));
    log_step += gamma * ((accepted ? 1.0 : 0.0) - cfg_.target_accept);
    log_step = std::clamp(log_step, std::log(1e-4), std::log(4.0));
  }

  void update_f_scalar(int c, int k) {
    auto& f = f_[static_cast<std::size_t>(c)];
    const auto& p = params_[static_cast<std::size_t>(c)];
    auto& ls = step_f_[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
    auto& n = nf_[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];

    const double old = f[static_cast<std::size_t>(k)];
    const double prop = old + std::exp(ls) * rng_.normal();
    const double lp_old = process_logp(f, p) + obs_logp_at(c, k, f);
    f[static_cast<std::size_t>(k)] = prop;
    const double lp_new = process_logp(f, p) + obs_logp_at(c, k, f);

    const bool accept = std::log(rng_.uniform()) < lp_new - lp_old;
    if (!accept) f[static_cast<std::size_t>(k)] = old;
    rm_adapt(ls, n, accept);
  }

  void update_delta(int c, int j) {
    auto& p = params_[static_cast<std::size_t>(c)];
    const auto& f = f_[static_cast<std::size_t>(c)];
    auto& ls = step_delta_[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
    auto& n = ndelta_[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];

    const double old = p.delta[static_cast<std::size_t>(j)];
    const double prop = old + std::exp(ls) * rng_.normal();
    bool accept = false;
    if (prop >= 0 && prop <= data_.prior.delta_max) {
      const double lp_old = process_logp(f, p) + country_prior_logp(p);
      CountryParams cand = p;
      cand.delta[static_cast<std::size_t>(j)] = prop;
      const double lp_new = process_logp(f, cand) + country_prior_logp(cand);
      accept = std::log(rng_.uniform()) < lp_new - lp_old;
      if (accept) p = cand;
    }
    rm_adapt(ls, n, accept);
  }

  void update_d(int c) {
    auto& p = params_[static_cast<std::size_t>(c)];
    const auto& f = f_[static_cast<std::size_t>(c)];
    const auto& pc = data_.prior;
    const auto target = [&](double d) {
      CountryParams cand = p;
      cand.d = d;
      return process_logp(f, cand) +
             tn_kernel(d, globals_.psi.loc[4], globals_.psi.scale[4], pc.d_min,
                       pc.d_max);
    };
    p.d = slice_sample(rng_, target, p.d, cfg_.slice_width,
                       cfg_.slice_max_steps, pc.d_min, pc.d_max);
  }

  void update_mu(int c) {
    auto& p = params_[static_cast<std::size_t>(c)];
    const auto& f = f_[static_cast<std::size_t>(c)];
    const double s3 = globals_.sigma_eps[2];

    double sum_r = 0;
    long n3 = 0;
    for_each_step(std::span<const double>(f), cfg_.forced_phase,
                  [&](int, double prev, double next, Phase phase, bool) {
                    if (phase == Phase::III) {
                      sum_r += next - p.ar * prev;
                      ++n3;
                    }
                  });
    const double coef = 1.0 - p.ar;
    const double prior_prec = 1.0 / (globals_.sigma_mu * globals_.sigma_mu);
    const double like_prec =
        static_cast<double>(n3) * coef * coef / (s3 * s3);
    const double prec = like_prec + prior_prec;
    const double mean =
        (coef * sum_r / (s3 * s3) + globals_.mu_bar * prior_prec) / prec;
    p.mu = rng_.trunc_normal(mean, 1.0 / std::sqrt(prec), 1e-6,
                             data_.prior.f_max);
  }

  void update_ar(int c) {
    auto& p = params_[static_cast<std::size_t>(c)];
    const auto& f = f_[static_cast<std::size_t>(c)];
    const auto target = [&](double a) {
      CountryParams cand = p;
      cand.ar = a;
      double lp = tn_kernel(a, globals_.rho_bar, globals_.sigma_rho, 0.0, 1.0);
      for_each_step(std::span<const double>(f), cfg_.forced_phase,
                    [&](int, double prev, double next, Phase phase, bool) {
                      if (phase == Phase::III)
                        lp += normal_log_pdf(
                            next, cand.mu + a * (prev - cand.mu),
                            globals_.sigma_eps[2]);
                    });
      return lp;
    };
    p.ar = slice_sample(rng_, target, p.ar, 0.2, cfg_.slice_max_steps, 1e-9,
                        1.0 - 1e-9);
  }

  // Conjugate normal draw for a world location given its children and a
  // normal hyperprior.
  void gibbs_location(double& loc, double child_scale, double prior_mean,
                      double prior_sd, std::span<const double> children) {
    const double prior_prec = 1.0 / (prior_sd * prior_sd);
    const double child_prec =
        static_cast<double>(children.size()) / (child_scale * child_scale);
    double sum = 0;
    for (double x : children) sum += x;
    const double prec = prior_prec + child_prec;
    const double mean =
        (sum / (child_scale * child_scale) + prior_mean * prior_prec) / prec;
    loc = rng_.normal(mean, 1.0 / std::sqrt(prec));
  }

  void slice_scale(double& scale, double tau,
                   std::span<const double> children, double loc) {
    const auto& pc = data_.prior;
    const auto target = [&](double s) {
      double lp = half_normal_kernel(s, tau);
      for (double x : children) lp += normal_log_pdf(x, loc, s);
      return lp;
    };
    scale = slice_sample(rng_, target, scale, cfg_.slice_width,
                         cfg_.slice_max_steps, pc.scale_min, pc.scale_max);
  }

  void update_globals() {
    const auto& pc = data_.prior;
    const std::size_t nc = params_.size();

    std::vector<double> children(nc);
    for (std::size_t j = 0; j < 5; ++j) {
      for (std::size_t c = 0; c < nc; ++c)
        children[c] = j < 4 ? params_[c].delta[j] : params_[c].d;
      gibbs_location(globals_.psi.loc[j], globals_.psi.scale[j],
                     pc.psi_loc_mean[j], pc.psi_loc_sd[j], children);
      slice_scale(globals_.psi.scale[j], pc.psi_scale_tau[j], children,
                  globals_.psi.loc[j]);
    }

    for (std::size_t c = 0; c < nc; ++c) children[c] = params_[c].mu;
    gibbs_location(globals_.mu_bar, globals_.sigma_mu, pc.mu_bar_mean,
                   pc.mu_bar_sd, children);
    slice_scale(globals_.sigma_mu, pc.sigma_mu_tau, children, globals_.mu_bar);

    for (std::size_t c = 0; c < nc; ++c) children[c] = params_[c].ar;
    {
      // Uniform(0,1) prior on the AR location: truncated conjugate draw.
      const double child_prec =
          static_cast<double>(nc) /
          (globals_.sigma_rho * globals_.sigma_rho);
      double sum = 0;
      for (double x : children) sum += x;
      const double mean = sum / static_cast<double>(nc);
      globals_.rho_bar = rng_.trunc_normal(
          mean, 1.0 / std::sqrt(child_prec), 1e-9, 1.0 - 1e-9);
    }
    slice_scale(globals_.sigma_rho, pc.sigma_rho_tau, children,
                globals_.rho_bar);

    update_sigma_eps();
  }

  void update_sigma_eps() {
    const auto& pc = data_.prior;
    // Per-phase sums of squared step residuals, normalized by the first
    // transition multiplier where it applies.
    std::array<double, 3> sum_sq{0, 0, 0};
    std::array<long, 3> count{0, 0, 0};
    for (std::size_t c = 0; c < f_.size(); ++c) {
      const auto& p = params_[c];
      for_each_step(
          std::span<const double>(f_[c]), cfg_.forced_phase,
          [&](int, double prev, double next, Phase phase, bool first) {
            double r;
            switch (phase) {
              case Phase::I: r = next - prev; break;
              case Phase::II: r = next - prev + decline_g(prev, p); break;
              default: r = next - p.mu - p.ar * (prev - p.mu); break;
            }
            const double m =
                first ? globals_.first_step_multiplier : 1.0;
            const auto idx = static_cast<std::size_t>(phase);
            sum_sq[idx] += (r / m) * (r / m);
            ++count[idx];
          });
    }
    for (std::size_t ph = 0; ph < 3; ++ph) {
      const double a = sum_sq[ph];
      const double n = static_cast<double>(count[ph]);
      const double tau = pc.sigma_eps_tau[ph];
      const auto target = [&](double s) {
        return -a / (2.0 * s * s) - n * std::log(s) + half_normal_kernel(s, tau);
      };
      globals_.sigma_eps[ph] =
          slice_sample(rng_, target, globals_.sigma_eps[ph], cfg_.slice_width,
                       cfg_.slice_max_steps, pc.scale_min, pc.scale_max);
    }
  }

  void sweep() {
    const int n_countries = static_cast<int>(data_.countries.size());
    const int k = data_.grid.n_estimation_periods();
    for (int c = 0; c < n_countries; ++c) {
      if (cfg_.sample_f && !cfg_.pin_f_to_reference)
        for (int period = 0; period < k; ++period) update_f_scalar(c, period);
      if (cfg_.sample_country_params) {
        for (int j = 0; j < 4; ++j) update_delta(c, j);
        update_d(c);
        update_mu(c);
        update_ar(c);
      }
    }
    if (cfg_.sample_globals) update_globals();
  }

  PosteriorSample::Draw snapshot(long iter) const {
    PosteriorSample::Draw d;
    d.chain = chain_id_;
    d.iter = iter;
    const int k = data_.grid.n_estimation_periods();
    d.f.reserve(f_.size() * static_cast<std::size_t>(k));
    for (const auto& fc : f_) d.f.insert(d.f.end(), fc.begin(), fc.end());
    d.params = params_;
    d.globals = globals_;
    return d;
  }
};

}  // namespace

void McmcConfig::validate() const {
  if (n_chains < 1)
    throw ValidationError("McmcConfig: n_chains must be >= 1");
  if (burn_in < 0 || burn_in >= n_iter)
    throw ValidationError("McmcConfig: burn-in must be in [0, n_iter)");
  if (thin < 1)
    throw ValidationError("McmcConfig: thin must be >= 1");
  if ((n_iter - burn_in) / thin < 100)
    throw ValidationError(
        "McmcConfig: fewer than 100 retained draws per chain");
  if (final_sample && *final_sample < 1)
    throw ValidationError("McmcConfig: final sample must be positive");
}

ModelData prepare_model_data(std::span<const Observation> obs,
                             const std::map<std::string, ReferenceSeries>& refs,
                             const BiasModelFit& fit, const TimeGrid& grid,
                             const PriorConfig& prior) {
  ModelData data{grid, prior, {}};
  const int k = grid.n_estimation_periods();

  std::map<std::string, std::vector<const Observation*>> by_country;
  for (const auto& o : obs) by_country[o.country].push_back(&o);

  for (auto& [country, rows] : by_country) {
    const auto rit = refs.find(country);
    if (rit == refs.end())
      throw ValidationError("prepare_model_data: no reference series for " +
                            country);
    // Canonical order makes results independent of input row order.
    std::sort(rows.begin(), rows.end(),
              [](const Observation* a, const Observation* b) {
                return std::tie(a->ref_date, a->value, a->source, a->method,
                                a->study_id, a->study_end_year) <
                       std::tie(b->ref_date, b->value, b->source, b->method,
                                b->study_id, b->study_end_year);
              });

    CountryData cd;
    cd.country = country;
    cd.reference = rit->second.values;
    cd.obs_at.assign(static_cast<std::size_t>(k), {});
    for (const Observation* o : rows) {
      const auto resolved = fit.resolve(country, o->source, o->method);
      const auto w = grid.weights_at(o->ref_date, k);
      ObsTerm term{o->value, resolved.delta, resolved.rho,
                   w.left,    w.w_left,       w.w_right};
      const int idx = static_cast<int>(cd.obs.size());
      cd.obs.push_back(term);
      cd.obs_at[static_cast<std::size_t>(w.left)].push_back(idx);
      if (w.w_right != 0.0)
        cd.obs_at[static_cast<std::size_t>(w.left) + 1].push_back(idx);
    }
    data.countries.push_back(std::move(cd));
  }
  return data;
}

double log_likelihood_obs(const LatentTrajectory& traj,
                          std::span<const Observation> obs,
                          const BiasModelFit& fit, const TimeGrid& grid) {
  double lp = 0;
  for (const auto& o : obs) {
    const auto resolved = fit.resolve(o.country, o.source, o.method);
    const double pred = interpolate(traj, grid, o.ref_date);
    lp += normal_log_pdf(o.value, pred + resolved.delta, resolved.rho);
  }
  return lp;
}

PosteriorSample run_mcmc(const ModelData& data, const McmcConfig& config,
                         const InitBundle& init) {
  config.validate();
  if (data.countries.empty())
    throw ValidationError("run_mcmc: no countries");

  PosteriorSample sample;
  sample.n_periods = data.grid.n_estimation_periods();
  sample.n_chains = config.n_chains;
  for (const auto& cd : data.countries) sample.countries.push_back(cd.country);

  std::vector<std::vector<PosteriorSample::Draw>> per_chain(
      static_cast<std::size_t>(config.n_chains));
  std::vector<std::exception_ptr> errors(
      static_cast<std::size_t>(config.n_chains));
  parallel_for(config.n_chains, config.parallel_chains, [&](int chain) {
    try {
      ChainRunner runner(data, config, init, chain);
      runner.run(per_chain[static_cast<std::size_t>(chain)]);
    } catch (...) {
      errors[static_cast<std::size_t>(chain)] = std::current_exception();
    }
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (auto& chain_draws : per_chain)
    for (auto& d : chain_draws) sample.draws.push_back(std::move(d));

  if (config.final_sample &&
      *config.final_sample < static_cast<long>(sample.draws.size())) {
    const long n = static_cast<long>(sample.draws.size());
    const long m = *config.final_sample;
    std::vector<PosteriorSample::Draw> kept;
    kept.reserve(static_cast<std::size_t>(m));
    for (long i = 0; i < m; ++i)
      kept.push_back(std::move(sample.draws[static_cast<std::size_t>(i * n / m)]));
    sample.draws = std::move(kept);
  }
  return sample;
}

namespace {

const char* const kCountryParamNames[] = {"delta1", "delta2", "delta3",
                                          "delta4", "d",      "mu",
                                          "ar"};

std::vector<std::pair<std::string, double>> global_fields(
    const GlobalParams& g) {
  std::vector<std::pair<std::string, double>> out;
  const char* const psi_names[] = {"delta1", "delta2", "delta3", "delta4",
                                   "d"};
  for (std::size_t j = 0; j < 5; ++j) {
    out.emplace_back(std::string("psi_loc_") + psi_names[j], g.psi.loc[j]);
    out.emplace_back(std::string("psi_scale_") + psi_names[j], g.psi.scale[j]);
  }
  out.emplace_back("mu_bar", g.mu_bar);
  out.emplace_back("sigma_mu", g.sigma_mu);
  out.emplace_back("rho_bar", g.rho_bar);
  out.emplace_back("sigma_rho", g.sigma_rho);
  out.emplace_back("sigma_I", g.sigma_eps[0]);
  out.emplace_back("sigma_II", g.sigma_eps[1]);
  out.emplace_back("sigma_III", g.sigma_eps[2]);
  return out;
}

bool set_global_field(GlobalParams& g, const std::string& name, double v) {
  const char* const psi_names[] = {"delta1", "delta2", "delta3", "delta4",
                                   "d"};
  for (std::size_t j = 0; j < 5; ++j) {
    if (name == std::string("psi_loc_") + psi_names[j]) {
      g.psi.loc[j] = v;
      return true;
    }
    if (name == std::string("psi_scale_") + psi_names[j]) {
      g.psi.scale[j] = v;
      return true;
    }
  }
  if (name == "mu_bar") { g.mu_bar = v; return true; }
  if (name == "sigma_mu") { g.sigma_mu = v; return true; }
  if (name == "rho_bar") { g.rho_bar = v; return true; }
  if (name == "sigma_rho") { g.sigma_rho = v; return true; }
  if (name == "sigma_I") { g.sigma_eps[0] = v; return true; }
  if (name == "sigma_II") { g.sigma_eps[1] = v; return true; }
  if (name == "sigma_III") { g.sigma_eps[2] = v; return true; }
  return false;
}

double country_param_value(const CountryParams& p, int j) {
  switch (j) {
    case 0: case 1: case 2: case 3:
      return p.delta[static_cast<std::size_t>(j)];
    case 4: return p.d;
    case 5: return p.mu;
    default: return p.ar;
  }
}

void set_country_param(CountryParams& p, int j, double v) {
  switch (j) {
    case 0: case 1: case 2: case 3:
      p.delta[static_cast<std::size_t>(j)] = v;
      break;
    case 4: p.d = v; break;
    case 5: p.mu = v; break;
    default: p.ar = v; break;
  }
}

}  // namespace

void write_f_draws(std::ostream& out, const PosteriorSample& sample,
                   const TimeGrid& grid) {
  out << "chain,iter,country,period,f\n";
  for (const auto& d : sample.draws) {
    for (std::size_t c = 0; c < sample.countries.size(); ++c) {
      for (int k = 0; k < sample.n_periods; ++k) {
        out << d.chain << ',' << d.iter << ','
            << csv::quote_field(sample.countries[c]) << ','
            << grid.period_start(k) << ','
            << csv::num(sample.f_value(d, static_cast<int>(c), k)) << "\n";
      }
    }
  }
}

void write_param_draws(std::ostream& out, const PosteriorSample& sample) {
  out << "chain,iter,scope,param,value\n";
  for (const auto& d : sample.draws) {
    for (std::size_t c = 0; c < sample.countries.size(); ++c) {
      for (int j = 0; j < 7; ++j) {
        out << d.chain << ',' << d.iter << ','
            << csv::quote_field(sample.countries[c]) << ','
            << kCountryParamNames[j] << ','
            << csv::num(country_param_value(d.params[c], j)) << "\n";
      }
    }
    for (const auto& [name, value] : global_fields(d.globals)) {
      out << d.chain << ',' << d.iter << ",global," << name << ','
          << csv::num(value) << "\n";
    }
  }
}

PosteriorSample read_draws(std::istream& f_csv, std::istream& param_csv,
                           const TimeGrid& grid) {
  PosteriorSample sample;
  sample.n_periods = grid.n_estimation_periods();

  std::map<std::pair<int, long>, std::size_t> index;
  std::map<std::string, std::size_t> country_index;

  {
    csv::Reader reader(f_csv);
    auto header = reader.next();
    if (!header || header->size() != 5 || (*header)[0] != "chain")
      throw ParseError("draws: bad header in trajectory CSV");
    while (auto row = reader.next()) {
      if (row->size() != 5)
        throw ParseError("draws: line " + std::to_string(reader.line()) +
                         ": expected 5 fields");
      const auto chain = csv::to_long((*row)[0]);
      const auto iter = csv::to_long((*row)[1]);
      const auto year = csv::to_long((*row)[3]);
      const auto value = csv::to_double((*row)[4]);
      if (!chain || !iter || !year || !value)
        throw ParseError("draws: line " + std::to_string(reader.line()) +
                         ": malformed row");
      if (!country_index.count((*row)[2])) {
        country_index[(*row)[2]] = sample.countries.size();
        sample.countries.push_back((*row)[2]);
      }
      const int k = grid.period_of_start(static_cast<int>(*year));
      if (k < 0 || k >= sample.n_periods)
        throw ValidationError("draws: line " + std::to_string(reader.line()) +
                              ": period outside estimation grid");
      const auto key = std::make_pair(static_cast<int>(*chain), *iter);
      if (!index.count(key)) {
        index[key] = sample.draws.size();
        sample.draws.push_back({static_cast<int>(*chain), *iter, {}, {}, {}});
      }
      auto& draw = sample.draws[index[key]];
      const std::size_t c = country_index[(*row)[2]];
      const std::size_t need =
          (c + 1) * static_cast<std::size_t>(sample.n_periods);
      if (draw.f.size() < need) draw.f.resize(need, 0.0);
      draw.f[c * static_cast<std::size_t>(sample.n_periods) +
             static_cast<std::size_t>(k)] = *value;
    }
  }

  {
    csv::Reader reader(param_csv);
    auto header = reader.next();
    if (!header || header->size() != 5 || (*header)[0] != "chain")
      throw ParseError("draws: bad header in parameter CSV");
    for (auto& d : sample.draws)
      d.params.resize(sample.countries.size());
    while (auto row = reader.next()) {
      if (row->size() != 5)
        throw ParseError("draws: line " + std::to_string(reader.line()) +
                         ": expected 5 fields");
      const auto chain = csv::to_long((*row)[0]);
      const auto iter = csv::to_long((*row)[1]);
      const auto value = csv::to_double((*row)[4]);
      if (!chain || !iter || !value)
        throw ParseError("draws: line " + std::to_string(reader.line()) +
                         ": malformed row");
      const auto key = std::make_pair(static_cast<int>(*chain), *iter);
      const auto it = index.find(key);
      if (it == index.end())
        throw ValidationError(
            "draws: parameter row for unknown (chain, iter) at line " +
            std::to_string(reader.line()));
      auto& draw = sample.draws[it->second];
      const std::string& scope = (*row)[2];
      const std::string& name = (*row)[3];
      if (scope == "global") {
        if (!set_global_field(draw.globals, name, *value))
          throw ValidationError("draws: unknown global parameter " + name);
      } else {
        const auto cit = country_index.find(scope);
        if (cit == country_index.end())
          throw ValidationError("draws: parameter for unknown country " +
                                scope);
        int j = -1;
        for (int i = 0; i < 7; ++i)
          if (name == kCountryParamNames[i]) j = i;
        if (j < 0)
          throw ValidationError("draws: unknown country parameter " + name);
        set_country_param(draw.params[cit->second], j, *value);
      }
    }
  }

  std::sort(sample.draws.begin(), sample.draws.end(),
            [](const auto& a, const auto& b) {
              return std::tie(a.chain, a.iter) < std::tie(b.chain, b.iter);
            });
  int max_chain = 0;
  for (const auto& d : sample.draws) max_chain = std::max(max_chain, d.chain);
  sample.n_chains = max_chain;
  return sample;
}

InitBundle warm_start_from_params(std::istream& param_csv) {
  csv::Reader reader(param_csv);
  auto header = reader.next();
  if (!header || header->size() != 5 || (*header)[0] != "chain")
    throw ParseError("warm start: bad header in parameter CSV");
  InitBundle init;
  GlobalParams globals;
  bool have_globals = false;
  // Later rows overwrite earlier ones, so the bundle ends at the last draw.
  while (auto row = reader.next()) {
    if (row->size() != 5) continue;
    const auto value = csv::to_double((*row)[4]);
    if (!value) continue;
    const std::string& scope = (*row)[2];
    const std::string& name = (*row)[3];
    if (scope == "global") {
      if (set_global_field(globals, name, *value)) have_globals = true;
    } else {
      for (int i = 0; i < 7; ++i)
        if (name == kCountryParamNames[i])
          set_country_param(init.params[scope], i, *value);
    }
  }
  if (have_globals) init.globals = globals;
  return init;
}

}  // namespace tfr
