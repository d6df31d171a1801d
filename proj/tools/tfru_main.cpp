// tfru: estimation and probabilistic projection of total fertility rates
// from multiple noisy data sources.
//
// Pipeline: fit-bias -> estimate -> project, plus validate (out-of-sample
// splits or synthetic calibration), simulate (synthetic corpora) and plot
// (fan charts). Every command is deterministic given its inputs and seed.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "tfr/bias_model.hpp"
#include "tfr/diagnostics.hpp"
#include "tfr/fan_chart.hpp"
#include "tfr/fertility_model.hpp"
#include "tfr/inference.hpp"
#include "tfr/projection.hpp"
#include "tfr/validation.hpp"

namespace fs = std::filesystem;
using namespace tfr;

namespace {

constexpr int kExitError = 1;
constexpr int kExitDiagnostics = 3;  // estimate finished but PSRF flagged

// Every flag can also be set through the environment (TFRU_ prefix) or a
// flat key=value config file passed as --config.
CLI::Option* env(CLI::Option* opt) {
  std::string name = opt->get_lnames()[0];
  for (auto& c : name)
    c = c == '-' ? '_' : static_cast<char>(std::toupper(c));
  opt->envname("TFRU_" + name);
  return opt;
}

struct GridOpts {
  int start_year = 1950;
  int estimation_end = 2015;
  int horizon = 2100;
  TimeGrid grid() const { return {start_year, estimation_end, horizon}; }
};

void add_grid(CLI::App* cmd, GridOpts& g) {
  env(cmd->add_option("--start-year", g.start_year,
                      "First year of the five-year grid"));
  env(cmd->add_option("--estimation-end", g.estimation_end,
                      "End of the estimation window (period boundary)"));
  env(cmd->add_option("--horizon", g.horizon, "Projection horizon year"));
}

struct BiasOpts {
  double rho_min = 0.05;
  double vr_rho = 0.025;
  std::string vr_countries;
  bool per_country = false;
  bool saturated = false;
};

void add_bias(CLI::App* cmd, BiasOpts& b) {
  env(cmd->add_option("--rho-min", b.rho_min, "Floor on fitted error SDs"));
  env(cmd->add_option("--vr-rho", b.vr_rho,
                      "Fixed error SD for designated vital registration"));
  env(cmd->add_option("--vr-countries", b.vr_countries,
                      "Comma-separated countries with trusted VR"));
  env(cmd->add_flag("--per-country", b.per_country,
                    "Also fit each country separately"));
  env(cmd->add_flag("--saturated", b.saturated,
                    "One design cell per source x method combination"));
}

BiasOptions to_options(const BiasOpts& b) {
  BiasOptions options;
  options.rho_min = b.rho_min;
  options.vr_rho = b.vr_rho;
  options.per_country = b.per_country;
  options.saturated = b.saturated;
  std::stringstream ss(b.vr_countries);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) options.vr_high_quality.insert(item);
  return options;
}

struct McmcOpts {
  int chains = 3;
  long iter = 12000;
  long burnin = 2000;
  int thin = 10;
  long final_sample = 0;
  bool pin_past = false;
  bool serial = false;
};

void add_mcmc(CLI::App* cmd, McmcOpts& m) {
  env(cmd->add_option("--chains", m.chains, "Number of MCMC chains"));
  env(cmd->add_option("--iter", m.iter, "Iterations per chain"));
  env(cmd->add_option("--burnin", m.burnin, "Burn-in iterations"));
  env(cmd->add_option("--thin", m.thin, "Thinning interval"));
  env(cmd->add_option("--final-sample", m.final_sample,
                      "Uniformly subsample the retained draws to this size"));
  env(cmd->add_flag("--pin-past", m.pin_past,
                    "Pin past TFR to the reference series (no past "
                    "uncertainty)"));
  env(cmd->add_flag("--serial", m.serial, "Disable parallel chains"));
}

McmcConfig to_config(const McmcOpts& m, std::uint64_t seed) {
  McmcConfig cfg;
  cfg.n_chains = m.chains;
  cfg.n_iter = m.iter;
  cfg.burn_in = m.burnin;
  cfg.thin = m.thin;
  cfg.seed = seed;
  if (m.final_sample > 0) cfg.final_sample = m.final_sample;
  cfg.pin_f_to_reference = m.pin_past;
  cfg.parallel_chains = !m.serial;
  return cfg;
}

std::set<std::string> parse_list(const std::string& csv_list) {
  std::set<std::string> out;
  std::stringstream ss(csv_list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(item);
  return out;
}

struct LoadedData {
  std::vector<Observation> obs;
  std::map<std::string, ReferenceSeries> refs;
};

LoadedData load_inputs(const std::string& obs_path,
                       const std::string& ref_path, const TimeGrid& grid,
                       const std::string& countries) {
  LoadedData data;
  std::ifstream obs_file(obs_path);
  if (!obs_file)
    throw ValidationError("cannot open observations file " + obs_path);
  auto report = parse_observations(obs_file, grid);
  for (const auto& r : report.rejected)
    std::cerr << "rejected row " << r.line << ": " << r.reason << "\n";
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  data.obs = std::move(report.observations);

  std::ifstream ref_file(ref_path);
  if (!ref_file)
    throw ValidationError("cannot open reference file " + ref_path);
  data.refs = parse_reference_series(ref_file, grid);

  if (!countries.empty()) {
    const auto keep = parse_list(countries);
    std::erase_if(data.obs,
                  [&](const Observation& o) { return !keep.count(o.country); });
    std::erase_if(data.refs,
                  [&](const auto& kv) { return !keep.count(kv.first); });
  }
  return data;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

BiasModelFit load_bias_table(const std::string& path,
                             const BiasOptions& options) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open bias table " + path);
  return read_bias_table(in, options);
}

void write_fan_charts(const fs::path& dir, const QuantileTable* past,
                      const QuantileTable& future, double present_year) {
  std::set<std::string> countries;
  for (const auto& row : future.rows) countries.insert(row.country);
  for (const auto& country : countries) {
    FanChartSpec spec;
    spec.title = country;
    spec.present_year = present_year;
    auto to_points = [&](const QuantileTable& table,
                         std::vector<FanPoint>& out) {
      for (const auto& row : table.rows) {
        if (row.country != country || row.q.size() < 5) continue;
        out.push_back({static_cast<double>(row.period_start) + 3.0, row.q[0],
                       row.q[1], row.q[2], row.q[3], row.q[4]});
      }
    };
    if (past) to_points(*past, spec.past);
    to_points(future, spec.future);
    auto out = open_out(dir / ("fan_" + country + ".svg"));
    render_fan_chart(out, spec);
  }
}

const std::vector<double> kProbs = {0.025, 0.1, 0.5, 0.9, 0.975};

// --- fit-bias ---------------------------------------------------------

struct FitBiasArgs {
  std::string obs, ref, out, countries;
  GridOpts grid;
  BiasOpts bias;
};

int run_fit_bias(const FitBiasArgs& args) {
  const TimeGrid grid = args.grid.grid();
  const auto data = load_inputs(args.obs, args.ref, grid, args.countries);
  if (data.obs.empty()) throw ValidationError("no observations");
  const auto fit =
      fit_bias_model(data.obs, data.refs, grid, to_options(args.bias));
  fs::create_directories(args.out);
  auto out = open_out(fs::path(args.out) / "bias_table.csv");
  write_bias_table(out, fit);
  std::cout << "bias table: " << fit.table.size() << " cells from "
            << data.obs.size() << " observations\n";
  return 0;
}

// --- estimate ---------------------------------------------------------

struct EstimateArgs {
  std::string obs, ref, bias, out, countries, warm_start;
  std::uint64_t seed = 0;
  GridOpts grid;
  BiasOpts bias_opts;
  McmcOpts mcmc;
};

int run_estimate(const EstimateArgs& args) {
  const TimeGrid grid = args.grid.grid();
  const auto data = load_inputs(args.obs, args.ref, grid, args.countries);
  if (data.obs.empty()) throw ValidationError("no observations");
  const auto fit = load_bias_table(args.bias, to_options(args.bias_opts));

  const ModelData model = prepare_model_data(data.obs, data.refs, fit, grid);
  InitBundle init;
  if (!args.warm_start.empty()) {
    std::ifstream in(args.warm_start);
    if (!in)
      throw ValidationError("cannot open warm start " + args.warm_start);
    init = warm_start_from_params(in);
  }

  const auto sample = run_mcmc(model, to_config(args.mcmc, args.seed), init);

  fs::create_directories(args.out);
  {
    auto out = open_out(fs::path(args.out) / "f_draws.csv");
    write_f_draws(out, sample, grid);
  }
  {
    auto out = open_out(fs::path(args.out) / "params.csv");
    write_param_draws(out, sample);
  }
  {
    auto out = open_out(fs::path(args.out) / "estimation_quantiles.csv");
    write_quantiles(out, summarize_estimation(sample, grid, kProbs));
  }

  const auto report = diagnostics(sample);
  {
    auto out = open_out(fs::path(args.out) / "diagnostics.csv");
    write_diagnostics_csv(out, report);
  }
  {
    auto out = open_out(fs::path(args.out) / "diagnostics.txt");
    write_diagnostics_text(out, report);
  }
  write_diagnostics_text(std::cout, report);
  std::cout << "draws: " << sample.draws.size() << "\n";
  return report.any_flagged() ? kExitDiagnostics : 0;
}

// --- project ----------------------------------------------------------

struct ProjectArgs {
  std::string draws, params, out;
  std::uint64_t seed = 0;
  bool serial = false;
  GridOpts grid;
};

int run_project(const ProjectArgs& args) {
  const TimeGrid grid = args.grid.grid();
  std::ifstream f_in(args.draws);
  if (!f_in) throw ValidationError("cannot open draws " + args.draws);
  std::ifstream p_in(args.params);
  if (!p_in) throw ValidationError("cannot open params " + args.params);
  const auto sample = read_draws(f_in, p_in, grid);

  ProjectionConfig cfg;
  cfg.seed = args.seed;
  cfg.parallel = !args.serial;
  cfg.probs = kProbs;
  const auto result = project(sample, grid, cfg);

  fs::create_directories(args.out);
  {
    auto out = open_out(fs::path(args.out) / "trajectories.csv");
    write_trajectories(out, result);
  }
  const auto future = summarize(result, kProbs);
  {
    auto out = open_out(fs::path(args.out) / "projection_quantiles.csv");
    write_quantiles(out, future);
  }
  const auto past = summarize_estimation(sample, grid, kProbs);
  {
    auto out = open_out(fs::path(args.out) / "estimation_quantiles.csv");
    write_quantiles(out, past);
  }
  write_fan_charts(args.out, &past, future,
                   static_cast<double>(grid.estimation_end()));

  long clamps = 0;
  for (const auto& cp : result.countries) clamps += cp.clamp_events;
  std::cout << "projected " << result.countries.size() << " countries x "
            << sample.draws.size() << " draws to " << grid.horizon_year()
            << (clamps ? " (" + std::to_string(clamps) + " floor clamps)"
                       : "")
            << "\n";
  return 0;
}

// --- validate ---------------------------------------------------------

struct ValidateArgs {
  std::string obs, ref, bias, out, countries;
  int cutoff = 2005;
  std::uint64_t seed = 0;
  bool calibration = false;
  int reps = 200;
  GridOpts grid;
  BiasOpts bias_opts;
  McmcOpts mcmc;
};

BiasModelFit default_synthetic_fit(const BiasOptions& options) {
  BiasModelFit fit;
  fit.options = options;
  fit.table.push_back({Source::DHS, Method::Direct, 0.1, 0.4, 28});
  fit.table.push_back({Source::DHS, Method::Indirect, 0.3, 0.9, 8});
  fit.table.push_back({Source::MIS, Method::Direct, 0.2, 0.56, 5});
  fit.table.push_back({Source::MIS, Method::Indirect, 0.75, 1.09, 30});
  return fit;
}

SyntheticTruth default_truth() {
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

std::vector<ObservationSlot> default_design(const TimeGrid& grid) {
  std::vector<ObservationSlot> design;
  for (int k = 0; k < grid.n_estimation_periods(); ++k) {
    design.push_back({grid.center(k), Source::DHS, Method::Direct, "", 0});
    design.push_back(
        {grid.center(k) + 1.8, Source::DHS, Method::Direct, "", 0});
    if (k % 2 == 0)
      design.push_back(
          {grid.center(k) + 0.9, Source::MIS, Method::Indirect, "", 0});
    if (k % 3 == 0)
      design.push_back(
          {grid.center(k) + 0.4, Source::DHS, Method::Indirect, "", 0});
    if (k % 4 == 0)
      design.push_back(
          {grid.center(k) + 1.2, Source::MIS, Method::Direct, "", 0});
  }
  return design;
}

int run_validate(const ValidateArgs& args) {
  fs::create_directories(args.out);

  if (args.calibration) {
    const TimeGrid grid = args.grid.grid();
    const auto options = to_options(args.bias_opts);
    const auto fit = args.bias.empty() ? default_synthetic_fit(options)
                                       : load_bias_table(args.bias, options);
    CalibrationConfig cfg;
    cfg.truth = default_truth();
    cfg.design = default_design(grid);
    cfg.mcmc = to_config(args.mcmc, 0);
    cfg.mcmc.sample_globals = false;
    cfg.mcmc.parallel_chains = false;
    cfg.seed = args.seed;
    cfg.parallel = !args.mcmc.serial;

    const auto report = calibration_study(args.reps, cfg, fit, grid);
    auto out = open_out(fs::path(args.out) / "calibration.csv");
    write_calibration_report(out, report);
    write_calibration_report(std::cout, report);
    return 0;
  }

  // Out-of-sample split protocol: estimate on [start, cutoff], project to
  // the estimation end, score against the held-out reference values.
  const TimeGrid full_grid = args.grid.grid();
  const auto data =
      load_inputs(args.obs, args.ref, full_grid, args.countries);
  if (data.obs.empty()) throw ValidationError("no observations");

  const auto split_result =
      split(data.obs, data.refs, full_grid, args.cutoff);
  for (const auto& c : split_result.flagged)
    std::cerr << "warning: no training data for " << c
              << "; excluded from aggregates\n";
  if (split_result.train.empty())
    throw ValidationError("validate: no training observations before cutoff");

  const TimeGrid train_grid{args.grid.start_year, args.cutoff,
                            args.grid.estimation_end};
  std::map<std::string, ReferenceSeries> train_refs;
  const auto n_train =
      static_cast<std::size_t>(train_grid.n_estimation_periods());
  for (const auto& [country, series] : data.refs) {
    ReferenceSeries truncated;
    truncated.country = country;
    truncated.values.assign(series.values.begin(),
                            series.values.begin() + n_train);
    train_refs[country] = std::move(truncated);
  }

  const auto fit = fit_bias_model(split_result.train, train_refs, train_grid,
                                  to_options(args.bias_opts));
  {
    auto out = open_out(fs::path(args.out) / "bias_table.csv");
    write_bias_table(out, fit);
  }

  const ModelData model =
      prepare_model_data(split_result.train, train_refs, fit, train_grid);
  const auto sample = run_mcmc(model, to_config(args.mcmc, args.seed));

  ProjectionConfig pcfg;
  pcfg.seed = args.seed + 1;
  pcfg.parallel = !args.mcmc.serial;
  pcfg.probs = kProbs;
  const auto result = project(sample, train_grid, pcfg);
  const auto future = summarize(result, kProbs);
  {
    auto out = open_out(fs::path(args.out) / "projection_quantiles.csv");
    write_quantiles(out, future);
  }

  // Score only the countries that kept training data.
  auto heldout = split_result.heldout;
  std::erase_if(heldout, [&](const auto& kv) {
    return std::find(split_result.flagged.begin(), split_result.flagged.end(),
                     kv.first) != split_result.flagged.end() ||
           std::find(sample.countries.begin(), sample.countries.end(),
                     kv.first) == sample.countries.end();
  });
  const auto report = score(future, heldout);
  {
    auto out = open_out(fs::path(args.out) / "validation_report.csv");
    write_validation_report(out, report);
  }
  const auto past = summarize_estimation(sample, train_grid, kProbs);
  write_fan_charts(args.out, &past, future, static_cast<double>(args.cutoff));

  std::cout << "held-out points: " << report.n << "\n"
            << "mae: " << report.mae << "\n"
            << "coverage80: " << report.coverage80 << "\n"
            << "coverage95: " << report.coverage95 << "\n";
  return 0;
}

// --- simulate ---------------------------------------------------------

struct SimulateArgs {
  std::string out, bias;
  std::uint64_t seed = 0;
  int reps = 1;
  GridOpts grid;
  BiasOpts bias_opts;
};

int run_simulate(const SimulateArgs& args) {
  const TimeGrid grid = args.grid.grid();
  const auto options = to_options(args.bias_opts);
  const auto fit = args.bias.empty() ? default_synthetic_fit(options)
                                     : load_bias_table(args.bias, options);
  const auto truth = default_truth();
  const auto design = default_design(grid);

  fs::create_directories(args.out);
  for (int rep = 0; rep < args.reps; ++rep) {
    const auto data = simulate_synthetic(
        truth, fit, design, grid,
        splitmix64(args.seed + static_cast<std::uint64_t>(rep)));
    char suffix[16] = "";
    if (args.reps > 1)
      std::snprintf(suffix, sizeof(suffix), "_rep%03d", rep + 1);

    auto obs_out = open_out(fs::path(args.out) /
                            ("synthetic_obs" + std::string(suffix) + ".csv"));
    write_observations(obs_out, data.observations);

    std::map<std::string, ReferenceSeries> refs;
    refs[truth.country] = {truth.country, data.truth.f};
    auto ref_out = open_out(fs::path(args.out) /
                            ("synthetic_ref" + std::string(suffix) + ".csv"));
    write_reference_series(ref_out, refs, grid);
  }
  std::cout << "wrote " << args.reps << " synthetic corpus"
            << (args.reps == 1 ? "" : "es") << " to " << args.out << "\n";
  return 0;
}

// --- plot -------------------------------------------------------------

struct PlotArgs {
  std::string quantiles, past, out;
  double present = 0;
};

int run_plot(const PlotArgs& args) {
  std::ifstream fut_in(args.quantiles);
  if (!fut_in)
    throw ValidationError("cannot open quantiles " + args.quantiles);
  const auto future = read_quantiles(fut_in);

  QuantileTable past;
  const bool have_past = !args.past.empty();
  if (have_past) {
    std::ifstream past_in(args.past);
    if (!past_in) throw ValidationError("cannot open quantiles " + args.past);
    past = read_quantiles(past_in);
  }

  double present = args.present;
  if (present == 0 && !future.rows.empty()) {
    present = static_cast<double>(future.rows[0].period_start);
    for (const auto& row : future.rows)
      present = std::min(present, static_cast<double>(row.period_start));
  }

  fs::create_directories(args.out);
  write_fan_charts(args.out, have_past ? &past : nullptr, future, present);
  std::cout << "fan charts written to " << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Total fertility rate estimation and probabilistic "
               "projection from noisy data sources"};
  app.require_subcommand(1);

  FitBiasArgs fit_args;
  auto* fit_cmd = app.add_subcommand(
      "fit-bias", "Fit per-source bias and error SDs against the reference");
  fit_cmd->set_config("--config");
  env(fit_cmd->add_option("--obs", fit_args.obs, "Observation CSV")
          ->required());
  env(fit_cmd->add_option("--ref", fit_args.ref, "Reference series CSV")
          ->required());
  env(fit_cmd->add_option("--out", fit_args.out, "Output directory")
          ->required());
  env(fit_cmd->add_option("--countries", fit_args.countries,
                          "Comma-separated country filter"));
  add_grid(fit_cmd, fit_args.grid);
  add_bias(fit_cmd, fit_args.bias);

  EstimateArgs est_args;
  auto* est_cmd = app.add_subcommand(
      "estimate", "Sample the posterior of past TFR and model parameters");
  est_cmd->set_config("--config");
  env(est_cmd->add_option("--obs", est_args.obs, "Observation CSV")
          ->required());
  env(est_cmd->add_option("--ref", est_args.ref, "Reference series CSV")
          ->required());
  env(est_cmd->add_option("--bias", est_args.bias,
                          "Bias table CSV from fit-bias")
          ->required());
  env(est_cmd->add_option("--out", est_args.out, "Output directory")
          ->required());
  env(est_cmd->add_option("--seed", est_args.seed, "RNG seed"));
  env(est_cmd->add_option("--countries", est_args.countries,
                          "Comma-separated country filter"));
  env(est_cmd->add_option("--warm-start", est_args.warm_start,
                          "Params CSV from a previous run"));
  add_grid(est_cmd, est_args.grid);
  add_bias(est_cmd, est_args.bias_opts);
  add_mcmc(est_cmd, est_args.mcmc);

  ProjectArgs proj_args;
  auto* proj_cmd = app.add_subcommand(
      "project", "Simulate future TFR trajectories from posterior draws");
  proj_cmd->set_config("--config");
  env(proj_cmd->add_option("--draws", proj_args.draws,
                           "f_draws.csv from estimate")
          ->required());
  env(proj_cmd->add_option("--params", proj_args.params,
                           "params.csv from estimate")
          ->required());
  env(proj_cmd->add_option("--out", proj_args.out, "Output directory")
          ->required());
  env(proj_cmd->add_option("--seed", proj_args.seed, "RNG seed"));
  env(proj_cmd->add_flag("--serial", proj_args.serial,
                         "Disable parallel simulation"));
  add_grid(proj_cmd, proj_args.grid);

  ValidateArgs val_args;
  auto* val_cmd = app.add_subcommand(
      "validate",
      "Out-of-sample split validation, or --calibration for the synthetic "
      "coverage study");
  val_cmd->set_config("--config");
  env(val_cmd->add_option("--obs", val_args.obs, "Observation CSV"));
  env(val_cmd->add_option("--ref", val_args.ref, "Reference series CSV"));
  env(val_cmd->add_option("--bias", val_args.bias,
                          "Bias table for the synthetic generator"));
  env(val_cmd->add_option("--out", val_args.out, "Output directory")
          ->required());
  env(val_cmd->add_option("--cutoff", val_args.cutoff,
                          "Training cutoff year (period boundary)"));
  env(val_cmd->add_option("--seed", val_args.seed, "RNG seed"));
  env(val_cmd->add_option("--countries", val_args.countries,
                          "Comma-separated country filter"));
  env(val_cmd->add_flag("--calibration", val_args.calibration,
                        "Run the synthetic calibration study"));
  env(val_cmd->add_option("--reps", val_args.reps,
                          "Calibration replications"));
  add_grid(val_cmd, val_args.grid);
  add_bias(val_cmd, val_args.bias_opts);
  add_mcmc(val_cmd, val_args.mcmc);

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Generate synthetic observation/reference corpora");
  sim_cmd->set_config("--config");
  env(sim_cmd->add_option("--out", sim_args.out, "Output directory")
          ->required());
  env(sim_cmd->add_option("--seed", sim_args.seed, "RNG seed"));
  env(sim_cmd->add_option("--reps", sim_args.reps, "Number of corpora"));
  env(sim_cmd->add_option("--bias", sim_args.bias,
                          "Bias table for the generator"));
  add_grid(sim_cmd, sim_args.grid);
  add_bias(sim_cmd, sim_args.bias_opts);

  PlotArgs plot_args;
  auto* plot_cmd =
      app.add_subcommand("plot", "Render fan charts from quantile CSVs");
  plot_cmd->set_config("--config");
  env(plot_cmd->add_option("--quantiles", plot_args.quantiles,
                           "Projection quantile CSV")
          ->required());
  env(plot_cmd->add_option("--past", plot_args.past,
                           "Estimation quantile CSV for the past fan"));
  env(plot_cmd->add_option("--out", plot_args.out, "Output directory")
          ->required());
  env(plot_cmd->add_option("--present", plot_args.present,
                           "Year of the present marker"));

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) return run_fit_bias(fit_args);
    if (est_cmd->parsed()) return run_estimate(est_args);
    if (proj_cmd->parsed()) return run_project(proj_args);
    if (val_cmd->parsed()) return run_validate(val_args);
    if (sim_cmd->parsed()) return run_simulate(sim_args);
    if (plot_cmd->parsed()) return run_plot(plot_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
