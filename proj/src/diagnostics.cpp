#include "tfr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "tfr/csv.hpp"
#include "tfr/error.hpp"

namespace tfr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x, double mean) {
  double s = 0;
  for (double v : x) s += (v - mean) * (v - mean);
  return s / static_cast<double>(x.size() - 1);
}

// Halves of each chain, trimmed to a common even length.
std::vector<std::span<const double>> split_halves(
    const std::vector<std::vector<double>>& chains) {
  std::size_t min_len = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) min_len = std::min(min_len, c.size());
  const std::size_t half = min_len / 2;
  std::vector<std::span<const double>> seqs;
  for (const auto& c : chains) {
    seqs.emplace_back(c.data(), half);
    seqs.emplace_back(c.data() + half, half);
  }
  return seqs;
}

struct PooledVariance {
  double w = 0;      // mean within-sequence variance
  double var_plus = 0;
  std::size_t n = 0;  // sequence length
  std::size_t m = 0;  // number of sequences
  std::vector<double> means;
};

PooledVariance pooled_variance(
    const std::vector<std::span<const double>>& seqs) {
  PooledVariance p;
  p.m = seqs.size();
  p.n = seqs.front().size();
  double w = 0;
  for (const auto& s : seqs) {
    const double m = mean_of(s);
    p.means.push_back(m);
    w += variance_of(s, m);
  }
  p.w = w / static_cast<double>(p.m);
  const double grand = mean_of(p.means);
  double b_over_n = 0;
  for (double m : p.means) b_over_n += (m - grand) * (m - grand);
  b_over_n /= static_cast<double>(p.m - 1);
  const double n = static_cast<double>(p.n);
  p.var_plus = (n - 1.0) / n * p.w + b_over_n;
  return p;
}

}  // namespace

double split_psrf(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2)
    throw ValidationError("split_psrf: need at least 2 chains");
  for (const auto& c : chains)
    if (c.size() < 4)
      throw ValidationError("split_psrf: chains too short to split");
  const auto seqs = split_halves(chains);
  const auto p = pooled_variance(seqs);
  if (!(p.w > 0)) return 1.0;
  return std::max(1.0, std::sqrt(p.var_plus / p.w));
}

std::vector<double> autocorrelations(std::span<const double> x, int max_lag) {
  const std::size_t n = x.size();
  if (n < 2)
    throw ValidationError("autocorrelations: sequence too short");
  const double m = mean_of(x);
  double c0 = 0;
  for (double v : x) c0 += (v - m) * (v - m);
  std::vector<double> rho;
  rho.reserve(static_cast<std::size_t>(max_lag));
  for (int lag = 1; lag <= max_lag && static_cast<std::size_t>(lag) < n;
       ++lag) {
    double c = 0;
    for (std::size_t i = static_cast<std::size_t>(lag); i < n; ++i)
      c += (x[i] - m) * (x[i - static_cast<std::size_t>(lag)] - m);
    rho.push_back(c0 > 0 ? c / c0 : 0.0);
  }
  return rho;
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  if (chains.empty())
    throw ValidationError("effective_sample_size: no chains");
  const auto seqs = split_halves(chains);
  for (const auto& s : seqs)
    if (s.size() < 4)
      throw ValidationError("effective_sample_size: chains too short");
  const auto p = pooled_variance(seqs);
  if (!(p.var_plus > 0))
    return static_cast<double>(p.m * p.n);

  const std::size_t n = p.n;
  // Combined autocorrelation: 1 - (W - mean within-sequence
  // autocovariance at the lag) / var_plus.
  std::vector<std::vector<double>> acov;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const auto& x = seqs[s];
    const double m = p.means[s];
    std::vector<double> a(n, 0.0);
    for (std::size_t lag = 0; lag < n; ++lag) {
      double c = 0;
      for (std::size_t i = lag; i < n; ++i)
        c += (x[i] - m) * (x[i - lag] - m);
      a[lag] = c / static_cast<double>(n);
    }
    acov.push_back(std::move(a));
  }

  auto rho_at = [&](std::size_t lag) {
    double mean_acov = 0;
    for (const auto& a : acov) mean_acov += a[lag];
    mean_acov /= static_cast<double>(acov.size());
    // Within-sequence variance with the n/(n-1) correction used in W.
    const double w_adjusted = p.w * (static_cast<double>(n) - 1.0) /
                              static_cast<double>(n);
    return 1.0 - (w_adjusted - mean_acov) / p.var_plus;
  };

  // Geyer initial positive sequence: sum pairs while they stay positive.
  double tau = 1.0;
  double prev_pair = std::numeric_limits<double>::max();
  for (std::size_t lag = 1; lag + 1 < n; lag += 2) {
    double pair = rho_at(lag) + rho_at(lag + 1);
    if (pair < 0) break;
    if (pair > prev_pair) pair = prev_pair;  // enforce monotonicity
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  const double total = static_cast<double>(p.m * p.n);
  return std::min(total, std::max(1.0, total / tau));
}

bool DiagnosticsReport::any_flagged() const {
  return std::any_of(rows.begin(), rows.end(),
                     [](const Row& r) { return r.flagged; });
}

namespace {

void add_row(DiagnosticsReport& report, const std::string& name,
             const std::vector<std::vector<double>>& chains) {
  DiagnosticsReport::Row row;
  row.name = name;
  const bool multi = chains.size() >= 2;

  // A parameter frozen at a constant (for example a pinned trajectory)
  // carries no convergence information.
  bool constant = true;
  const double first = chains.front().front();
  for (const auto& c : chains)
    for (double v : c)
      if (v != first) constant = false;

  if (constant) {
    row.psrf = multi ? 1.0 : kNaN;
    row.ess = kNaN;
    row.lag1 = row.lag5 = row.lag10 = 0.0;
    row.flagged = false;
    report.rows.push_back(row);
    return;
  }

  row.psrf = multi ? split_psrf(chains) : kNaN;
  row.ess = effective_sample_size(chains);
  const auto rho = autocorrelations(chains.front(), 10);
  row.lag1 = rho.size() > 0 ? rho[0] : 0.0;
  row.lag5 = rho.size() > 4 ? rho[4] : 0.0;
  row.lag10 = rho.size() > 9 ? rho[9] : 0.0;
  row.flagged = multi && row.psrf > kPsrfFlagThreshold;
  report.rows.push_back(row);
}

}  // namespace

DiagnosticsReport diagnostics(const PosteriorSample& sample) {
  if (sample.draws.empty())
    throw ValidationError("diagnostics: empty sample");
  DiagnosticsReport report;
  report.between_chains = sample.n_chains >= 2;
  if (!report.between_chains)
    report.notice =
        "single chain: between-chain statistics (PSRF) omitted";

  // Group draw indices by chain, preserving iteration order.
  std::vector<std::vector<std::size_t>> by_chain(
      static_cast<std::size_t>(sample.n_chains));
  for (std::size_t i = 0; i < sample.draws.size(); ++i)
    by_chain[static_cast<std::size_t>(sample.draws[i].chain - 1)].push_back(i);

  auto chains_of = [&](auto&& getter) {
    std::vector<std::vector<double>> chains;
    for (const auto& idx : by_chain) {
      if (idx.empty()) continue;
      std::vector<double> c;
      c.reserve(idx.size());
      for (std::size_t i : idx) c.push_back(getter(sample.draws[i]));
      chains.push_back(std::move(c));
    }
    return chains;
  };

  const char* const cp_names[] = {"delta1", "delta2", "delta3", "delta4",
                                  "d", "mu", "ar"};
  for (std::size_t c = 0; c < sample.countries.size(); ++c) {
    for (int k = 0; k < sample.n_periods; ++k) {
      add_row(report,
              "f[" + sample.countries[c] + "][" + std::to_string(k) + "]",
              chains_of([&](const PosteriorSample::Draw& d) {
                return sample.f_value(d, static_cast<int>(c), k);
              }));
    }
    for (int j = 0; j < 7; ++j) {
      add_row(report,
              std::string(cp_names[j]) + "[" + sample.countries[c] + "]",
              chains_of([&](const PosteriorSample::Draw& d) {
                switch (j) {
                  case 0: case 1: case 2: case 3:
                    return d.params[c].delta[static_cast<std::size_t>(j)];
                  case 4: return d.params[c].d;
                  case 5: return d.params[c].mu;
                  default: return d.params[c].ar;
                }
              }));
    }
  }

  const char* const g_names[] = {"mu_bar", "sigma_mu", "rho_bar", "sigma_rho",
                                 "sigma_I", "sigma_II", "sigma_III"};
  for (int j = 0; j < 7; ++j) {
    add_row(report, g_names[j],
            chains_of([&](const PosteriorSample::Draw& d) {
              switch (j) {
                case 0: return d.globals.mu_bar;
                case 1: return d.globals.sigma_mu;
                case 2: return d.globals.rho_bar;
                case 3: return d.globals.sigma_rho;
                case 4: return d.globals.sigma_eps[0];
                case 5: return d.globals.sigma_eps[1];
                default: return d.globals.sigma_eps[2];
              }
            }));
  }
  return report;
}

void write_diagnostics_csv(std::ostream& out,
                           const DiagnosticsReport& report) {
  out << "param,psrf,ess,lag1,lag5,lag10,flagged\n";
  for (const auto& r : report.rows) {
    out << csv::quote_field(r.name) << ','
        << (std::isnan(r.psrf) ? "" : csv::fixed(r.psrf, 4)) << ','
        << (std::isnan(r.ess) ? "" : csv::fixed(r.ess, 1)) << ','
        << csv::fixed(r.lag1, 4) << ',' << csv::fixed(r.lag5, 4) << ','
        << csv::fixed(r.lag10, 4) << ',' << (r.flagged ? 1 : 0) << "\n";
  }
}

void write_diagnostics_text(std::ostream& out,
                            const DiagnosticsReport& report) {
  std::size_t flagged = 0;
  double worst = 0;
  std::string worst_name;
  for (const auto& r : report.rows) {
    if (r.flagged) ++flagged;
    if (!std::isnan(r.psrf) && r.psrf > worst) {
      worst = r.psrf;
      worst_name = r.name;
    }
  }
  out << "parameters: " << report.rows.size() << "\n";
  if (!report.notice.empty()) out << "note: " << report.notice << "\n";
  if (report.between_chains) {
    out << "worst psrf: " << csv::fixed(worst, 4) << " (" << worst_name
        << ")\n";
    out << "flagged (psrf > " << csv::fixed(kPsrfFlagThreshold, 2)
        << "): " << flagged << "\n";
    out << (flagged == 0 ? "convergence: ok" : "convergence: NOT ok") << "\n";
  }
}

}  // namespace tfr
