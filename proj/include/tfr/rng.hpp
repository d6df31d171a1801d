#ifndef TFR_RNG_HPP
#define TFR_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace tfr {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Inverse standard-normal CDF, Wichura's AS 241 (double precision).
double normal_quantile(double p);

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Deterministic random stream. Every variate is produced by inverse CDF
// from one uniform draw, so results are reproducible across compilers and
// independent streams can be derived for parallel work.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : base_(splitmix64(seed)), eng_(base_) {}

  // Independent child stream; derivation is pure in (parent seed, id) and
  // does not advance this stream.
  Rng child(std::uint64_t id) const {
    return Rng(splitmix64(base_ ^ splitmix64(id + 0x632be59bd9b4e019ULL)), kMixed);
  }

  double uniform() {
    // (0, 1) exclusive at both ends.
    const std::uint64_t r = eng_();
    return (static_cast<double>(r >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return normal_quantile(uniform()); }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // N(mean, sd^2) restricted to [lo, hi].
  double trunc_normal(double mean, double sd, double lo, double hi) {
    const double a = normal_cdf((lo - mean) / sd);
    const double b = normal_cdf((hi - mean) / sd);
    if (!(b > a)) {
      // No usable mass at double precision; pin to the nearer boundary.
      return (lo - mean) / sd > 0 ? lo : hi;
    }
    const double u = a + (b - a) * uniform();
    double x = mean + sd * normal_quantile(u);
    if (x < lo) x = lo;
    if (x > hi) x = hi;
    return x;
  }

 private:
  enum MixedTag { kMixed };
  Rng(std::uint64_t mixed, MixedTag) : base_(mixed), eng_(mixed) {}

  std::uint64_t base_;
  std::mt19937_64 eng_;
};

}  // namespace tfr

#endif
