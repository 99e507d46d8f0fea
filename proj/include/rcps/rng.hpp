#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rcps {

// splitmix64 finalizer; used to derive independent child seeds from a base
// seed and a stream index so that parallel replicates are reproducible
// regardless of scheduling.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Random generator with explicit inverse/rejection transforms on top of
// mt19937_64. The engine is fully specified by the standard; the standard
// library's *distributions* are not, so we do not use them anywhere results
// must be reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // child stream for replicate `stream`, independent of this generator's state
  static Rng child(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix_seed(seed, stream));
  }

  // uniform on [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // uniform on (0, 1]
  double uniform_pos() { return 1.0 - uniform(); }

  // standard normal, Box-Muller (two fresh uniforms per call)
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // exact Poisson via Knuth's product-of-uniforms; cost grows with the mean,
  // which stays modest in every use here
  long poisson(double mean) {
    const double limit = std::exp(-mean);
    long k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  // Gamma(shape, rate) via Marsaglia-Tsang, with the u^(1/shape) boost for
  // shape < 1
  double gamma(double shape, double rate) {
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rcps
