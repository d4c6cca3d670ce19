// Deterministic random number generation. std::normal_distribution and
// std::gamma_distribution are implementation-defined, so draws are produced
// here from raw mt19937_64 output; fits are then bit-reproducible for a
// fixed seed on any platform.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "mltr/math.hpp"

namespace mltr {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on the open interval (0,1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via inverse-CDF of a single uniform.
  double normal() { return norm_quantile(uniform()); }

  // Gamma(shape, 1) by Marsaglia-Tsang squeeze; requires shape >= 1.
  double gamma(double shape) {
    if (!(shape >= 1.0))
      throw std::invalid_argument("Rng::gamma: shape must be >= 1");
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Inverse-gamma(shape, scale) draw, used for the error-variance update.
  double inverse_gamma(double shape, double scale) {
    return scale / gamma(shape);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mltr
