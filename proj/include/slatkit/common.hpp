#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace slatkit {

/// Thrown on invalid configuration or precondition violations.
class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical routine cannot deliver a usable result.
class solver_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Self-contained samplers on top of mt19937_64 so that a fixed seed pins
// every draw regardless of standard-library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    const double u = std::generate_canonical<double, 53>(engine_);
    return lo + (hi - lo) * u;
  }

  // Box-Muller; one value per call, the pair partner is discarded.
  double normal(double mean, double stddev) {
    double u1 = std::generate_canonical<double, 53>(engine_);
    const double u2 = std::generate_canonical<double, 53>(engine_);
    if (u1 <= 0.0) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  // Zero-mean Laplace sample with the requested standard deviation
  // (scale b = stddev / sqrt(2)).
  double laplace(double stddev) {
    const double b = stddev / std::sqrt(2.0);
    const double u = uniform(-0.5, 0.5);
    const double a = 1.0 - 2.0 * std::abs(u);
    return (u < 0.0 ? b : -b) * std::log(a > 0.0 ? a : 1e-300);
  }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform(0.0, 1.0) * static_cast<double>(n)) % n;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace slatkit
