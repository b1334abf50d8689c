#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace cohortbayes {

// Splittable RNG stream. Stream k of a run with seed s is keyed by s ^ k and
// the key is expanded through SplitMix64 before seeding the engine, so
// adjacent stream ids do not produce correlated state. All distribution
// recipes below are written out explicitly; given the same call sequence a
// stream reproduces the same values on any platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : base_key_(seed ^ stream) {
    std::uint64_t key = base_key_;
    std::seed_seq seq{splitmix64(key), splitmix64(key), splitmix64(key),
                      splitmix64(key)};
    engine_.seed(seq);
  }

  RngStream substream(std::uint64_t k) const {
    return RngStream(base_key_, k);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on (0, 1): 53-bit mantissa, zero excluded so log() is safe.
  double uniform() {
    double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal, Box-Muller; the second value of each pair is cached as
  // part of the stream state.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double exponential() { return -std::log(uniform()); }

  // Marsaglia-Tsang; shapes below one are boosted via U^{1/a}.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma shape must be > 0");
    if (shape < 1.0) {
      double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
        return d * v;
      }
    }
  }

  double chisq(double df) { return 2.0 * gamma(0.5 * df); }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  // Dirichlet(1,...,1) via normalized unit-rate exponentials.
  Eigen::VectorXd dirichlet_uniform(Eigen::Index n) {
    Eigen::VectorXd w(n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      w[i] = exponential();
      total += w[i];
    }
    w /= total;
    return w;
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t base_key_ = 0;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cohortbayes
