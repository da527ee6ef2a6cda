#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace sfcr {

// Seedable RNG used everywhere in the library.  Distribution objects are
// constructed per call so the only mutable state is the engine itself, which
// keeps checkpointed runs bit-reproducible (std::normal_distribution caches a
// spare deviate; a persistent object would make the stream depend on call
// history in ways that do not round-trip through serialization).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(engine_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double sd) {
    return std::normal_distribution<double>(mean, sd)(engine_);
  }
  // Shape/rate parameterization (std::gamma_distribution's second parameter is
  // a scale, hence the inversion).
  double gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }
  double exponential() { return std::exponential_distribution<double>(1.0)(engine_); }
  double gumbel() { return -std::log(-std::log(uniform())); }
  // Uniform integer in [0, n).
  int integer(int n) { return std::uniform_int_distribution<int>(0, n - 1)(engine_); }

  std::mt19937_64& engine() { return engine_; }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }
  void deserialize(const std::string& text) {
    std::istringstream is(text);
    is >> engine_;
  }

 private:
  std::mt19937_64 engine_;
};

// Gamma(shape, rate) restricted to [lower, inf).  Inverse-CDF construction so
// the draw stays correct even when nearly all conditional mass sits below the
// bound (declared in mvn.cpp's translation unit to keep Boost out of this
// header).
double truncated_gamma(double shape, double rate, double lower, Rng& rng);

}  // namespace sfcr
