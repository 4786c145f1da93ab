#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qop {

// Deterministic random source used throughout the library.
//
// std::normal_distribution is implementation-defined, so reproducible noise
// draws use mt19937_64 plus an explicit Box-Muller transform. One engine step
// maps to one uniform; normals come in pairs, with the second value cached, so
// the draw order is fully determined by the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on (0, 1]; the open lower end keeps log(u) finite.
  double uniform01() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Uniform on [a, b].
  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Uniform on {0, ..., n-1} via the multiply-shift reduction.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = k_two_pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static constexpr double k_two_pi = 6.283185307179586476925286766559;

  std::mt19937_64 engine_;
  std::uint64_t seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qop
