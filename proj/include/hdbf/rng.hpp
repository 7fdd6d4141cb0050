#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "hdbf/types.hpp"

namespace hdbf {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Key derivation for independent streams: binds both words through two
// finalizer rounds. Used for (seed, stream) pairs and child indices.
inline constexpr std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = mix64(a + kGoldenGamma * (b + 0x632be59bd9b4e019ULL));
  return mix64(z + kGoldenGamma);
}

// Splittable counter-based generator (splitmix64 core). child(i) depends only
// on the construction key, never on how much this instance has been consumed,
// so work item i always sees the same stream no matter which thread runs it.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key), state_(key) {}
  explicit Rng(RngSeed s) : Rng(mix_key(s.seed, s.stream)) {}

  std::uint64_t key() const { return key_; }

  Rng child(std::uint64_t index) const { return Rng(mix_key(key_, index)); }

  std::uint64_t next_u64() {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  // Uniform in [0, 1), 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Box-Muller pair, one value cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_unit();  // (0, 1], keeps log finite
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Standardized chi-square(1): (z^2 - 1) / sqrt(2).
  double next_std_chi2_1() {
    const double z = next_normal();
    return (z * z - 1.0) * 0.70710678118654752440;
  }

  // Rademacher +-1.
  double next_sign() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  // Uniform integer in [0, n). Multiply-shift; bias is below 2^-64 * n.
  std::int64_t next_index(std::int64_t n) {
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(next_u64()) * static_cast<std::uint64_t>(n);
    return static_cast<std::int64_t>(wide >> 64);
  }

  // UniformRandomBitGenerator interface so <random> distributions can run on
  // top of this stream.
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t key_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hdbf
