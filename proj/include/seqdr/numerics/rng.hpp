#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace seqdr::numerics {

// A reproducible random stream is identified by (master_seed, stream_id).
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// xoshiro256** seeded through splitmix64. Every variate below is built from
// raw 64-bit outputs with fixed arithmetic, so sequences are identical across
// compilers and standard libraries.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(SeedSpec seed) : Rng(seed, 0) {}

  // Independent substream `index` of `seed`, used for counter-style access
  // (e.g. the i-th observation of a simulated stream).
  Rng(SeedSpec seed, std::uint64_t index) {
    std::uint64_t sm = seed.master_seed;
    const std::uint64_t a = splitmix64(sm);
    sm = a ^ (seed.stream_id * 0xD1B54A32D192ED03ULL);
    const std::uint64_t b = splitmix64(sm);
    sm = b ^ (index * 0x8CB92BA72F3D8DD7ULL);
    for (auto& word : state_) word = splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Marsaglia polar method; the second variate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
  }

  // Chi-square with integer degrees of freedom as a sum of squared normals.
  double chi_square(int dof) {
    double v = 0.0;
    for (int i = 0; i < dof; ++i) {
      const double z = normal();
      v += z * z;
    }
    return v;
  }

  // Student t with integer degrees of freedom, Z / sqrt(V / dof).
  double student_t(int dof) {
    const double z = normal();
    return z / std::sqrt(chi_square(dof) / static_cast<double>(dof));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace seqdr::numerics
