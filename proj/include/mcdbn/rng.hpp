#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mcdbn {

// Deterministic generator behind every stochastic operation in the pipeline.
//
// State is xoshiro256**, seeded by four consecutive splitmix64 outputs from a
// 64-bit user seed. Draw-order contract, relied on by golden files:
//   - next_u64()      consumes one state step
//   - next_uniform()  = (next_u64() >> 11) * 2^-53, one step, in [0, 1)
//   - next_gaussian() consumes exactly two uniform draws u1, u2 (in that
//     order; u1 shifted to (0, 1]) and returns sqrt(-2 ln u1) * cos(2 pi u2)
// Matrix-valued consumers draw entries in row-major order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  std::uint64_t next_u64() {
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

  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_gaussian() {
    const double u1 =
        (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // splitmix64 output scramble; also used standalone for seed derivation.
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_;
};

// Derived child seed for stream `stream` of `master`: the (stream+1)-th
// splitmix64 output from master XOR a fixed tweak, so children never collide
// with the words that seed Rng(master) itself.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t x = master ^ 0x5851F42D4C957F2DULL;
  std::uint64_t out = 0;
  for (std::uint64_t i = 0; i <= stream; ++i) out = Rng::splitmix64(x);
  return out;
}

// Named RNG streams hanging off one seed. Keeps per-phase consumption
// independent of how much any other phase draws.
namespace rng_stream {
constexpr std::uint64_t kModelInit = 0;
constexpr std::uint64_t kPretrain = 1;
constexpr std::uint64_t kFineTune = 2;
constexpr std::uint64_t kDownstream = 3;
constexpr std::uint64_t kCompletion = 4;
constexpr std::uint64_t kMissingness = 5;
constexpr std::uint64_t kSynthBase = 64;            // + instrument index
constexpr std::uint64_t kMissingnessBase = 4096;    // + instrument index
}  // namespace rng_stream

}  // namespace mcdbn
