#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "mcdbn/rng.hpp"

using namespace mcdbn;

namespace {

// Reference implementations written independently from the published
// algorithm descriptions, so the library cannot drift without this file
// noticing.
std::uint64_t ref_splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct RefXoshiro {
  std::array<std::uint64_t, 4> s;

  explicit RefXoshiro(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : s) word = ref_splitmix64(x);
  }

  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }
};

}  // namespace

TEST_CASE("splitmix64 matches the reference scramble") {
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0x123456789ABCDEFULL}) {
    std::uint64_t a = seed, b = seed;
    for (int i = 0; i < 16; ++i) {
      CHECK(Rng::splitmix64(a) == ref_splitmix64(b));
    }
    CHECK(a == b);
  }
}

TEST_CASE("u64 stream matches a reference xoshiro256** seeded by splitmix64") {
  for (std::uint64_t seed : {1ULL, 42ULL, 0xDEADBEEFULL}) {
    Rng rng(seed);
    RefXoshiro ref(seed);
    for (int i = 0; i < 256; ++i) CHECK(rng.next_u64() == ref.next());
  }
}

TEST_CASE("uniform is the top-53-bit mapping of one u64 draw") {
  Rng rng(7);
  Rng mirror(7);
  for (int i = 0; i < 1000; ++i) {
    const double expected =
        static_cast<double>(mirror.next_u64() >> 11) * 0x1.0p-53;
    const double got = rng.next_uniform();
    CHECK(got == expected);
    CHECK(got >= 0.0);
    CHECK(got < 1.0);
  }
}

TEST_CASE("gaussian consumes exactly two draws and is Box-Muller") {
  Rng rng(11);
  Rng mirror(11);
  for (int i = 0; i < 500; ++i) {
    const double u1 =
        (static_cast<double>(mirror.next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(mirror.next_u64() >> 11) * 0x1.0p-53;
    const double expected = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    CHECK(rng.next_gaussian() == expected);
  }
  // After interleaving, both streams are still in lockstep.
  CHECK(rng.next_u64() == mirror.next_u64());
}

TEST_CASE("derive_seed walks splitmix64 from the tweaked master") {
  const std::uint64_t master = 99;
  for (std::uint64_t stream : {0ULL, 1ULL, 5ULL, 64ULL, 4096ULL + 7ULL}) {
    std::uint64_t x = master ^ 0x5851F42D4C957F2DULL;
    std::uint64_t expected = 0;
    for (std::uint64_t i = 0; i <= stream; ++i) expected = ref_splitmix64(x);
    CHECK(derive_seed(master, stream) == expected);
  }
}

TEST_CASE("derived streams are distinct from each other and the master") {
  const std::uint64_t master = 1;
  const std::uint64_t streams[] = {
      rng_stream::kModelInit,  rng_stream::kPretrain,   rng_stream::kFineTune,
      rng_stream::kDownstream, rng_stream::kCompletion, rng_stream::kMissingness,
      rng_stream::kSynthBase,  rng_stream::kMissingnessBase};
  for (std::size_t i = 0; i < std::size(streams); ++i) {
    CHECK(derive_seed(master, streams[i]) != master);
    for (std::size_t j = i + 1; j < std::size(streams); ++j) {
      CHECK(derive_seed(master, streams[i]) != derive_seed(master, streams[j]));
    }
  }
}

TEST_CASE("same seed reproduces, different seeds diverge") {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t va = a.next_u64();
    all_equal = all_equal && va == b.next_u64();
    any_diff = any_diff || va != c.next_u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform draws have the right first two moments") {
  Rng rng(2024);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_uniform();
    sum += u;
    sum_sq += u * u;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.05));
}

TEST_CASE("gaussian draws have the right first two moments") {
  Rng rng(2025);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.next_gaussian();
    sum += g;
    sum_sq += g * g;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}
