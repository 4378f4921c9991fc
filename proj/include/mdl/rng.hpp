#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mdl {

// splitmix64 finalizer; used to derive independent streams from (seed, id).
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream));
}

// Named sub-streams of an experiment seed. Anything that draws randomness
// gets its own stream so stages stay independent and reproducible.
namespace streams {
constexpr std::uint64_t points = 1;
constexpr std::uint64_t rotation = 2;
constexpr std::uint64_t translation = 3;
constexpr std::uint64_t centers = 4;
constexpr std::uint64_t augment = 5;
constexpr std::uint64_t shuffle = 6;
constexpr std::uint64_t init = 7;
constexpr std::uint64_t attack = 8;
constexpr std::uint64_t trainset = 9;
constexpr std::uint64_t testset = 10;
}  // namespace streams

// Deterministic RNG: mt19937_64 core (bit-identical across platforms) with
// explicit distribution transforms, since std:: distributions are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }
  Rng derive(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // index in [0, n)
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // standard normal via Box-Muller (pair cached)
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cache_ = r * std::sin(a);
    has_cache_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

}  // namespace mdl
