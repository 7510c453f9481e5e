#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace stmc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Mix an arbitrary number of 64-bit words into one seed.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words) {
  std::uint64_t s = 0x243f6a8885a308d3ULL;  // pi digits
  for (auto w : words) {
    s ^= w + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    splitmix64(s);
  }
  return splitmix64(s);
}

// Deterministic random stream. Chains, levels and the engine orchestrator
// each own one; results are therefore independent of worker count.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double normal() {  // Box-Muller, spare cached
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.28318530717958647692 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  // index in [0, n)
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream for chain `chain` at annealing level `level` of a run seeded with
// `seed`. Self-contained, so evolution order and thread count cannot change
// the sampled values.
inline RngStream chain_stream(std::uint64_t seed, std::uint64_t level, std::uint64_t chain) {
  return RngStream(mix_seed({seed, 0x11c8a1ULL, level, chain}));
}

inline RngStream orchestrator_stream(std::uint64_t seed) {
  return RngStream(mix_seed({seed, 0x0c04e57ULL}));
}

}  // namespace stmc
