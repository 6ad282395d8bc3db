#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace mt {

// SplitMix64 finalizer. Used both as the PRNG step and as a seed mixer so
// that every stream in the project is reproducible from one master seed,
// independent of platform and standard library version.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic PRNG with an explicit, documented algorithm. std::mt19937
// plus std::*_distribution is avoided on purpose: distribution output is
// implementation-defined, which would break bit-exact reruns.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1). 53 mantissa bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound). Rejection-free modulo is fine here:
  // bounds in this project are tiny relative to 2^64 so the bias is
  // far below anything observable, and determinism is what matters.
  uint64_t next_below(uint64_t bound) { return next_u64() % bound; }

  // Standard normal via Box-Muller. One value per call; the pair's second
  // half is deliberately discarded to keep the call sequence simple.
  double next_normal() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  uint64_t state_;
};

// FNV-1a over the tag, then mixed with the master seed and two integer
// parameters. Gives every (purpose, index) pair its own independent stream:
// derive_seed(seed, "dropout", update, layer), derive_seed(seed, "shuffle",
// epoch), and so on. Counter-based streams are what make checkpoint resume
// bit-exact: the stream depends only on the counters, not on how many random
// numbers some earlier phase consumed.
inline uint64_t derive_seed(uint64_t master, std::string_view tag,
                            uint64_t a = 0, uint64_t b = 0) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  h = mix64(h ^ master);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  return h;
}

}  // namespace mt
