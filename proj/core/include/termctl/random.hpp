#pragma once

#include <cstdint>
#include <random>

namespace termctl {

/// splitmix64 finalizer; used to turn structured seeds into engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Stream seed for trajectory / replicate `index` under `root`.
/// The rule is root XOR index; the engine then scrambles it with splitmix64.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return root ^ index;
}

/// Seeded uniform stream. mt19937_64 output is fixed by the standard, and
/// normals come from the inverse CDF, so draws are bit-identical across
/// platforms for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0,1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal();

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace termctl
