#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace vebm {

/// splitmix64 finalizer over (seed, tag, index); used to derive per-epoch and
/// per-iteration seeds that need no stored state.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag,
                                    std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1) + 0xBF58476D1CE4E5B9ull * index;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Seeded random stream with serializable state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Independent stream for chain/worker `index`: seed XOR index.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(seed ^ index);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

  std::string serialize() const;
  static Rng deserialize(std::string_view text);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.serialize() == b.serialize();
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_;
};

}  // namespace vebm
