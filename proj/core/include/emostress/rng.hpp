#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace emostress {

// xoshiro256** seeded through splitmix64. The stream for a given seed is part
// of the on-disk reproducibility contract; bump kRngVersion if it changes.
inline constexpr std::uint32_t kRngVersion = 1;

std::uint64_t splitmix64(std::uint64_t& state);

// Sub-seed for a named stage: splitmix64 applied to root ^ fnv1a64(stage).
std::uint64_t derive_seed(std::uint64_t root, std::string_view stage);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal();

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace emostress
