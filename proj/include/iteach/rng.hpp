#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace iteach {

// xoshiro256** seeded through SplitMix64. The algorithm is fixed so a given
// seed produces the same raw draw sequence on every platform; normal draws
// use Box-Muller on top of the raw stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();

  // Child stream determined only by (seed(), label); the parent's draw
  // position does not matter.
  Rng fork(std::string_view label) const;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view data);

}  // namespace iteach
