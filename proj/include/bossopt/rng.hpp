#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace bossopt {

// Splittable counter-style generator (splitmix64 core). Each consumer forks
// its own sub-stream from (seed, purpose label), so adding draws in one place
// never shifts the stream seen by another. Identical seed, identical stream.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  // Independent child stream identified by a label or an index.
  [[nodiscard]] SeededRng fork(std::string_view label) const;
  [[nodiscard]] SeededRng fork(std::uint64_t index) const;

  std::uint64_t seed() const { return key_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53-bit resolution.
  double uniform();
  // Uniform integer in [0, bound) without modulo bias.
  std::uint64_t uniform_below(std::uint64_t bound);
  // One standard normal draw (Box-Muller, two uniforms per pair).
  double normal();
  void fill_normal(std::span<double> out);
  // Fisher-Yates permutation of 0..n-1.
  std::vector<std::uint32_t> permutation(std::size_t n);

 private:
  std::uint64_t key_;
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace bossopt
