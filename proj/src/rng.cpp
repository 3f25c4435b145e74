#include "bossopt/rng.hpp"

#include <cmath>
#include <numbers>

namespace bossopt {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : key_(seed), state_(mix64(seed + kGolden)) {}

SeededRng SeededRng::fork(std::string_view label) const {
  return SeededRng(mix64(key_ ^ mix64(fnv1a(label) + kGolden)));
}

SeededRng SeededRng::fork(std::uint64_t index) const {
  return SeededRng(mix64(key_ ^ mix64(index * kGolden + 0x5851F42D4C957F2Dull)));
}

std::uint64_t SeededRng::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double SeededRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t SeededRng::uniform_below(std::uint64_t bound) {
  if (bound < 2) return 0;
  const std::uint64_t limit = ~0ull - (~0ull % bound);
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();  // rejection keeps the draw unbiased
  return v % bound;
}

double SeededRng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  // u1 in (0,1] so log stays finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

void SeededRng::fill_normal(std::span<double> out) {
  for (double& v : out) v = normal();
}

std::vector<std::uint32_t> SeededRng::permutation(std::size_t n) {
  std::vector<std::uint32_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_below(i));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

}  // namespace bossopt
