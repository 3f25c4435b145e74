#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bossopt/common.hpp"
#include "bossopt/rng.hpp"

namespace bossopt {

// Continuous design vector in task units.
using DesignPoint = std::vector<double>;

// Fixed (design, score) pairs plus the score range used for normalization.
// The range comes from the task's known analytic extremes over its domain
// box, not from the sample. Immutable after construction.
struct OfflineDataset {
  std::size_t d = 0;
  std::vector<double> x;  // n x d, row-major
  std::vector<double> y;  // n raw scores
  double y_min = 0.0;
  double y_max = 1.0;

  std::size_t n() const { return y.size(); }
  std::span<const double> point(std::size_t i) const { return {x.data() + i * d, d}; }

  void validate() const;
};

struct NormalizedScore {
  double value = 0.0;
  bool in_range = true;  // false when the raw score fell outside [y_min, y_max]
};

// |y - y_min| / |y_max - y_min|. Out-of-range inputs are returned unclipped
// and flagged; a degenerate range is a contract violation.
NormalizedScore normalize_score(double y, double y_min, double y_max);

// count i.i.d. standard normal draws from the given stream.
Vec gaussian_sample(SeededRng& rng, std::size_t count);

}  // namespace bossopt
