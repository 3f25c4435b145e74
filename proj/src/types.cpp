#include "bossopt/types.hpp"

#include <cmath>
#include <cstdio>

namespace bossopt {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void OfflineDataset::validate() const {
  BOSSOPT_REQUIRE(n() >= 1, "dataset must contain at least one point");
  BOSSOPT_REQUIRE(d >= 1, "dataset dimension must be >= 1");
  BOSSOPT_REQUIRE(x.size() == n() * d, "dataset design buffer has wrong size");
  BOSSOPT_REQUIRE(y_min < y_max, "dataset score range is degenerate (y_max <= y_min)");
  BOSSOPT_REQUIRE(all_finite(x), "dataset contains non-finite design entry");
  BOSSOPT_REQUIRE(all_finite(y), "dataset contains non-finite score");
}

NormalizedScore normalize_score(double y, double y_min, double y_max) {
  BOSSOPT_REQUIRE(std::isfinite(y), "normalize_score: y must be finite");
  BOSSOPT_REQUIRE(y_max > y_min, "normalize_score: degenerate range (y_max <= y_min)");
  NormalizedScore out;
  out.value = std::abs(y - y_min) / std::abs(y_max - y_min);
  out.in_range = (y >= y_min && y <= y_max);
  return out;
}

Vec gaussian_sample(SeededRng& rng, std::size_t count) {
  BOSSOPT_REQUIRE(count >= 1, "gaussian_sample: count must be >= 1");
  Vec out(count);
  rng.fill_normal(out);
  return out;
}

}  // namespace bossopt
