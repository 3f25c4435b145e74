#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bossopt/mlp.hpp"
#include "bossopt/sensitivity.hpp"  // Box
#include "bossopt/types.hpp"

namespace bossopt {

struct SearchConfig {
  std::size_t k = 128;     // candidates
  int steps = 50;          // ascent steps per candidate
  double step_size = 0.0;  // <= 0 means 0.05 * box width (uniform-width boxes)
  std::optional<Box> clip_box;
  std::uint64_t seed = 0;
  void validate() const;
};

struct CandidateSet {
  std::size_t d = 0;
  std::size_t k = 0;
  std::vector<double> xs;      // k x d
  std::vector<double> scores;  // aggregated surrogate score per candidate
  std::vector<std::uint8_t> flagged;  // chain hit a non-finite step and froze
  std::string method;
  std::string surrogate_id;

  std::span<const double> design(std::size_t i) const { return {xs.data() + i * d, d}; }
  void write_csv(std::ostream& os) const;
};

// The k highest-scoring dataset points, ties broken by dataset index.
std::vector<DesignPoint> init_candidates(const OfflineDataset& data, std::size_t k);

// Differentiable objective driving a chain of ascent steps.
struct SearchObjective {
  std::function<double(std::span<const double>)> value;
  std::function<Vec(std::span<const double>)> grad;
};

// Core ascent: each start point is updated steps times along the objective
// gradient and clipped to the box. Chains are independent; a chain whose
// iterate turns non-finite is frozen at its last finite value and flagged.
CandidateSet ascend(const SearchObjective& obj, const SearchConfig& cfg,
                    const std::vector<DesignPoint>& inits);

CandidateSet ga_search(const SurrogateParams& phi, const SearchConfig& cfg,
                       const OfflineDataset& data);

enum class EnsembleMode { Min, Mean };

// Ascent on the pointwise min or mean of member predictions. The min gradient
// follows the active member, ties resolved toward the lowest index.
CandidateSet ensemble_search(const std::vector<SurrogateParams>& members, EnsembleMode mode,
                             const SearchConfig& cfg, const OfflineDataset& data);

}  // namespace bossopt
