#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bossopt/boss.hpp"
#include "bossopt/search.hpp"
#include "bossopt/tasks.hpp"
#include "bossopt/types.hpp"

namespace bossopt {

// Normalized oracle scores of the sorted candidate set at the half, three
// quarter and last index positions.
struct PercentileReport {
  double p50 = 0.0;
  double p75 = 0.0;
  double p100 = 0.0;
  std::size_t clipped = 0;  // candidates moved back into the box before scoring
  std::uint64_t seed = 0;
  std::string task;
  std::string method;
};

struct AggregateReport {
  double mean_p50 = 0.0, std_p50 = 0.0;
  double mean_p75 = 0.0, std_p75 = 0.0;
  double mean_p100 = 0.0, std_p100 = 0.0;
  double mean_rmse = 0.0, std_rmse = 0.0;
  std::size_t n_seeds = 0;
};

// Sorted-index positions ceil(q*k)-1 for q = 0.5, 0.75, 1.
std::size_t percentile_index(std::size_t k, double q);

PercentileReport score_candidates(const TaskSpec& task, const CandidateSet& candidates);

double rmse_ood(const SurrogateParams& phi, const OfflineDataset& holdout);

// mean +- population std over seeds.
AggregateReport aggregate(std::span<const PercentileReport> reports,
                          std::span<const double> rmses);

// Hyperparameter selection without the true oracle: every configuration runs
// the full train+search pipeline and its candidates are scored by the frozen
// base surrogate. Selection never touches the oracle (checked via the call
// counter); candidates are kept so callers can re-rank them however they like.
struct TuneResult {
  std::size_t best_index = 0;
  std::vector<double> pseudo_scores;               // mean per config
  std::vector<std::vector<CandidateSet>> candidates;  // [config][seed]
};

TuneResult pseudo_oracle_tune(const SurrogateParams& base_surrogate,
                              const std::vector<BossConfig>& configs, const TaskSpec& task,
                              const OfflineDataset& train, const MlpSpec& spec,
                              const SearchConfig& search_cfg,
                              std::span<const std::uint64_t> seeds);

struct TimingRow {
  int m = 0;
  double seconds = 0.0;
};

// Wall time of boss_train at each m, everything else fixed.
std::vector<TimingRow> runtime_scaling(const OfflineDataset& data, const MlpSpec& spec,
                                       const BossConfig& base, std::span<const int> m_values);

}  // namespace bossopt
