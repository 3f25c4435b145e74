#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bossopt/boss.hpp"
#include "bossopt/eval.hpp"
#include "bossopt/io.hpp"
#include "bossopt/search.hpp"
#include "bossopt/tasks.hpp"

namespace bossopt {

inline constexpr const char* kToolVersion = "0.1.0";

// Complete description of a run: task, dataset recipe, surrogate, training,
// search and the seed list. Round-trips losslessly through a flat string map,
// which is also what the manifest embeds.
struct RunConfig {
  std::string task = "neg-sphere-d8";
  std::string method = "ga";  // ga | ens-min | ens-mean
  int ensemble = 3;           // members for the ensemble methods
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8};
  DatasetRecipe recipe;
  std::vector<int> hidden = {64, 64};
  Activation activation = Activation::Tanh;
  BossConfig boss;
  SearchConfig search;

  MlpSpec mlp_spec(std::size_t d) const;
  FlatConfig to_map() const;
  static RunConfig from_map(const FlatConfig& map);
  void validate() const;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  PercentileReport report;
  double rmse = 0.0;
  BossTrace trace;
  CandidateSet candidates;
};

// Train (per the configured regularizer), search, evaluate for one seed on a
// shared dataset. Deterministic in (cfg, seed, data).
SeedOutcome run_seed(const TaskSpec& task, const OfflineDataset& train,
                     const OfflineDataset& holdout, const RunConfig& cfg, std::uint64_t seed);

struct SeedFailure {
  std::uint64_t seed = 0;
  std::string error;
};

struct RunOutputs {
  std::vector<SeedOutcome> outcomes;
  std::vector<SeedFailure> failures;  // seeds that aborted; the rest proceed
  AggregateReport agg;
  std::uint64_t data_hash = 0;
};

RunOutputs run_all(const TaskSpec& task, const OfflineDataset& train,
                   const OfflineDataset& holdout, const RunConfig& cfg);

// Writes results.csv, aggregate.csv, per-seed trace and candidate CSVs and
// manifest.json into dir. Refuses to clobber an existing results.csv unless
// force is set.
void write_run_artifacts(const std::string& dir, const RunConfig& cfg,
                         const RunOutputs& outputs, bool force);

std::string results_csv(const RunConfig& cfg, const RunOutputs& outputs);
std::string aggregate_csv(const RunConfig& cfg, const RunOutputs& outputs);
std::string manifest_json(const RunConfig& cfg, const RunOutputs& outputs);
RunConfig config_from_manifest_json(const std::string& json_text);

// Convenience used by several commands: config-driven search box and step.
SearchConfig search_config_for(const TaskSpec& task, const RunConfig& cfg);

}  // namespace bossopt
