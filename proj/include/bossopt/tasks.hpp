#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bossopt/common.hpp"
#include "bossopt/rng.hpp"
#include "bossopt/sensitivity.hpp"  // Box
#include "bossopt/types.hpp"

namespace bossopt {

enum class TaskKind { NegSphere, NegAckley, HiddenLinear, SineQuad };

// Analytic black-box stand-in with known extremes over its domain box.
// y_max is attained at x_star exactly; y_min is the analytic minimum (a
// certified lower bound for sine-quad, whose exact minimum is transcendental).
struct TaskSpec {
  std::string id;
  TaskKind kind;
  std::size_t d = 0;
  Box box;
  double y_min = 0.0;
  double y_max = 0.0;
  DesignPoint x_star;
  Vec lin_w;  // hidden-linear only

  void clip(std::span<double> x) const;
  bool inside(std::span<const double> x) const;
};

// Known ids: neg-sphere-d8, neg-ackley-d2, hidden-linear-d8, sine-quad-d1.
TaskSpec make_task(const std::string& id);
std::vector<std::string> task_ids();

double oracle_eval(const TaskSpec& task, std::span<const double> x);

// Process-wide count of oracle evaluations; lets callers assert that a code
// path never consulted the true oracle.
std::uint64_t oracle_call_count();

struct DatasetRecipe {
  std::size_t n_raw = 1000;
  double keep_fraction = 0.4;     // bottom slice by score -> training set
  double holdout_fraction = 0.2;  // top slice by score -> OOD holdout
  std::uint64_t seed = 0;
  void validate() const;
};

// Uniform draws over the box, scored, sorted ascending; the training set is
// the bottom keep_fraction and the holdout the top holdout_fraction, so every
// holdout score strictly exceeds every training score.
std::pair<OfflineDataset, OfflineDataset> make_offline_dataset(const TaskSpec& task,
                                                               const DatasetRecipe& recipe);

}  // namespace bossopt
