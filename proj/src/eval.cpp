#include "bossopt/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "bossopt/parallel.hpp"

namespace bossopt {

std::size_t percentile_index(std::size_t k, double q) {
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(k)));
  return std::min(k - 1, idx == 0 ? 0 : idx - 1);
}

PercentileReport score_candidates(const TaskSpec& task, const CandidateSet& candidates) {
  BOSSOPT_REQUIRE(candidates.k >= 1, "score_candidates: empty candidate set");
  BOSSOPT_REQUIRE(candidates.d == task.d, "score_candidates: dimension mismatch");
  PercentileReport rep;
  rep.task = task.id;
  rep.method = candidates.method;

  std::vector<double> normd(candidates.k);
  for (std::size_t i = 0; i < candidates.k; ++i) {
    Vec x(candidates.design(i).begin(), candidates.design(i).end());
    if (!task.inside(x)) {
      task.clip(x);
      ++rep.clipped;
    }
    normd[i] = normalize_score(oracle_eval(task, x), task.y_min, task.y_max).value;
  }
  std::sort(normd.begin(), normd.end());
  rep.p50 = normd[percentile_index(candidates.k, 0.50)];
  rep.p75 = normd[percentile_index(candidates.k, 0.75)];
  rep.p100 = normd[candidates.k - 1];
  return rep;
}

double rmse_ood(const SurrogateParams& phi, const OfflineDataset& holdout) {
  BOSSOPT_REQUIRE(holdout.n() >= 1, "rmse_ood: empty holdout");
  const double mse = par::block_sum(holdout.n(),
                                    [&](std::size_t i) {
                                      const double r =
                                          mlp_forward(phi, holdout.point(i)) - holdout.y[i];
                                      return r * r;
                                    }) /
                     static_cast<double>(holdout.n());
  return std::sqrt(mse);
}

namespace {

void mean_std(std::span<const double> v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  sd = std::sqrt(var / static_cast<double>(v.size()));  // population std
}

}  // namespace

AggregateReport aggregate(std::span<const PercentileReport> reports,
                          std::span<const double> rmses) {
  BOSSOPT_REQUIRE(!reports.empty(), "aggregate: no reports");
  AggregateReport agg;
  agg.n_seeds = reports.size();
  std::vector<double> v(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) v[i] = reports[i].p50;
  mean_std(v, agg.mean_p50, agg.std_p50);
  for (std::size_t i = 0; i < reports.size(); ++i) v[i] = reports[i].p75;
  mean_std(v, agg.mean_p75, agg.std_p75);
  for (std::size_t i = 0; i < reports.size(); ++i) v[i] = reports[i].p100;
  mean_std(v, agg.mean_p100, agg.std_p100);
  if (!rmses.empty()) mean_std(rmses, agg.mean_rmse, agg.std_rmse);
  return agg;
}

TuneResult pseudo_oracle_tune(const SurrogateParams& base_surrogate,
                              const std::vector<BossConfig>& configs, const TaskSpec& task,
                              const OfflineDataset& train, const MlpSpec& spec,
                              const SearchConfig& search_cfg,
                              std::span<const std::uint64_t> seeds) {
  BOSSOPT_REQUIRE(!configs.empty(), "pseudo_oracle_tune: no configs");
  BOSSOPT_REQUIRE(!seeds.empty(), "pseudo_oracle_tune: no seeds");
  BOSSOPT_REQUIRE(train.d == task.d, "pseudo_oracle_tune: dataset does not match task");
  const std::uint64_t calls_before = oracle_call_count();

  TuneResult res;
  res.pseudo_scores.assign(configs.size(), 0.0);
  res.candidates.resize(configs.size());
  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    double total = 0.0;
    for (std::uint64_t seed : seeds) {
      BossConfig cfg = configs[ci];
      cfg.seed = seed;
      const SurrogateParams phi0 = init_params_centered(spec, SeededRng(seed).fork("init"), train);
      const BossResult r = boss_train(train, spec, cfg, phi0);
      CandidateSet cands = ga_search(r.params, search_cfg, train);
      double s = 0.0;
      for (std::size_t i = 0; i < cands.k; ++i)
        s += mlp_forward(base_surrogate, cands.design(i));
      total += s / static_cast<double>(cands.k);
      res.candidates[ci].push_back(std::move(cands));
    }
    res.pseudo_scores[ci] = total / static_cast<double>(seeds.size());
  }
  BOSSOPT_REQUIRE(oracle_call_count() == calls_before,
                  "pseudo_oracle_tune: oracle consulted during selection");

  res.best_index = 0;  // strict > keeps ties with the first-listed config
  for (std::size_t ci = 1; ci < configs.size(); ++ci)
    if (res.pseudo_scores[ci] > res.pseudo_scores[res.best_index]) res.best_index = ci;
  return res;
}

std::vector<TimingRow> runtime_scaling(const OfflineDataset& data, const MlpSpec& spec,
                                       const BossConfig& base, std::span<const int> m_values) {
  BOSSOPT_REQUIRE(!m_values.empty(), "runtime_scaling: empty m list");
  for (std::size_t i = 1; i < m_values.size(); ++i)
    BOSSOPT_REQUIRE(m_values[i] >= m_values[i - 1], "runtime_scaling: m values must ascend");

  const SurrogateParams phi0 = init_params(spec, SeededRng(base.seed).fork("init"));
  std::vector<TimingRow> rows;
  for (int m : m_values) {
    BossConfig cfg = base;
    cfg.m = m;
    const auto t0 = std::chrono::steady_clock::now();
    boss_train(data, spec, cfg, phi0);
    const auto t1 = std::chrono::steady_clock::now();
    rows.push_back({m, std::chrono::duration<double>(t1 - t0).count()});
  }
  return rows;
}

}  // namespace bossopt
