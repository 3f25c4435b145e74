#include "bossopt/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "bossopt/parallel.hpp"

namespace bossopt {

void SearchConfig::validate() const {
  BOSSOPT_REQUIRE(k >= 1, "SearchConfig: k must be >= 1");
  BOSSOPT_REQUIRE(steps >= 0, "SearchConfig: steps must be >= 0");
  if (clip_box) clip_box->validate();
}

void CandidateSet::write_csv(std::ostream& os) const {
  for (std::size_t c = 0; c < d; ++c) os << "x_" << c << ',';
  os << "surrogate_score\n";
  for (std::size_t i = 0; i < k; ++i) {
    const double* row = xs.data() + i * d;
    for (std::size_t c = 0; c < d; ++c) os << format_double(row[c]) << ',';
    os << format_double(scores[i]) << '\n';
  }
}

std::vector<DesignPoint> init_candidates(const OfflineDataset& data, std::size_t k) {
  BOSSOPT_REQUIRE(k >= 1 && k <= data.n(), "init_candidates: k must be in [1, n]");
  std::vector<std::uint32_t> order(data.n());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return data.y[a] > data.y[b];  // stable: equal scores keep dataset order
  });
  std::vector<DesignPoint> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto p = data.point(order[i]);
    out[i].assign(p.begin(), p.end());
  }
  return out;
}

namespace {

double default_step(const SearchConfig& cfg, std::size_t d) {
  if (cfg.step_size > 0.0) return cfg.step_size;
  BOSSOPT_REQUIRE(cfg.clip_box.has_value(),
                  "SearchConfig: default step size needs a clip box");
  (void)d;
  return 0.05 * (cfg.clip_box->hi[0] - cfg.clip_box->lo[0]);
}

}  // namespace

CandidateSet ascend(const SearchObjective& obj, const SearchConfig& cfg,
                    const std::vector<DesignPoint>& inits) {
  cfg.validate();
  BOSSOPT_REQUIRE(!inits.empty(), "ascend: no start points");
  const std::size_t d = inits.front().size();
  const double step = default_step(cfg, d);

  CandidateSet out;
  out.d = d;
  out.k = inits.size();
  out.xs.resize(out.k * d);
  out.scores.assign(out.k, 0.0);
  out.flagged.assign(out.k, 0);

  par::for_each_index(out.k, [&](std::size_t i) {
    Vec x(inits[i]);
    for (int t = 0; t < cfg.steps; ++t) {
      const Vec g = obj.grad(x);
      Vec next(d);
      for (std::size_t c = 0; c < d; ++c) next[c] = x[c] + step * g[c];
      if (cfg.clip_box)
        for (std::size_t c = 0; c < d; ++c)
          next[c] = std::clamp(next[c], cfg.clip_box->lo[c], cfg.clip_box->hi[c]);
      if (!all_finite(next)) {
        out.flagged[i] = 1;  // freeze at the last finite iterate
        break;
      }
      x = std::move(next);
    }
    std::copy(x.begin(), x.end(), out.xs.begin() + i * d);
    out.scores[i] = obj.value(x);
  });
  return out;
}

CandidateSet ga_search(const SurrogateParams& phi, const SearchConfig& cfg,
                       const OfflineDataset& data) {
  SearchObjective obj{
      [&phi](std::span<const double> x) { return mlp_forward(phi, x); },
      [&phi](std::span<const double> x) { return input_grad(phi, x); }};
  CandidateSet out = ascend(obj, cfg, init_candidates(data, cfg.k));
  out.method = "ga";
  return out;
}

CandidateSet ensemble_search(const std::vector<SurrogateParams>& members, EnsembleMode mode,
                             const SearchConfig& cfg, const OfflineDataset& data) {
  BOSSOPT_REQUIRE(members.size() >= 2, "ensemble_search: need at least 2 members");
  for (const auto& m : members)
    BOSSOPT_REQUIRE(m.spec == members.front().spec, "ensemble_search: member spec mismatch");

  SearchObjective obj;
  if (mode == EnsembleMode::Min) {
    obj.value = [&members](std::span<const double> x) {
      double best = mlp_forward(members[0], x);
      for (std::size_t j = 1; j < members.size(); ++j)
        best = std::min(best, mlp_forward(members[j], x));
      return best;
    };
    obj.grad = [&members](std::span<const double> x) {
      std::size_t active = 0;
      double best = mlp_forward(members[0], x);
      for (std::size_t j = 1; j < members.size(); ++j) {
        const double v = mlp_forward(members[j], x);
        if (v < best) {  // strict: ties stay with the lowest index
          best = v;
          active = j;
        }
      }
      return input_grad(members[active], x);
    };
  } else {
    const double inv = 1.0 / static_cast<double>(members.size());
    obj.value = [&members, inv](std::span<const double> x) {
      double s = 0.0;
      for (const auto& m : members) s += mlp_forward(m, x);
      return s * inv;
    };
    obj.grad = [&members, inv](std::span<const double> x) {
      Vec g(x.size(), 0.0);
      for (const auto& m : members) axpy(inv, input_grad(m, x), g);
      return g;
    };
  }
  CandidateSet out = ascend(obj, cfg, init_candidates(data, cfg.k));
  out.method = mode == EnsembleMode::Min ? "ens-min" : "ens-mean";
  return out;
}

}  // namespace bossopt
