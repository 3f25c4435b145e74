#include <doctest.h>

#include <cmath>

#include "bossopt/search.hpp"
#include "bossopt/tasks.hpp"

using namespace bossopt;

namespace {

OfflineDataset scored_points(std::vector<Vec> xs, Vec ys) {
  OfflineDataset ds;
  ds.d = xs.front().size();
  for (const auto& x : xs) ds.x.insert(ds.x.end(), x.begin(), x.end());
  ds.y = std::move(ys);
  ds.y_min = -100;
  ds.y_max = 100;
  return ds;
}

SurrogateParams linear_net(const Vec& w, double b) {
  MlpSpec spec{{static_cast<int>(w.size()), 1}, Activation::Tanh};
  SurrogateParams p{spec, Vec(spec.param_count(), 0.0)};
  for (std::size_t i = 0; i < w.size(); ++i) p.flat[i] = w[i];
  p.flat[w.size()] = b;
  return p;
}

Box unit_box(std::size_t d) {
  Box b;
  b.lo.assign(d, -1.0);
  b.hi.assign(d, 1.0);
  return b;
}

}  // namespace

TEST_CASE("init_candidates orders by score with index tie-break") {
  const OfflineDataset ds =
      scored_points({{0.0}, {1.0}, {2.0}, {3.0}}, {5.0, 9.0, 9.0, 1.0});
  const auto top1 = init_candidates(ds, 1);
  CHECK(top1[0][0] == 1.0);  // first of the tied maxima
  const auto all = init_candidates(ds, 4);
  CHECK(all[0][0] == 1.0);
  CHECK(all[1][0] == 2.0);
  CHECK(all[2][0] == 0.0);
  CHECK(all[3][0] == 3.0);
  CHECK_THROWS_AS(init_candidates(ds, 5), ContractError);
}

TEST_CASE("zero steps returns the start points") {
  const OfflineDataset ds = scored_points({{0.2, 0.1}, {-0.3, 0.4}}, {1.0, 2.0});
  const SurrogateParams p = linear_net({1.0, 1.0}, 0.0);
  SearchConfig cfg;
  cfg.k = 2;
  cfg.steps = 0;
  cfg.clip_box = unit_box(2);
  const CandidateSet out = ga_search(p, cfg, ds);
  CHECK(out.design(0)[0] == -0.3);  // higher-scored point first
  CHECK(out.design(1)[0] == 0.2);
}

TEST_CASE("ascent on a concave quadratic converges to its peak") {
  const Vec c{0.3, -0.2, 0.5};
  SearchObjective obj{
      [&](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i < 3; ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
        return -s;
      },
      [&](std::span<const double> x) {
        Vec g(3);
        for (std::size_t i = 0; i < 3; ++i) g[i] = -2.0 * (x[i] - c[i]);
        return g;
      }};
  SearchConfig cfg;
  cfg.k = 4;
  cfg.steps = 300;
  cfg.step_size = 0.05;
  cfg.clip_box = unit_box(3);
  const std::vector<DesignPoint> inits{{-0.9, -0.9, -0.9}, {0.9, 0.9, 0.9},
                                       {0.0, 0.0, 0.0}, {-0.5, 0.7, 0.1}};
  const CandidateSet out = ascend(obj, cfg, inits);
  for (std::size_t i = 0; i < out.k; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(out.design(i)[j] - c[j]) <= 1e-3);
    CHECK(out.scores[i] >= obj.value(inits[i]));  // ascent never loses ground
  }
}

TEST_CASE("affine surrogate with a clip box lands on the maximizing face") {
  const Vec w{2.0, -1.0, 0.5};
  const SurrogateParams p = linear_net(w, 0.0);
  const OfflineDataset ds = scored_points({{0.0, 0.0, 0.0}}, {0.0});
  SearchConfig cfg;
  cfg.k = 1;
  cfg.steps = 200;
  cfg.step_size = 0.05;
  cfg.clip_box = unit_box(3);
  const CandidateSet out = ga_search(p, cfg, ds);
  CHECK(out.design(0)[0] == doctest::Approx(1.0));
  CHECK(out.design(0)[1] == doctest::Approx(-1.0));
  CHECK(out.design(0)[2] == doctest::Approx(1.0));
}

TEST_CASE("chains are independent of candidate ordering") {
  const SurrogateParams p = linear_net({1.0, 0.5}, 0.0);
  SearchConfig cfg;
  cfg.k = 2;
  cfg.steps = 7;
  cfg.step_size = 0.1;
  cfg.clip_box = unit_box(2);
  SearchObjective obj{[&](std::span<const double> x) { return mlp_forward(p, x); },
                      [&](std::span<const double> x) { return input_grad(p, x); }};
  const std::vector<DesignPoint> ab{{0.1, 0.2}, {-0.6, 0.3}};
  const std::vector<DesignPoint> ba{{-0.6, 0.3}, {0.1, 0.2}};
  const CandidateSet fwd = ascend(obj, cfg, ab);
  const CandidateSet rev = ascend(obj, cfg, ba);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(fwd.design(0)[j] == rev.design(1)[j]);
    CHECK(fwd.design(1)[j] == rev.design(0)[j]);
  }
}

TEST_CASE("every emitted design respects the clip box") {
  const SurrogateParams p = linear_net({5.0, 5.0}, 0.0);
  const OfflineDataset ds = scored_points({{0.9, 0.9}, {0.5, -0.5}}, {1.0, 0.5});
  SearchConfig cfg;
  cfg.k = 2;
  cfg.steps = 50;
  cfg.step_size = 0.3;
  cfg.clip_box = unit_box(2);
  const CandidateSet out = ga_search(p, cfg, ds);
  for (std::size_t i = 0; i < out.k; ++i)
    for (double v : out.design(i)) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
}

TEST_CASE("a chain that turns non-finite freezes and is flagged") {
  SearchObjective obj{
      [](std::span<const double> x) { return x[0]; },
      [](std::span<const double> x) {
        return Vec{x[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 1.0};
      }};
  SearchConfig cfg;
  cfg.k = 1;
  cfg.steps = 30;
  cfg.step_size = 0.2;  // no clip box; the iterate walks into the NaN region
  const CandidateSet out = ascend(obj, cfg, {{0.0}});
  CHECK(out.flagged[0] == 1);
  CHECK(std::isfinite(out.design(0)[0]));
}

TEST_CASE("ensemble needs at least two members") {
  const SurrogateParams p = linear_net({1.0}, 0.0);
  const OfflineDataset ds = scored_points({{0.0}}, {0.0});
  SearchConfig cfg;
  cfg.k = 1;
  cfg.clip_box = unit_box(1);
  CHECK_THROWS_AS(ensemble_search({p}, EnsembleMode::Min, cfg, ds), ContractError);
}

TEST_CASE("identical members reproduce the single-surrogate trajectory") {
  const MlpSpec spec{{2, 4, 1}, Activation::Tanh};
  const SurrogateParams p = init_params(spec, SeededRng(5));
  const OfflineDataset ds = scored_points({{0.1, -0.2}, {0.4, 0.3}}, {1.0, 2.0});
  SearchConfig cfg;
  cfg.k = 2;
  cfg.steps = 20;
  cfg.step_size = 0.05;
  cfg.clip_box = unit_box(2);
  const CandidateSet solo = ga_search(p, cfg, ds);
  for (EnsembleMode mode : {EnsembleMode::Min, EnsembleMode::Mean}) {
    const CandidateSet ens = ensemble_search({p, p, p}, mode, cfg, ds);
    CHECK(ens.xs == solo.xs);
  }
}

TEST_CASE("mean ensemble of affine members ascends along the averaged weights") {
  const SurrogateParams a = linear_net({1.0, 0.0}, 0.0);
  const SurrogateParams b = linear_net({0.0, 1.0}, 0.0);
  const OfflineDataset ds = scored_points({{0.0, 0.0}}, {0.0});
  SearchConfig cfg;
  cfg.k = 1;
  cfg.steps = 3;
  cfg.step_size = 0.1;
  const CandidateSet out = ensemble_search({a, b}, EnsembleMode::Mean, cfg, ds);
  // gradient is (0.5, 0.5) everywhere: three steps of 0.1
  CHECK(out.design(0)[0] == doctest::Approx(0.15));
  CHECK(out.design(0)[1] == doctest::Approx(0.15));
}

TEST_CASE("min ensemble score never exceeds any member") {
  const MlpSpec spec{{2, 4, 1}, Activation::Tanh};
  const SurrogateParams a = init_params(spec, SeededRng(6));
  const SurrogateParams b = init_params(spec, SeededRng(7));
  const OfflineDataset ds = scored_points({{0.2, 0.2}, {-0.4, 0.6}}, {1.0, 2.0});
  SearchConfig cfg;
  cfg.k = 2;
  cfg.steps = 10;
  cfg.step_size = 0.05;
  cfg.clip_box = unit_box(2);
  const CandidateSet out = ensemble_search({a, b}, EnsembleMode::Min, cfg, ds);
  for (std::size_t i = 0; i < out.k; ++i) {
    CHECK(out.scores[i] <= mlp_forward(a, out.design(i)) + 1e-12);
    CHECK(out.scores[i] <= mlp_forward(b, out.design(i)) + 1e-12);
  }
}
