#include "bossopt/tasks.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <numeric>

namespace bossopt {

namespace {

std::atomic<std::uint64_t> g_oracle_calls{0};

Box uniform_box(std::size_t d, double lo, double hi) {
  Box b;
  b.lo.assign(d, lo);
  b.hi.assign(d, hi);
  return b;
}

double neg_sphere(std::span<const double> x, double center) {
  double s = 0.0;
  for (double v : x) s += (v - center) * (v - center);
  return -s;
}

double neg_ackley(std::span<const double> x) {
  constexpr double a = 20.0, b = 0.2;
  const double c = 2.0 * std::numbers::pi;
  double sq = 0.0, cs = 0.0;
  for (double v : x) {
    sq += v * v;
    cs += std::cos(c * v);
  }
  const double inv_d = 1.0 / static_cast<double>(x.size());
  return a * std::exp(-b * std::sqrt(sq * inv_d)) + std::exp(cs * inv_d) - a - std::numbers::e;
}

double sine_quad(double x) {
  const double t = x - 0.25;
  return std::sin(2.0 * std::numbers::pi * x) - t * t;
}

}  // namespace

void TaskSpec::clip(std::span<double> x) const {
  for (std::size_t c = 0; c < d; ++c) x[c] = std::clamp(x[c], box.lo[c], box.hi[c]);
}

bool TaskSpec::inside(std::span<const double> x) const {
  for (std::size_t c = 0; c < d; ++c)
    if (x[c] < box.lo[c] || x[c] > box.hi[c]) return false;
  return true;
}

TaskSpec make_task(const std::string& id) {
  TaskSpec t;
  t.id = id;
  if (id == "neg-sphere-d8") {
    t.kind = TaskKind::NegSphere;
    t.d = 8;
    t.box = uniform_box(8, -1.0, 1.0);
    t.x_star.assign(8, 0.25);
    // farthest corner sits at -1 in every dimension: 8 * 1.25^2
    t.y_min = -8.0 * 1.25 * 1.25;
    t.y_max = 0.0;
  } else if (id == "neg-ackley-d2") {
    t.kind = TaskKind::NegAckley;
    t.d = 2;
    t.box = uniform_box(2, -2.5, 2.5);
    t.x_star.assign(2, 0.0);
    // Both exponential terms peak simultaneously at the half-integer corners,
    // so the box minimum is attained there in closed form.
    t.y_min = -(20.0 * (1.0 - std::exp(-0.5)) + std::numbers::e - std::exp(-1.0));
    t.y_max = 0.0;
  } else if (id == "hidden-linear-d8") {
    t.kind = TaskKind::HiddenLinear;
    t.d = 8;
    t.box = uniform_box(8, -1.0, 1.0);
    // fixed weights, seeded by the task name; magnitudes kept away from zero
    SeededRng rng(0x7A5C11ull);
    t.lin_w.resize(8);
    for (double& w : t.lin_w) {
      const double mag = 0.2 + 0.8 * rng.uniform();
      w = rng.uniform() < 0.5 ? -mag : mag;
    }
    t.x_star.resize(8);
    double total = 0.0;
    for (std::size_t c = 0; c < 8; ++c) {
      t.x_star[c] = t.lin_w[c] >= 0.0 ? 1.0 : -1.0;
      total += std::abs(t.lin_w[c]);
    }
    t.y_max = total;
    t.y_min = -total;
  } else if (id == "sine-quad-d1") {
    t.kind = TaskKind::SineQuad;
    t.d = 1;
    t.box = uniform_box(1, -1.0, 1.0);
    t.x_star.assign(1, 0.25);
    t.y_max = 1.0;  // sin peaks exactly where the quadratic term vanishes
    t.y_min = -(1.0 + 1.25 * 1.25);  // bound: sin >= -1, quadratic <= 1.25^2
  } else {
    throw ContractError("unknown task id: " + id);
  }
  return t;
}

std::vector<std::string> task_ids() {
  return {"neg-sphere-d8", "neg-ackley-d2", "hidden-linear-d8", "sine-quad-d1"};
}

double oracle_eval(const TaskSpec& task, std::span<const double> x) {
  BOSSOPT_REQUIRE(x.size() == task.d, "oracle_eval: dimension mismatch");
  BOSSOPT_REQUIRE(task.inside(x), "oracle_eval: input outside task box");
  g_oracle_calls.fetch_add(1, std::memory_order_relaxed);
  switch (task.kind) {
    case TaskKind::NegSphere:
      return neg_sphere(x, 0.25);
    case TaskKind::NegAckley:
      return neg_ackley(x);
    case TaskKind::HiddenLinear:
      return dot(task.lin_w, x);
    case TaskKind::SineQuad:
      return sine_quad(x[0]);
  }
  return 0.0;
}

std::uint64_t oracle_call_count() { return g_oracle_calls.load(std::memory_order_relaxed); }

void DatasetRecipe::validate() const {
  BOSSOPT_REQUIRE(n_raw >= 10, "DatasetRecipe: n_raw must be >= 10");
  BOSSOPT_REQUIRE(keep_fraction > 0.0 && keep_fraction <= 1.0,
                  "DatasetRecipe: keep_fraction must be in (0, 1]");
  BOSSOPT_REQUIRE(holdout_fraction >= 0.0, "DatasetRecipe: holdout_fraction must be >= 0");
  BOSSOPT_REQUIRE(keep_fraction + holdout_fraction <= 1.0 + 1e-12,
                  "DatasetRecipe: keep_fraction + holdout_fraction must be <= 1");
}

std::pair<OfflineDataset, OfflineDataset> make_offline_dataset(const TaskSpec& task,
                                                               const DatasetRecipe& recipe) {
  recipe.validate();
  SeededRng rng = SeededRng(recipe.seed).fork("dataset");
  const std::size_t n = recipe.n_raw;
  const std::size_t d = task.d;

  std::vector<double> xs(n * d);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = xs.data() + i * d;
    for (std::size_t c = 0; c < d; ++c)
      row[c] = task.box.lo[c] + rng.uniform() * (task.box.hi[c] - task.box.lo[c]);
    ys[i] = oracle_eval(task, {row, d});
  }

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return ys[a] < ys[b]; });

  const std::size_t n_train = static_cast<std::size_t>(std::llround(recipe.keep_fraction * n));
  const std::size_t n_hold = static_cast<std::size_t>(std::llround(recipe.holdout_fraction * n));
  BOSSOPT_REQUIRE(n_train >= 1, "make_offline_dataset: empty training slice");

  auto take = [&](std::size_t begin, std::size_t count) {
    OfflineDataset ds;
    ds.d = d;
    ds.y_min = task.y_min;
    ds.y_max = task.y_max;
    ds.x.resize(count * d);
    ds.y.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t src = order[begin + i];
      std::copy_n(xs.data() + static_cast<std::size_t>(src) * d, d, ds.x.data() + i * d);
      ds.y[i] = ys[src];
    }
    return ds;
  };

  OfflineDataset train = take(0, n_train);
  OfflineDataset holdout = take(n - n_hold, n_hold);
  train.validate();
  return {std::move(train), std::move(holdout)};
}

}  // namespace bossopt
