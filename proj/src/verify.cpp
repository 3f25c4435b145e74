#include "bossopt/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bossopt {

double rel_error(std::span<const double> got, std::span<const double> want) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    diff += (got[i] - want[i]) * (got[i] - want[i]);
    ref += want[i] * want[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-10);
}

OfflineDataset random_dataset(std::size_t n, std::size_t d, SeededRng& rng, double y_lo,
                              double y_hi) {
  OfflineDataset ds;
  ds.d = d;
  ds.x.resize(n * d);
  ds.y.resize(n);
  for (double& v : ds.x) v = 2.0 * rng.uniform() - 1.0;
  for (double& v : ds.y) v = y_lo + rng.uniform() * (y_hi - y_lo);
  ds.y_min = y_lo - 1.0;
  ds.y_max = y_hi + 1.0;
  return ds;
}

Vec fd_loss_grad(const SurrogateParams& p, const OfflineDataset& data, double step) {
  Vec g(p.flat.size());
  SurrogateParams q = p;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double h = step * std::max(1.0, std::abs(p.flat[j]));
    q.flat[j] = p.flat[j] + h;
    const double lp = loss_and_grad(q, data).loss;
    q.flat[j] = p.flat[j] - h;
    const double lm = loss_and_grad(q, data).loss;
    q.flat[j] = p.flat[j];
    g[j] = (lp - lm) / (2.0 * h);
  }
  return g;
}

Vec fd_mean_pred_grad(const SurrogateParams& p, const OfflineDataset& data, double step) {
  Vec g(p.flat.size());
  SurrogateParams q = p;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double h = step * std::max(1.0, std::abs(p.flat[j]));
    q.flat[j] = p.flat[j] + h;
    const double lp = mean_prediction(q, data);
    q.flat[j] = p.flat[j] - h;
    const double lm = mean_prediction(q, data);
    q.flat[j] = p.flat[j];
    g[j] = (lp - lm) / (2.0 * h);
  }
  return g;
}

Vec fd_input_grad(const SurrogateParams& p, const Vec& x, double step) {
  Vec g(x.size());
  Vec q = x;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double h = step * std::max(1.0, std::abs(x[j]));
    q[j] = x[j] + h;
    const double fp = mlp_forward(p, q);
    q[j] = x[j] - h;
    const double fm = mlp_forward(p, q);
    q[j] = x[j];
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

namespace checks {

namespace {

MlpSpec probe_spec(std::size_t which) {
  switch (which % 3) {
    case 0: return {{3, 6, 1}, Activation::Tanh};
    case 1: return {{2, 4, 4, 1}, Activation::Tanh};
    default: return {{4, 1}, Activation::Tanh};  // plain affine map
  }
}

CheckResult grad_battery(const std::string& name, double tolerance,
                         const std::function<double(SeededRng&, std::size_t)>& one_probe) {
  CheckResult r{name, false, 0.0, tolerance, ""};
  SeededRng rng(20240517);
  for (std::size_t probe = 0; probe < 100; ++probe)
    r.measured = std::max(r.measured, one_probe(rng, probe));
  r.pass = r.measured <= tolerance;
  std::ostringstream os;
  os << "max relative error over 100 probes";
  r.detail = os.str();
  return r;
}

}  // namespace

CheckResult normalize_affine() {
  CheckResult r{"normalize-score-affine-invariance", false, 0.0, 1e-12, "200 random probes"};
  SeededRng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double y_min = -5.0 + 10.0 * rng.uniform();
    const double y_max = y_min + 0.1 + 10.0 * rng.uniform();
    const double y = y_min - 2.0 + (y_max - y_min + 4.0) * rng.uniform();
    const double a = 0.1 + 5.0 * rng.uniform();
    const double b = -3.0 + 6.0 * rng.uniform();
    const double base = normalize_score(y, y_min, y_max).value;
    const double affine = normalize_score(a * y + b, a * y_min + b, a * y_max + b).value;
    r.measured = std::max(r.measured, std::abs(base - affine));
  }
  r.pass = r.measured <= r.tolerance;
  return r;
}

CheckResult gaussian_moments() {
  CheckResult r{"gaussian-sample-moments", false, 0.0, 4e-3,
                "seed 7, 1e6 draws: |mean| <= 4e-3 and |std-1| <= 1e-2"};
  SeededRng rng(7);
  const Vec v = gaussian_sample(rng, 1000000);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(v.size()));
  r.measured = std::abs(mean);
  r.pass = std::abs(mean) <= 4e-3 && std::abs(sd - 1.0) <= 1e-2;
  r.detail += " (std=" + format_double(sd) + ")";
  return r;
}

CheckResult rng_determinism() {
  CheckResult r{"rng-determinism", false, 0.0, 0.0, "same seed twice, different seeds differ"};
  SeededRng a(7), b(7), c(8);
  bool same = true, differ = false;
  for (int i = 0; i < 100; ++i) {
    const double va = a.normal(), vb = b.normal(), vc = c.normal();
    same = same && (va == vb);
    differ = differ || (va != vc);
  }
  r.pass = same && differ;
  r.measured = r.pass ? 0.0 : 1.0;
  return r;
}

CheckResult loss_grad_fd() {
  return grad_battery("loss-grad-vs-fd", 1e-4, [](SeededRng& rng, std::size_t probe) {
    const MlpSpec spec = probe_spec(probe);
    SeededRng sub = rng.fork(probe);
    const SurrogateParams p = init_params(spec, sub.fork("w"));
    SeededRng drng = sub.fork("d");
    const OfflineDataset data = random_dataset(12, spec.input_dim(), drng);
    const LossGrad lg = loss_and_grad(p, data);
    return rel_error(lg.grad, fd_loss_grad(p, data, 1e-5));
  });
}

CheckResult mean_grad_fd() {
  return grad_battery("mean-pred-grad-vs-fd", 1e-4, [](SeededRng& rng, std::size_t probe) {
    const MlpSpec spec = probe_spec(probe);
    SeededRng sub = rng.fork(probe + 1000);
    const SurrogateParams p = init_params(spec, sub.fork("w"));
    SeededRng drng = sub.fork("d");
    const OfflineDataset data = random_dataset(10, spec.input_dim(), drng);
    return rel_error(mean_pred_grad(p, data), fd_mean_pred_grad(p, data, 1e-5));
  });
}

CheckResult input_grad_fd() {
  return grad_battery("input-grad-vs-fd", 1e-4, [](SeededRng& rng, std::size_t probe) {
    const MlpSpec spec = probe_spec(probe);
    SeededRng sub = rng.fork(probe + 2000);
    const SurrogateParams p = init_params(spec, sub.fork("w"));
    SeededRng xr = sub.fork("x");
    Vec x(spec.input_dim());
    for (double& v : x) v = 2.0 * xr.uniform() - 1.0;
    return rel_error(input_grad(p, x), fd_input_grad(p, x, 1e-5));
  });
}

CheckResult hvp_fd_vs_exact() {
  CheckResult r{"hvp-fd-vs-exact-small", false, 0.0, 1e-3, "10 random small-net probes"};
  SeededRng rng(31);
  for (int probe = 0; probe < 10; ++probe) {
    SeededRng sub = rng.fork(static_cast<std::uint64_t>(probe));
    const MlpSpec spec{{2, 4, 1}, Activation::Tanh};
    const SurrogateParams p = init_params(spec, sub.fork("w"));
    SeededRng drng = sub.fork("d");
    const OfflineDataset data = random_dataset(8, 2, drng);
    Vec v(spec.param_count());
    SeededRng vr = sub.fork("v");
    for (double& e : v) e = 2.0 * vr.uniform() - 1.0;
    const Vec fd = hvp_mean_pred(p, data, v, HvpMethod::FiniteDiff);
    const Vec exact = hvp_mean_pred(p, data, v, HvpMethod::ExactSmall);
    r.measured = std::max(r.measured, rel_error(fd, exact));
  }
  r.pass = r.measured <= r.tolerance;
  return r;
}

CheckResult omega_grad_fd(bool flip_sigma_sign) {
  CheckResult r{"omega-grad-vs-fd", false, 0.0, 1e-4,
                "frozen-eps finite differences through the reparameterization"};
  SeededRng rng(47);
  const std::size_t dim = 6;
  PerturbationParams omega;
  omega.mu = 0.02;
  omega.sigma = 0.05;
  omega.mu_lo = -1.0;
  omega.mu_hi = 1.0;
  omega.sigma_lo = 1e-6;
  omega.sigma_hi = 2.0;
  PerturbationBatch batch = sample_batch(omega, 200, dim, rng.fork("batch"));

  Vec grad_h(dim);
  SeededRng gr = rng.fork("grad");
  for (double& v : grad_h) v = 2.0 * gr.uniform() - 1.0;
  const MlpSpec dummy_spec{{static_cast<int>(dim), 1}, Activation::Tanh};
  const SurrogateParams dummy{dummy_spec, Vec(dummy_spec.param_count(), 0.0)};
  OfflineDataset dummy_data;  // taylor labels never touch it
  dummy_data.d = dim;
  label_batch(batch, grad_h, 0.05, DeltaMode::Taylor, dummy, dummy_data);
  const PhiFitResult fit = fit_phi_net(batch, 40, 1e-1, rng.fork("phi"));

  OmegaGrad analytic = omega_gradients(fit.net, batch);
  if (flip_sigma_sign) analytic.d_sigma = -analytic.d_sigma;

  const double h = 1e-5;
  auto mean_at = [&](double mu, double sigma) {
    PerturbationParams w = omega;
    w.mu = mu;
    w.sigma = sigma;
    PerturbationBatch copy = batch;
    rebuild_gamma(copy, w);
    return fit.net.mean_output(copy);
  };
  const double fd_mu = (mean_at(omega.mu + h, omega.sigma) - mean_at(omega.mu - h, omega.sigma)) /
                       (2.0 * h);
  const double fd_sigma =
      (mean_at(omega.mu, omega.sigma + h) - mean_at(omega.mu, omega.sigma - h)) / (2.0 * h);
  const double got[2] = {analytic.d_mu, analytic.d_sigma};
  const double want[2] = {fd_mu, fd_sigma};
  r.measured = rel_error(got, want);
  r.pass = r.measured <= r.tolerance;
  return r;
}

CheckResult cdf_omega_grad_fd() {
  CheckResult r{"cdf-omega-grad-vs-fd", false, 0.0, 1e-6, "50 random settings"};
  SeededRng rng(53);
  for (int probe = 0; probe < 50; ++probe) {
    SeededRng sub = rng.fork(static_cast<std::uint64_t>(probe));
    const std::size_t dim = 4 + static_cast<std::size_t>(sub.uniform_below(8));
    Vec grad_h(dim);
    for (double& v : grad_h) v = 2.0 * sub.uniform() - 1.0;
    PerturbationParams omega;
    omega.mu = 0.02 * (2.0 * sub.uniform() - 1.0);
    omega.sigma = 0.05 + 0.5 * sub.uniform();
    omega.mu_lo = -1.0;
    omega.mu_hi = 1.0;
    omega.sigma_lo = 1e-6;
    omega.sigma_hi = 2.0;
    const double sigma_z = omega.sigma * norm2(grad_h);
    const double alpha = sigma_z * (0.4 + 1.4 * sub.uniform());
    const OmegaGrad analytic = cdf_omega_gradients(grad_h, omega, alpha);

    auto value_at = [&](double mu, double sigma) {
      PerturbationParams w = omega;
      w.mu = mu;
      w.sigma = sigma;
      return cdf_sensitivity(grad_h, w, alpha).value;
    };
    const double h = 1e-6;
    const double fd_mu =
        (value_at(omega.mu + h, omega.sigma) - value_at(omega.mu - h, omega.sigma)) / (2.0 * h);
    const double fd_sigma =
        (value_at(omega.mu, omega.sigma + h) - value_at(omega.mu, omega.sigma - h)) / (2.0 * h);
    const double got[2] = {analytic.d_mu, analytic.d_sigma};
    const double want[2] = {fd_mu, fd_sigma};
    r.measured = std::max(r.measured, rel_error(got, want));
  }
  r.pass = r.measured <= r.tolerance;
  return r;
}

CheckResult cdf_phi_grad_fd() {
  CheckResult r{"cdf-phi-grad-vs-fd", false, 0.0, 1e-3, "chained HVP vs direct differences"};
  SeededRng rng(59);
  const MlpSpec spec{{2, 5, 1}, Activation::Tanh};
  const SurrogateParams p = init_params(spec, rng.fork("w"));
  SeededRng drng = rng.fork("d");
  const OfflineDataset data = random_dataset(10, 2, drng);
  PerturbationParams omega;
  omega.mu = 0.01;
  omega.sigma = 0.2;
  omega.mu_lo = -1.0;
  omega.mu_hi = 1.0;
  omega.sigma_lo = 1e-6;
  omega.sigma_hi = 2.0;
  const Vec grad_h = mean_pred_grad(p, data);
  const double alpha = 0.8 * omega.sigma * norm2(grad_h);
  const Vec analytic = grad_phi_cdf(p, grad_h, omega, alpha, data);

  Vec fd(p.flat.size());
  SurrogateParams q = p;
  for (std::size_t j = 0; j < fd.size(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(p.flat[j]));
    q.flat[j] = p.flat[j] + h;
    const double vp = cdf_sensitivity(mean_pred_grad(q, data), omega, alpha).value;
    q.flat[j] = p.flat[j] - h;
    const double vm = cdf_sensitivity(mean_pred_grad(q, data), omega, alpha).value;
    q.flat[j] = p.flat[j];
    fd[j] = (vp - vm) / (2.0 * h);
  }
  r.measured = rel_error(analytic, fd);
  r.pass = r.measured <= r.tolerance;
  return r;
}

CheckResult upper_bound_phi_grad_fd() {
  CheckResult r{"upper-bound-phi-grad-vs-fd", false, 0.0, 1e-3,
                "exact mode vs finite differences on a frozen batch"};
  SeededRng rng(61);
  const MlpSpec spec{{2, 4, 1}, Activation::Tanh};
  const SurrogateParams p = init_params(spec, rng.fork("w"));
  SeededRng drng = rng.fork("d");
  const OfflineDataset data = random_dataset(8, 2, drng);
  PerturbationParams omega;
  omega.mu = 0.01;
  omega.sigma = 0.3;
  omega.mu_lo = -1.0;
  omega.mu_hi = 1.0;
  omega.sigma_lo = 1e-6;
  omega.sigma_hi = 2.0;
  PerturbationBatch batch = sample_batch(omega, 24, p.flat.size(), rng.fork("batch"));

  // Put alpha in the widest gap of the shift magnitudes so no sample sits on
  // the min(1, .) kink and finite differences stay clean.
  Vec mags(batch.m);
  for (std::size_t i = 0; i < batch.m; ++i)
    mags[i] = delta_exact(p, batch.gamma_row(i), data);
  std::sort(mags.begin(), mags.end());
  double alpha = 0.5 * (mags[batch.m / 2] + mags[batch.m / 2 + 1]);
  double best_gap = 0.0;
  for (std::size_t i = batch.m / 4; i + 1 < batch.m; ++i) {
    const double gap = mags[i + 1] - mags[i];
    if (gap > best_gap) {
      best_gap = gap;
      alpha = 0.5 * (mags[i] + mags[i + 1]);
    }
  }

  const Vec analytic = grad_phi_upper_bound(p, batch, alpha, data, PhiGradMode::Exact);
  Vec fd(p.flat.size());
  SurrogateParams q = p;
  for (std::size_t j = 0; j < fd.size(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(p.flat[j]));
    q.flat[j] = p.flat[j] + h;
    const double vp =
        upper_bound_sensitivity(batch, {}, alpha, DeltaMode::Exact, q, data).value;
    q.flat[j] = p.flat[j] - h;
    const double vm =
        upper_bound_sensitivity(batch, {}, alpha, DeltaMode::Exact, q, data).value;
    q.flat[j] = p.flat[j];
    fd[j] = (vp - vm) / (2.0 * h);
  }
  r.measured = rel_error(analytic, fd);
  r.pass = r.measured <= r.tolerance;
  return r;
}

CheckResult lemma2_pointwise_dominance() {
  CheckResult r{"lemma2-pointwise-dominance", false, 0.0, 0.0,
                "1e4 random (A, alpha) pairs, zero tolerance"};
  SeededRng rng(67);
  std::size_t violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const double a = 3.0 * rng.uniform();
    const double alpha = 1e-3 + 2.0 * rng.uniform();
    const double indicator = a >= alpha ? 1.0 : 0.0;
    const double bound = std::min(1.0, (a / alpha) * (a / alpha));
    if (indicator > bound) ++violations;
  }
  r.measured = static_cast<double>(violations);
  r.pass = violations == 0;
  return r;
}

CheckResult mc_vs_cdf_equivalence(std::size_t settings, std::size_t m) {
  CheckResult r{"mc-vs-cdf-equivalence", false, 0.0, 1.0,
                "|mc - cdf| <= max(0.01, 3*stderr) on a linear surrogate"};
  const TaskSpec task = make_task("hidden-linear-d8");
  DatasetRecipe recipe;
  recipe.seed = 5;
  const auto [train, holdout] = make_offline_dataset(task, recipe);
  const MlpSpec spec{{8, 1}, Activation::Tanh};
  SeededRng rng(71);
  const SurrogateParams p = init_params(spec, rng.fork("w"));
  const Vec grad_h = mean_pred_grad(p, train);  // mean design plus a bias slot

  double worst = 0.0;
  for (std::size_t s = 0; s < settings; ++s) {
    SeededRng sub = rng.fork(s);
    PerturbationParams omega;
    omega.mu = 0.02 * (2.0 * sub.uniform() - 1.0);
    omega.sigma = 0.05 + 1.2 * sub.uniform();
    omega.mu_lo = -1.0;
    omega.mu_hi = 1.0;
    omega.sigma_lo = 1e-6;
    omega.sigma_hi = 4.0;
    const double sigma_z = omega.sigma * norm2(grad_h);
    const double alpha = sigma_z * (0.15 + 1.8 * sub.uniform());

    PerturbationBatch batch = sample_batch(omega, m, p.flat.size(), sub.fork("mc"));
    label_batch(batch, grad_h, alpha, DeltaMode::Taylor, p, train);
    const SensitivityEstimate mc = mc_sensitivity(batch);
    const SensitivityEstimate cdf = cdf_sensitivity(grad_h, omega, alpha);
    const double bound = std::max(0.01, 3.0 * mc.stderr_);
    worst = std::max(worst, std::abs(mc.value - cdf.value) / bound);
  }
  r.measured = worst;  // ratio of |difference| to its allowance
  r.pass = worst <= 1.0;
  return r;
}

CheckResult taylor_linear_identity() {
  CheckResult r{"taylor-exact-on-linear", false, 0.0, 1e-10,
                "first-order shift identity for an affine surrogate"};
  SeededRng rng(73);
  const MlpSpec spec{{5, 1}, Activation::Tanh};
  const SurrogateParams p = init_params(spec, rng.fork("w"));
  SeededRng drng = rng.fork("d");
  const OfflineDataset data = random_dataset(20, 5, drng);
  const Vec grad_h = mean_pred_grad(p, data);
  for (int i = 0; i < 50; ++i) {
    Vec gamma(p.flat.size());
    SeededRng gr = rng.fork(static_cast<std::uint64_t>(i));
    for (double& v : gamma) v = 0.2 * (2.0 * gr.uniform() - 1.0);
    const double exact = delta_exact(p, gamma, data);
    const double taylor = delta_taylor(grad_h, gamma);
    r.measured = std::max(r.measured, std::abs(exact - taylor));
  }
  r.pass = r.measured <= r.tolerance;
  return r;
}

CheckResult reparam_consistency() {
  CheckResult r{"reparameterization-consistency", false, 0.0, 4.0,
                "two-sample proportion z-test at m=1e5"};
  const std::size_t m = 100000;
  SeededRng rng(79);
  const MlpSpec spec{{4, 1}, Activation::Tanh};
  const SurrogateParams p = init_params(spec, rng.fork("w"));
  SeededRng drng = rng.fork("d");
  const OfflineDataset data = random_dataset(16, 4, drng);
  const Vec grad_h = mean_pred_grad(p, data);

  PerturbationParams w1;
  w1.mu = 0.01;
  w1.sigma = 0.3;
  w1.mu_lo = -1.0;
  w1.mu_hi = 1.0;
  w1.sigma_lo = 1e-6;
  w1.sigma_hi = 2.0;
  PerturbationParams w2 = w1;
  w2.mu = 0.15;

  const double alpha = 0.3 * norm2(grad_h);
  PerturbationBatch shifted = sample_batch(w1, m, p.flat.size(), rng.fork("a"));
  rebuild_gamma(shifted, w2);
  label_batch(shifted, grad_h, alpha, DeltaMode::Taylor, p, data);
  const double p1 = mc_sensitivity(shifted).value;

  PerturbationBatch fresh = sample_batch(w2, m, p.flat.size(), rng.fork("b"));
  label_batch(fresh, grad_h, alpha, DeltaMode::Taylor, p, data);
  const double p2 = mc_sensitivity(fresh).value;

  const double pooled = 0.5 * (p1 + p2);
  const double z = std::abs(p1 - p2) /
                   std::sqrt(std::max(1e-12, pooled * (1.0 - pooled) * 2.0 / m));
  r.measured = z;
  r.pass = z <= r.tolerance;
  return r;
}

CheckResult lemma1_neighborhood(std::size_t n_gammas, std::size_t grid_points) {
  CheckResult r{"lemma1-neighborhood", false, 0.0, 0.0, ""};
  const TaskSpec task = make_task("sine-quad-d1");
  DatasetRecipe recipe;
  recipe.n_raw = 400;
  recipe.keep_fraction = 0.6;
  recipe.holdout_fraction = 0.2;
  recipe.seed = 9;
  const auto [train, holdout] = make_offline_dataset(task, recipe);
  const MlpSpec spec{{1, 8, 1}, Activation::Tanh};
  const SurrogateParams phi =
      train_surrogate(train, spec, 300, 0.05, 0, SeededRng(17));

  std::vector<DesignPoint> grid(grid_points);
  for (std::size_t i = 0; i < grid_points; ++i)
    grid[i] = {-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(grid_points - 1)};

  const double alpha = 0.2;
  const double gamma_scale = 0.25;
  SeededRng rng(83);
  std::size_t accepted = 0, passes = 0;
  double lip_max = empirical_lipschitz(phi, task.box, 500, rng.fork("lip-base")).value;

  for (std::uint64_t attempt = 0; attempt < 40 * n_gammas && accepted < n_gammas; ++attempt) {
    Vec gamma(phi.flat.size());
    SeededRng gr = rng.fork(attempt);
    for (double& v : gamma) v = gamma_scale * gr.normal();
    SurrogateParams shifted = phi;
    for (std::size_t j = 0; j < gamma.size(); ++j) shifted.flat[j] += gamma[j];
    bool witness = false;
    for (std::size_t i = 0; i < train.n() && !witness; ++i)
      witness = std::abs(mlp_forward(shifted, train.point(i)) -
                         mlp_forward(phi, train.point(i))) >= alpha;
    if (!witness) continue;
    ++accepted;
    // The constant in the bound is the max over perturbed models, inflated x2.
    LipschitzEstimate lip;
    lip.value =
        2.0 * std::max(lip_max,
                       empirical_lipschitz(shifted, task.box, 500, rng.fork("lip") .fork(attempt))
                           .value);
    lip.probe_count = 1000;
    const Lemma1Report rep = lemma1_check(phi, gamma, train, alpha, lip, grid);
    if (rep.pass && !rep.vacuous) ++passes;
  }
  r.measured = static_cast<double>(passes);
  r.tolerance = static_cast<double>(n_gammas - (n_gammas >= 100 ? 1 : 0));
  r.pass = accepted == n_gammas && passes >= static_cast<std::size_t>(r.tolerance);
  r.detail = std::to_string(passes) + "/" + std::to_string(accepted) + " neighborhoods verified";
  return r;
}

CheckResult cdf_monotonicity() {
  CheckResult r{"cdf-monotonicity", false, 0.0, 0.0,
                "non-increasing in alpha; non-decreasing in sigma when alpha >= |mu_z|"};
  SeededRng rng(89);
  std::size_t violations = 0;
  for (int probe = 0; probe < 200; ++probe) {
    SeededRng sub = rng.fork(static_cast<std::uint64_t>(probe));
    Vec grad_h(5);
    for (double& v : grad_h) v = 2.0 * sub.uniform() - 1.0;
    PerturbationParams omega;
    omega.mu = 0.01 * (2.0 * sub.uniform() - 1.0);
    omega.sigma = 0.1 + sub.uniform();
    omega.mu_lo = -1.0;
    omega.mu_hi = 1.0;
    omega.sigma_lo = 1e-6;
    omega.sigma_hi = 4.0;
    double prev = 2.0;
    for (double alpha = 0.05; alpha < 1.5; alpha += 0.05) {
      const double v = cdf_sensitivity(grad_h, omega, alpha).value;
      if (v > prev + 1e-12) ++violations;
      prev = v;
    }
    double mu_z = 0.0;
    for (double g : grad_h) mu_z += g;
    mu_z *= omega.mu;
    const double alpha = std::abs(mu_z) + 0.2;
    prev = -1.0;
    for (double s = 0.05; s < 2.0; s += 0.05) {
      PerturbationParams w = omega;
      w.sigma = s;
      const double v = cdf_sensitivity(grad_h, w, alpha).value;
      if (v < prev - 1e-12) ++violations;
      prev = v;
    }
  }
  r.measured = static_cast<double>(violations);
  r.pass = violations == 0;
  return r;
}

CheckResult percentile_protocol() {
  CheckResult r{"percentile-protocol", false, 0.0, 0.0,
                "index formula and ordering on random reports"};
  bool ok = percentile_index(128, 0.50) == 63 && percentile_index(128, 0.75) == 95 &&
            percentile_index(4, 0.50) == 1 && percentile_index(4, 0.75) == 2;
  SeededRng rng(97);
  const TaskSpec task = make_task("neg-sphere-d8");
  for (int probe = 0; probe < 20 && ok; ++probe) {
    CandidateSet cands;
    cands.d = task.d;
    cands.k = 16;
    cands.xs.resize(cands.k * task.d);
    cands.scores.assign(cands.k, 0.0);
    cands.flagged.assign(cands.k, 0);
    for (double& v : cands.xs) v = 2.0 * rng.uniform() - 1.0;
    const PercentileReport rep = score_candidates(task, cands);
    ok = ok && rep.p50 <= rep.p75 && rep.p75 <= rep.p100;
  }
  r.pass = ok;
  r.measured = ok ? 0.0 : 1.0;
  return r;
}

// The ascent is stochastic (the classifier is refit from scratch every
// iteration), so per-step values can dip by the refit noise near the plateau.
// A run counts as ascending when no step drops the closed-form value by more
// than kDipAllowance and the path ends at least where it started.
CheckResult omega_ascent_sanity() {
  constexpr double kDipAllowance = 0.01;
  CheckResult r{"omega-ascent-sanity", false, 0.0, 9.0,
                "closed-form sensitivity ascends along the omega path"};
  const TaskSpec task = make_task("hidden-linear-d8");
  DatasetRecipe recipe;
  recipe.seed = 3;
  const auto [train, holdout] = make_offline_dataset(task, recipe);
  const MlpSpec spec{{8, 1}, Activation::Tanh};

  std::size_t good = 0;
  std::string log;
  const std::size_t runs = 10;
  for (std::size_t s = 0; s < runs; ++s) {
    const SurrogateParams phi = init_params(spec, SeededRng(300 + s).fork("init"));
    const Vec grad_h = mean_pred_grad(phi, train);
    BossConfig cfg;
    cfg.mode = RegMode::Boss;
    cfg.eta_phi = 0.0;  // freeze the surrogate, watch only the omega game
    cfg.eta_omega = 5e-2;
    cfg.iters = 12;
    cfg.m = 400;
    cfg.alpha = 0.12 * norm2(grad_h);
    cfg.sigma_lo = 1e-3;
    cfg.sigma_hi = 0.5;
    cfg.sigma_init = 0.05;
    cfg.seed = 1000 + s;
    const BossResult res = boss_train(train, spec, cfg, phi);
    bool ascending = true;
    double prev = -1.0, first = -1.0, last = 0.0;
    for (const auto& row : res.trace.rows) {
      PerturbationParams w = cfg.initial_omega();
      w.mu = row.mu;
      w.sigma = row.sigma;
      const double v = cdf_sensitivity(grad_h, w, cfg.alpha).value;
      if (first < 0.0) first = v;
      if (v < prev - kDipAllowance) ascending = false;
      prev = v;
      last = v;
    }
    if (ascending && last >= first)
      ++good;
    else
      log += " run" + std::to_string(s) + " failed";
  }
  r.measured = static_cast<double>(good);
  r.pass = good >= 9;  // failures are logged, not fatal, below this bar
  r.detail = std::to_string(good) + "/" + std::to_string(runs) + " ascending runs" + log;
  return r;
}

}  // namespace checks

std::vector<CheckResult> run_verification() {
  std::vector<CheckResult> out;
  out.push_back(checks::normalize_affine());
  out.push_back(checks::gaussian_moments());
  out.push_back(checks::rng_determinism());
  out.push_back(checks::loss_grad_fd());
  out.push_back(checks::mean_grad_fd());
  out.push_back(checks::input_grad_fd());
  out.push_back(checks::hvp_fd_vs_exact());
  out.push_back(checks::omega_grad_fd());
  out.push_back(checks::cdf_omega_grad_fd());
  out.push_back(checks::cdf_phi_grad_fd());
  out.push_back(checks::upper_bound_phi_grad_fd());
  out.push_back(checks::lemma2_pointwise_dominance());
  out.push_back(checks::mc_vs_cdf_equivalence(8, 100000));
  out.push_back(checks::taylor_linear_identity());
  out.push_back(checks::reparam_consistency());
  out.push_back(checks::lemma1_neighborhood(30, 2000));
  out.push_back(checks::cdf_monotonicity());
  out.push_back(checks::percentile_protocol());
  out.push_back(checks::omega_ascent_sanity());
  return out;
}

}  // namespace bossopt
