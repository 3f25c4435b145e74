#include <doctest.h>

#include <cmath>

#include "bossopt/sensitivity.hpp"
#include "bossopt/tasks.hpp"
#include "bossopt/verify.hpp"

#include "oracles.hpp"

using namespace bossopt;

namespace {

PerturbationParams wide_omega(double mu, double sigma) {
  PerturbationParams w;
  w.mu = mu;
  w.sigma = sigma;
  w.mu_lo = -10.0;
  w.mu_hi = 10.0;
  w.sigma_lo = 1e-9;
  w.sigma_hi = 10.0;
  return w;
}

SurrogateParams linear_net(const Vec& w, double b) {
  MlpSpec spec{{static_cast<int>(w.size()), 1}, Activation::Tanh};
  SurrogateParams p{spec, Vec(spec.param_count(), 0.0)};
  for (std::size_t i = 0; i < w.size(); ++i) p.flat[i] = w[i];
  p.flat[w.size()] = b;
  return p;
}

// A batch with prescribed gamma rows (eps back-solved for mu=0, sigma=1).
PerturbationBatch manual_batch(const std::vector<Vec>& gammas) {
  PerturbationBatch b;
  b.m = gammas.size();
  b.dim = gammas.front().size();
  for (const auto& g : gammas) {
    b.eps.insert(b.eps.end(), g.begin(), g.end());
    b.gamma.insert(b.gamma.end(), g.begin(), g.end());
  }
  return b;
}

}  // namespace

TEST_CASE("perturbation params validate their box") {
  PerturbationParams w = wide_omega(0.0, 0.1);
  CHECK_NOTHROW(w.validate());
  w.sigma = 0.0;
  w.sigma_lo = 0.0;
  CHECK_THROWS_AS(w.validate(), ContractError);  // sigma_lo must stay positive
  w = wide_omega(20.0, 0.1);
  CHECK_THROWS_AS(w.validate(), ContractError);
}

TEST_CASE("sample_batch reparameterization is exact and seeded") {
  const PerturbationParams w = wide_omega(0.4, 0.2);
  const PerturbationBatch a = sample_batch(w, 64, 5, SeededRng(9));
  const PerturbationBatch b = sample_batch(w, 64, 5, SeededRng(9));
  CHECK(a.gamma == b.gamma);
  for (std::size_t i = 0; i < a.eps.size(); ++i)
    CHECK(a.gamma[i] == 0.4 + 0.2 * a.eps[i]);
}

TEST_CASE("tiny sigma keeps every perturbation entry within six sigma") {
  const PerturbationParams w = [] {
    PerturbationParams v;
    v.mu = 0.0;
    v.sigma = 1e-5;
    v.sigma_lo = 1e-5;
    return v;
  }();
  const PerturbationBatch b = sample_batch(w, 10000, 4, SeededRng(31));
  for (double g : b.gamma) CHECK(std::abs(g) <= 6e-5);
}

TEST_CASE("per-coordinate sample mean concentrates on mu") {
  const PerturbationParams w = [] {
    PerturbationParams v;
    v.mu = 0.001;
    v.sigma = 0.01;
    return v;
  }();
  const PerturbationBatch b = sample_batch(w, 100000, 4, SeededRng(8));
  for (std::size_t c = 0; c < 4; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < b.m; ++i) mean += b.gamma[i * 4 + c];
    mean /= static_cast<double>(b.m);
    CHECK(std::abs(mean - 0.001) <= 1e-4);
  }
}

TEST_CASE("delta_exact on zero shift and affine surrogates") {
  const SurrogateParams p = linear_net({1.0, -2.0}, 0.3);
  OfflineDataset ds;
  ds.d = 2;
  ds.x = {0.5, 0.5, -0.5, 1.0};
  ds.y = {0.0, 0.0};
  ds.y_min = -1;
  ds.y_max = 1;
  Vec zero(p.flat.size(), 0.0);
  CHECK(delta_exact(p, zero, ds) == 0.0);
  const Vec gamma{0.2, -0.1, 0.05};
  // affine case: |mean(x)^T gamma_w + gamma_b|
  const double want = std::abs(0.0 * 0.2 + 0.75 * (-0.1) + 0.05);
  CHECK(delta_exact(p, gamma, ds) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("delta_exact matches a brute-force pointwise average") {
  const MlpSpec spec{{2, 4, 1}, Activation::Tanh};
  const SurrogateParams p = init_params(spec, SeededRng(3));
  SeededRng drng(4);
  const OfflineDataset ds = random_dataset(9, 2, drng);
  Vec gamma(p.flat.size());
  SeededRng gr(5);
  for (double& v : gamma) v = 0.3 * (2.0 * gr.uniform() - 1.0);
  SurrogateParams shifted = p;
  for (std::size_t i = 0; i < gamma.size(); ++i) shifted.flat[i] += gamma[i];
  double diff = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i)
    diff += oracles::ref_forward(shifted, ds.point(i)) - oracles::ref_forward(p, ds.point(i));
  diff = std::abs(diff / static_cast<double>(ds.n()));
  CHECK(delta_exact(p, gamma, ds) == doctest::Approx(diff).epsilon(1e-9));
}

TEST_CASE("delta_taylor basics") {
  CHECK(delta_taylor(Vec{1.0, 2.0}, Vec{3.0, -1.0}) == doctest::Approx(1.0));
  CHECK(delta_taylor(Vec{1.0, 0.0}, Vec{0.0, 5.0}) == 0.0);
}

TEST_CASE("label_batch thresholds strictly") {
  PerturbationBatch b = manual_batch({{0.15, 0.0}, {0.05, 0.0}, {0.0, 0.0}, {0.1, 0.0}});
  const SurrogateParams dummy = linear_net({0.0}, 0.0);
  OfflineDataset empty_ds;
  empty_ds.d = 1;
  label_batch(b, Vec{1.0, 0.0}, 0.1, DeltaMode::Taylor, dummy, empty_ds);
  CHECK(b.kappa[0] == 1);  // 0.15 > 0.1
  CHECK(b.kappa[1] == 0);
  CHECK(b.kappa[2] == 0);  // zero shift never crosses a positive threshold
  CHECK(b.kappa[3] == 0);  // exactly at the threshold stays out (strict)
  label_batch(b, Vec{1.0, 0.0}, 1e18, DeltaMode::Taylor, dummy, empty_ds);
  for (auto k : b.kappa) CHECK(k == 0);
}

TEST_CASE("mc_sensitivity extremes and stderr bound") {
  PerturbationBatch b = manual_batch({{1.0}, {2.0}, {3.0}, {4.0}});
  b.kappa = {0, 0, 0, 0};
  b.delta = {0, 0, 0, 0};
  b.labeled = true;
  CHECK(mc_sensitivity(b).value == 0.0);
  b.kappa = {1, 1, 1, 1};
  CHECK(mc_sensitivity(b).value == 1.0);
  b.kappa = {1, 0, 1, 0};
  const SensitivityEstimate e = mc_sensitivity(b);
  CHECK(e.value == doctest::Approx(0.5));
  CHECK(e.stderr_ == doctest::Approx(std::sqrt(0.25 / 4.0)));
  CHECK(e.stderr_ <= 0.5 / std::sqrt(4.0) + 1e-15);
}

TEST_CASE("phi net fits constant and separable labels") {
  const PerturbationParams w = wide_omega(0.0, 1.0);
  PerturbationBatch b = sample_batch(w, 200, 1, SeededRng(17));
  b.kappa.assign(b.m, 1);
  b.delta.assign(b.m, 0.0);
  b.labeled = true;
  const PhiFitResult all_one = fit_phi_net(b, 200, 0.5, SeededRng(18));
  CHECK(all_one.degenerate_labels);
  CHECK(all_one.net.mean_output(b) >= 0.9);

  b.kappa.assign(b.m, 0);
  const PhiFitResult all_zero = fit_phi_net(b, 200, 0.5, SeededRng(19));
  CHECK(all_zero.net.mean_output(b) <= 0.1);

  for (std::size_t i = 0; i < b.m; ++i) b.kappa[i] = b.gamma[i] > 0.0 ? 1 : 0;
  const PhiFitResult sep = fit_phi_net(b, 400, 0.5, SeededRng(20));
  CHECK_FALSE(sep.degenerate_labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < b.m; ++i)
    correct += (sep.net.forward(b.gamma_row(i)) > 0.5) == (b.kappa[i] == 1);
  CHECK(static_cast<double>(correct) / static_cast<double>(b.m) >= 0.95);
}

TEST_CASE("phi net output stays strictly inside (0,1)") {
  PhiNet net;
  net.dim = 1;
  net.input_scale = 1.0;
  net.w1 = {1000.0, -1000.0};
  net.b1 = {0.0, 0.0};
  net.w2 = {1000.0, 1000.0};
  net.b2 = 500.0;
  const double hi = net.forward(Vec{1e6});
  CHECK(hi > 0.0);
  CHECK(hi < 1.0);
  net.b2 = -1e9;
  const double lo = net.forward(Vec{1e6});
  CHECK(lo > 0.0);
  CHECK(lo < 1.0);
}

TEST_CASE("omega gradients vanish for a constant classifier") {
  const PerturbationParams w = wide_omega(0.1, 0.5);
  PerturbationBatch b = sample_batch(w, 50, 3, SeededRng(23));
  PhiNet net;
  net.dim = 3;
  net.input_scale = 1.0;
  net.w1.assign(6, 0.7);
  net.b1 = {0.1, -0.2};
  net.w2 = {0.0, 0.0};  // output layer ignores the hidden units
  net.b2 = 0.3;
  const OmegaGrad g = omega_gradients(net, b);
  CHECK(g.d_mu == 0.0);
  CHECK(g.d_sigma == 0.0);
}

TEST_CASE("omega gradients match frozen-eps finite differences") {
  CHECK(checks::omega_grad_fd().pass);
}

TEST_CASE("a sign flip in the sigma gradient is caught by the fd check") {
  CHECK_FALSE(checks::omega_grad_fd(true).pass);
}

TEST_CASE("upper bound basics and dominance") {
  const SurrogateParams dummy = linear_net({0.0}, 0.0);
  OfflineDataset empty_ds;
  empty_ds.d = 1;
  PerturbationBatch b = manual_batch({{0.05}});
  label_batch(b, Vec{1.0}, 0.1, DeltaMode::Taylor, dummy, empty_ds);
  // single sample with shift alpha/2: min(1, (1/2)^2)
  CHECK(upper_bound_sensitivity(b, Vec{1.0}, 0.1, DeltaMode::Taylor, dummy, empty_ds).value ==
        doctest::Approx(0.25));

  PerturbationBatch zero = manual_batch({{0.0}, {0.0}});
  label_batch(zero, Vec{1.0}, 0.1, DeltaMode::Taylor, dummy, empty_ds);
  CHECK(upper_bound_sensitivity(zero, Vec{1.0}, 0.1, DeltaMode::Taylor, dummy, empty_ds).value ==
        0.0);

  // random batches: the bound dominates the indicator estimate exactly
  SeededRng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const PerturbationParams w = wide_omega(0.0, 0.5 + rng.uniform());
    PerturbationBatch batch = sample_batch(w, 64, 2, rng.fork(trial));
    const Vec grad_h{1.0, -0.5};
    const double alpha = 0.1 + rng.uniform();
    label_batch(batch, grad_h, alpha, DeltaMode::Taylor, dummy, empty_ds);
    const double mc = mc_sensitivity(batch).value;
    const double ub =
        upper_bound_sensitivity(batch, grad_h, alpha, DeltaMode::Taylor, dummy, empty_ds).value;
    CHECK(mc <= ub);
    CHECK(ub <= 1.0);
  }
}

TEST_CASE("labels nest as alpha grows") {
  const SurrogateParams dummy = linear_net({0.0}, 0.0);
  OfflineDataset empty_ds;
  empty_ds.d = 1;
  const PerturbationParams w = wide_omega(0.0, 1.0);
  PerturbationBatch b = sample_batch(w, 500, 2, SeededRng(33));
  const Vec grad_h{0.8, 0.6};
  double prev = 2.0;
  for (double alpha : {0.2, 0.5, 1.0, 2.0}) {
    label_batch(b, grad_h, alpha, DeltaMode::Taylor, dummy, empty_ds);
    const double v = mc_sensitivity(b).value;
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("upper bound phi gradient vanishes where it should") {
  // affine surrogate: zero Hessian makes the collapsed HVP zero
  const SurrogateParams p = linear_net({1.0, 2.0}, 0.0);
  OfflineDataset ds;
  ds.d = 2;
  ds.x = {0.3, 0.4};
  ds.y = {1.0};
  ds.y_min = -10;
  ds.y_max = 10;
  const PerturbationParams w = wide_omega(0.0, 0.1);
  PerturbationBatch b = sample_batch(w, 16, p.flat.size(), SeededRng(35));
  for (double g : grad_phi_upper_bound(p, b, 0.5, ds, PhiGradMode::TaylorHvp))
    CHECK(std::abs(g) <= 1e-9);

  // saturated samples contribute nothing in either mode
  const MlpSpec spec{{2, 3, 1}, Activation::Tanh};
  const SurrogateParams q = init_params(spec, SeededRng(36));
  SeededRng drng(37);
  const OfflineDataset data = random_dataset(6, 2, drng);
  PerturbationBatch big = sample_batch(wide_omega(0.0, 2.0), 8, q.flat.size(), SeededRng(38));
  const double tiny_alpha = 1e-9;
  for (double g : grad_phi_upper_bound(q, big, tiny_alpha, data, PhiGradMode::Exact))
    CHECK(g == 0.0);
}

TEST_CASE("upper bound phi gradient matches finite differences") {
  CHECK(checks::upper_bound_phi_grad_fd().pass);
}

TEST_CASE("closed-form sensitivity values") {
  PerturbationParams w = wide_omega(0.0, 1.0);
  CHECK(cdf_sensitivity(Vec{0.0, 0.0}, w, 0.1).value == 0.0);  // degenerate sigma_z
  // mu_z = 0, sigma_z = 1, alpha = 1: two standard normal tails
  CHECK(cdf_sensitivity(Vec{1.0, 0.0}, w, 1.0).value ==
        doctest::Approx(0.3173105078629141).epsilon(1e-10));
  w.mu = 0.7;
  const double plus = cdf_sensitivity(Vec{0.6, 0.8}, w, 0.9).value;
  w.mu = -0.7;
  const double minus = cdf_sensitivity(Vec{0.6, 0.8}, w, 0.9).value;
  CHECK(plus == doctest::Approx(minus).epsilon(1e-14));
}

TEST_CASE("closed-form sensitivity monotonicity") { CHECK(checks::cdf_monotonicity().pass); }

TEST_CASE("closed-form omega gradients") {
  const Vec grad_h{0.3, -0.4, 0.5};
  PerturbationParams w = wide_omega(0.0, 0.8);
  const OmegaGrad g = cdf_omega_gradients(grad_h, w, 0.5);
  CHECK(g.d_mu == doctest::Approx(0.0).epsilon(1e-14));  // even in mu at mu_z = 0
  CHECK(checks::cdf_omega_grad_fd().pass);
  // far tails: both partials vanish
  const OmegaGrad far = cdf_omega_gradients(grad_h, w, 1e6);
  CHECK(std::abs(far.d_mu) <= 1e-12);
  CHECK(std::abs(far.d_sigma) <= 1e-12);
  // degenerate sigma_z is a precondition violation
  CHECK_THROWS_AS(cdf_omega_gradients(Vec{0.0, 0.0, 0.0}, w, 0.5), ContractError);
}

TEST_CASE("closed-form phi gradient matches finite differences") {
  CHECK(checks::cdf_phi_grad_fd().pass);
}

TEST_CASE("mc and cdf estimators agree on an affine surrogate") {
  CHECK(checks::mc_vs_cdf_equivalence(5, 40000).pass);
}

TEST_CASE("relabeling a shifted batch matches fresh sampling in distribution") {
  CHECK(checks::reparam_consistency().pass);
}

TEST_CASE("empirical lipschitz of affine and constant surrogates") {
  const SurrogateParams p = linear_net({3.0, -4.0}, 1.0);
  Box box;
  box.lo = {-1.0, -1.0};
  box.hi = {1.0, 1.0};
  const LipschitzEstimate e = empirical_lipschitz(p, box, 500, SeededRng(61));
  CHECK(e.value == doctest::Approx(5.0).epsilon(0.01));  // the weight norm
  const SurrogateParams z = linear_net({0.0, 0.0}, 2.0);
  CHECK(empirical_lipschitz(z, box, 200, SeededRng(62)).value == 0.0);
  CHECK_THROWS_AS(empirical_lipschitz(p, box, 50, SeededRng(63)), ContractError);
}

TEST_CASE("lipschitz estimate never shrinks when probes double") {
  const MlpSpec spec{{2, 6, 1}, Activation::Tanh};
  const SurrogateParams p = init_params(spec, SeededRng(64));
  Box box;
  box.lo = {-1.0, -1.0};
  box.hi = {1.0, 1.0};
  const SeededRng rng(65);
  double prev = 0.0;
  for (std::size_t probes : {100, 200, 400, 800}) {
    const double v = empirical_lipschitz(p, box, probes, rng).value;
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("lemma1 vacuous pass on zero shift") {
  const MlpSpec spec{{1, 4, 1}, Activation::Tanh};
  const SurrogateParams p = init_params(spec, SeededRng(71));
  SeededRng drng(72);
  const OfflineDataset ds = random_dataset(10, 1, drng);
  LipschitzEstimate lip;
  lip.value = 1.0;
  lip.probe_count = 100;
  const Vec zero(p.flat.size(), 0.0);
  const Lemma1Report rep = lemma1_check(p, zero, ds, 0.5, lip, {{0.0}});
  CHECK(rep.vacuous);
  CHECK(rep.pass);
}

TEST_CASE("lemma1 passes for a constant bias shift on an affine surrogate") {
  const SurrogateParams p = linear_net({1.0}, 0.0);
  OfflineDataset ds;
  ds.d = 1;
  ds.x = {0.1, -0.4, 0.8};
  ds.y = {0, 0, 0};
  ds.y_min = -10;
  ds.y_max = 10;
  Vec gamma(p.flat.size(), 0.0);
  gamma.back() = 0.4;  // shift the bias by 2 * alpha
  LipschitzEstimate lip;
  lip.value = 2.0;
  lip.probe_count = 100;
  std::vector<DesignPoint> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back({-1.0 + 0.02 * i});
  const Lemma1Report rep = lemma1_check(p, gamma, ds, 0.2, lip, grid);
  CHECK_FALSE(rep.vacuous);
  CHECK(rep.pass);
  CHECK(rep.witnesses == 3);
  CHECK(rep.checked_points > 0);
}

TEST_CASE("lemma1 neighborhood property on a trained 1-d net") {
  const CheckResult r = checks::lemma1_neighborhood(20, 1200);
  CHECK(r.pass);
}
