#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bossopt/boss.hpp"
#include "bossopt/tasks.hpp"
#include "bossopt/verify.hpp"

using namespace bossopt;

namespace {

OfflineDataset small_data(std::size_t n, std::size_t d, std::uint64_t seed) {
  SeededRng rng(seed);
  return random_dataset(n, d, rng);
}

}  // namespace

TEST_CASE("project_omega clamps, is identity inside, and is idempotent") {
  PerturbationParams w;
  w.mu = 0.005;
  w.sigma = 5e-3;
  const PerturbationParams p1 = project_omega(w);
  CHECK(p1.mu == 1e-3);
  CHECK(p1.sigma == 5e-3);
  const PerturbationParams p2 = project_omega(p1);
  CHECK(p2.mu == p1.mu);
  CHECK(p2.sigma == p1.sigma);
  w.mu = 0.0;
  CHECK(project_omega(w).mu == 0.0);
  w.sigma = 1e-7;
  CHECK(project_omega(w).sigma == 1e-5);
}

TEST_CASE("regularizer values per mode") {
  MlpSpec spec{{2, 1}, Activation::Tanh};
  SurrogateParams p{spec, Vec{3.0, 4.0, 0.0}};
  const OfflineDataset ds = small_data(6, 2, 1);
  BossConfig cfg;
  cfg.mode = RegMode::None;
  const PerturbationParams omega = cfg.initial_omega();
  CHECK(regularizer_value(p, omega, ds, cfg) == 0.0);
  cfg.mode = RegMode::L2;
  CHECK(regularizer_value(p, omega, ds, cfg) == doctest::Approx(25.0));
  cfg.mode = RegMode::L1;
  CHECK(regularizer_value(p, omega, ds, cfg) == doctest::Approx(7.0));
  cfg.mode = RegMode::Boss;
  PerturbationBatch all_zero;
  all_zero.m = 3;
  all_zero.dim = p.flat.size();
  all_zero.eps.assign(9, 0.0);
  all_zero.gamma.assign(9, 0.0);
  all_zero.kappa.assign(3, 0);
  all_zero.delta.assign(3, 0.0);
  all_zero.labeled = true;
  CHECK(regularizer_value(p, omega, ds, cfg, &all_zero) == 0.0);
}

TEST_CASE("boss config validation") {
  BossConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = BossConfig{};
  cfg.sigma_init = 0.5;  // above sigma_hi
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = BossConfig{};
  cfg.mu_lo = 1.0;
  cfg.mu_hi = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("with the regularizer off the trainer reproduces plain fitting bitwise") {
  const OfflineDataset ds = small_data(24, 3, 7);
  const MlpSpec spec{{3, 8, 1}, Activation::Tanh};

  SUBCASE("full batch") {
    BossConfig cfg;
    cfg.mode = RegMode::None;
    cfg.iters = 40;
    cfg.eta_phi = 0.05;
    cfg.seed = 11;
    const SurrogateParams phi0 = init_params(spec, SeededRng(11).fork("init"));
    const BossResult r = boss_train(ds, spec, cfg, phi0);
    const SurrogateParams plain = train_surrogate(ds, spec, 40, 0.05, 0, SeededRng(11), phi0);
    CHECK(r.params.flat == plain.flat);
  }

  SUBCASE("mini batch") {
    BossConfig cfg;
    cfg.mode = RegMode::None;
    cfg.fit_batch = 8;
    cfg.eta_phi = 0.05;
    cfg.seed = 13;
    cfg.iters = 10 * 3;  // 10 epochs of ceil(24/8) steps
    const SurrogateParams phi0 = init_params(spec, SeededRng(13).fork("init"));
    const BossResult r = boss_train(ds, spec, cfg, phi0);
    const SurrogateParams plain = train_surrogate(ds, spec, 10, 0.05, 8, SeededRng(13), phi0);
    CHECK(r.params.flat == plain.flat);
  }
}

TEST_CASE("boss run keeps omega inside its box and the bound above the estimate") {
  const OfflineDataset ds = small_data(20, 2, 9);
  const MlpSpec spec{{2, 6, 1}, Activation::Tanh};
  BossConfig cfg;
  cfg.mode = RegMode::Boss;
  cfg.iters = 15;
  cfg.m = 24;
  cfg.eta_phi = 0.01;
  cfg.phi_epochs = 10;
  cfg.seed = 17;
  const SurrogateParams phi0 = init_params(spec, SeededRng(17).fork("init"));
  const BossResult r = boss_train(ds, spec, cfg, phi0);
  REQUIRE(r.trace.rows.size() == 15);
  for (const auto& row : r.trace.rows) {
    CHECK(row.mu >= cfg.mu_lo);
    CHECK(row.mu <= cfg.mu_hi);
    CHECK(row.sigma >= cfg.sigma_lo);
    CHECK(row.sigma <= cfg.sigma_hi);
    CHECK(row.s_mc <= row.s_plus);
    CHECK(row.s_plus <= 1.0 + 1e-12);
    CHECK(row.total_loss == doctest::Approx(row.fit_loss + cfg.lambda * row.s_plus));
  }
}

TEST_CASE("boss_train is deterministic") {
  const OfflineDataset ds = small_data(16, 2, 21);
  const MlpSpec spec{{2, 4, 1}, Activation::Tanh};
  BossConfig cfg;
  cfg.mode = RegMode::Boss;
  cfg.iters = 8;
  cfg.m = 16;
  cfg.phi_epochs = 10;
  cfg.seed = 23;
  const SurrogateParams phi0 = init_params(spec, SeededRng(23).fork("init"));
  const BossResult a = boss_train(ds, spec, cfg, phi0);
  const BossResult b = boss_train(ds, spec, cfg, phi0);
  CHECK(a.params.flat == b.params.flat);
  REQUIRE(a.trace.rows.size() == b.trace.rows.size());
  for (std::size_t i = 0; i < a.trace.rows.size(); ++i) {
    CHECK(a.trace.rows[i].sigma == b.trace.rows[i].sigma);
    CHECK(a.trace.rows[i].s_plus == b.trace.rows[i].s_plus);
    CHECK(a.trace.rows[i].fit_loss == b.trace.rows[i].fit_loss);
  }
}

TEST_CASE("single iteration matches an independently composed step") {
  const OfflineDataset ds = small_data(5, 2, 31);
  const MlpSpec spec{{2, 3, 1}, Activation::Tanh};
  BossConfig cfg;
  cfg.mode = RegMode::Boss;
  cfg.iters = 1;
  cfg.m = 4;
  cfg.phi_epochs = 6;
  cfg.eta_phi = 0.02;
  cfg.seed = 37;
  const SurrogateParams phi0 = init_params(spec, SeededRng(37).fork("init"));
  const BossResult got = boss_train(ds, spec, cfg, phi0);

  // Re-derive the whole iteration from the primitive operations.
  SeededRng root(cfg.seed);
  PerturbationParams omega = cfg.initial_omega();
  PerturbationBatch batch =
      sample_batch(omega, cfg.m, spec.param_count(), root.fork("perturb").fork(1));
  const ParamVector grad_h = mean_pred_grad(phi0, ds);
  label_batch(batch, grad_h, cfg.alpha, cfg.delta_mode, phi0, ds);
  const PhiFitResult fit = fit_phi_net(batch, cfg.phi_epochs, 0.5, root.fork("phi-fit").fork(1));
  const OmegaGrad og = omega_gradients(fit.net, batch);
  omega.mu += cfg.eta_omega * og.d_mu;
  omega.sigma += cfg.eta_omega * og.d_sigma;
  omega = project_omega(omega);
  rebuild_gamma(batch, omega);
  label_batch(batch, grad_h, cfg.alpha, cfg.delta_mode, phi0, ds);
  const double s_mc = mc_sensitivity(batch).value;
  const double s_plus =
      upper_bound_sensitivity(batch, grad_h, cfg.alpha, cfg.delta_mode, phi0, ds).value;
  const ParamVector reg_grad =
      grad_phi_upper_bound(phi0, batch, cfg.alpha, ds, cfg.phi_grad_mode);
  const LossGrad fit_grad = loss_and_grad(phi0, ds);
  Vec want = phi0.flat;
  for (std::size_t i = 0; i < want.size(); ++i)
    want[i] -= cfg.eta_phi * (fit_grad.grad[i] + cfg.lambda * reg_grad[i]);

  const BossTraceRow& row = got.trace.rows.at(0);
  CHECK(row.mu == omega.mu);
  CHECK(row.sigma == omega.sigma);
  CHECK(row.s_mc == s_mc);
  CHECK(row.s_plus == s_plus);
  CHECK(row.fit_loss == fit_grad.loss);
  CHECK(got.params.flat == want);
}

TEST_CASE("boss2 and norm modes run and stay sane") {
  const OfflineDataset ds = small_data(12, 2, 41);
  const MlpSpec spec{{2, 4, 1}, Activation::Tanh};
  const SurrogateParams phi0 = init_params(spec, SeededRng(41).fork("init"));
  for (RegMode mode : {RegMode::Boss2, RegMode::L1, RegMode::L2}) {
    BossConfig cfg;
    cfg.mode = mode;
    cfg.iters = 6;
    cfg.seed = 43;
    const BossResult r = boss_train(ds, spec, cfg, phi0);
    CHECK(r.trace.rows.size() == 6);
    for (const auto& row : r.trace.rows) {
      CHECK(row.sigma >= cfg.sigma_lo);
      CHECK(row.sigma <= cfg.sigma_hi);
      CHECK(std::isfinite(row.total_loss));
    }
  }
}

TEST_CASE("non-finite loss aborts with a contract error") {
  const OfflineDataset ds = small_data(8, 2, 47);
  const MlpSpec spec{{2, 8, 1}, Activation::Tanh};
  BossConfig cfg;
  cfg.mode = RegMode::None;
  cfg.iters = 400;
  cfg.eta_phi = 1e6;  // guaranteed blow-up
  cfg.seed = 47;
  const SurrogateParams phi0 = init_params(spec, SeededRng(47).fork("init"));
  CHECK_THROWS_AS(boss_train(ds, spec, cfg, phi0), ContractError);
}

TEST_CASE("gap vanishes at both threshold extremes") {
  const OfflineDataset ds = small_data(12, 2, 61);
  const MlpSpec spec{{2, 4, 1}, Activation::Tanh};
  const SurrogateParams phi0 = init_params(spec, SeededRng(61).fork("init"));
  BossConfig cfg;
  cfg.mode = RegMode::Boss;
  cfg.iters = 5;
  cfg.m = 16;
  cfg.phi_epochs = 5;
  cfg.seed = 67;
  cfg.sigma_lo = 1e-4;
  cfg.sigma_hi = 0.5;
  cfg.sigma_init = 0.2;

  cfg.alpha = 1e18;  // nothing ever crosses: both estimates zero
  const BossResult huge = boss_train(ds, spec, cfg, phi0);
  const GapSummary g_huge = lemma2_gap(huge.trace);
  CHECK(g_huge.max_gap == doctest::Approx(0.0).epsilon(1e-12));
  for (const auto& row : huge.trace.rows) CHECK(row.s_mc == 0.0);

  cfg.alpha = 1e-12;  // everything saturates: both estimates one
  const BossResult tiny = boss_train(ds, spec, cfg, phi0);
  const GapSummary g_tiny = lemma2_gap(tiny.trace);
  CHECK(g_tiny.max_gap == doctest::Approx(0.0).epsilon(1e-12));
  for (const auto& row : tiny.trace.rows) {
    CHECK(row.s_mc == 1.0);
    CHECK(row.s_plus == 1.0);
  }
}

TEST_CASE("lemma2 gap summary") {
  BossTrace trace;
  trace.rows = {{1, 0, 0, 0.0, 0.0, 0, 0}, {2, 0, 0, 0.2, 0.5, 0, 0},
                {3, 0, 0, 1.0, 1.0, 0, 0}};
  const GapSummary g = lemma2_gap(trace);
  CHECK(g.mean_gap == doctest::Approx(0.1));
  CHECK(g.max_gap == doctest::Approx(0.3));
  CHECK(lemma2_gap(BossTrace{}).mean_gap == 0.0);
}

TEST_CASE("trace csv has the documented columns") {
  BossTrace trace;
  trace.rows = {{1, 0.001, 0.002, 0.1, 0.2, 0.3, 0.4}};
  std::ostringstream os;
  trace.write_csv(os);
  CHECK(os.str().rfind("iter,mu,sigma,s_mc,s_plus,fit_loss,total_loss\n", 0) == 0);
  CHECK(os.str().find("\n1,0.001") != std::string::npos);
}

TEST_CASE("omega ascent raises the closed-form sensitivity in most runs") {
  const CheckResult r = checks::omega_ascent_sanity();
  CHECK(r.pass);
}
