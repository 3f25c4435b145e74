#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bossopt/boss.hpp"
#include "bossopt/eval.hpp"
#include "bossopt/mlp.hpp"
#include "bossopt/sensitivity.hpp"
#include "bossopt/tasks.hpp"

namespace bossopt {

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;   // worst observed error / statistic
  double tolerance = 0.0;
  std::string detail;
};

// Finite-difference and closed-form cross checks for every analytic gradient,
// the bound dominance properties, and the estimator equivalences. Each check
// is independent and deterministic.
namespace checks {

CheckResult normalize_affine();
CheckResult gaussian_moments();
CheckResult rng_determinism();
CheckResult loss_grad_fd();
CheckResult mean_grad_fd();
CheckResult input_grad_fd();
CheckResult hvp_fd_vs_exact();
// flip_sigma_sign deliberately negates the analytic sigma gradient; the check
// must then fail (used to prove the harness can catch a wrong sign).
CheckResult omega_grad_fd(bool flip_sigma_sign = false);
CheckResult cdf_omega_grad_fd();
CheckResult cdf_phi_grad_fd();
CheckResult upper_bound_phi_grad_fd();
CheckResult lemma2_pointwise_dominance();
CheckResult mc_vs_cdf_equivalence(std::size_t settings, std::size_t m);
CheckResult taylor_linear_identity();
CheckResult reparam_consistency();
CheckResult lemma1_neighborhood(std::size_t n_gammas, std::size_t grid_points);
CheckResult cdf_monotonicity();
CheckResult percentile_protocol();
CheckResult omega_ascent_sanity();

}  // namespace checks

std::vector<CheckResult> run_verification();

// Helpers reused by tests.
double rel_error(std::span<const double> got, std::span<const double> want);
Vec fd_loss_grad(const SurrogateParams& p, const OfflineDataset& data, double step);
Vec fd_mean_pred_grad(const SurrogateParams& p, const OfflineDataset& data, double step);
Vec fd_input_grad(const SurrogateParams& p, const Vec& x, double step);
OfflineDataset random_dataset(std::size_t n, std::size_t d, SeededRng& rng,
                              double y_lo = -1.0, double y_hi = 1.0);

}  // namespace bossopt
