#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bossopt/common.hpp"
#include "bossopt/mlp.hpp"
#include "bossopt/rng.hpp"
#include "bossopt/types.hpp"

namespace bossopt {

// Gaussian perturbation distribution N(mu*1, sigma^2*I) over parameter space.
// mu and sigma are scalars broadcast across all coordinates; both live in
// configured boxes and sigma is strictly positive.
struct PerturbationParams {
  double mu = 0.0;
  double sigma = 1e-3;
  double mu_lo = -1e-3, mu_hi = 1e-3;
  double sigma_lo = 1e-5, sigma_hi = 1e-2;
  void validate() const;
};

// m reparameterized draws: gamma_i = mu + sigma * eps_i, eps_i ~ N(0, I).
// kappa are the region-membership labels, delta the per-sample mean-shift
// magnitudes A_i used to set them (both filled by label_batch).
struct PerturbationBatch {
  std::size_t m = 0;
  std::size_t dim = 0;
  Vec eps;                     // m x dim
  Vec gamma;                   // m x dim
  std::vector<std::uint8_t> kappa;
  Vec delta;                   // |A_i| per sample
  bool labeled = false;

  std::span<const double> eps_row(std::size_t i) const { return {eps.data() + i * dim, dim}; }
  std::span<const double> gamma_row(std::size_t i) const { return {gamma.data() + i * dim, dim}; }
};

enum class DeltaMode { Taylor, Exact };

PerturbationBatch sample_batch(const PerturbationParams& omega, std::size_t m,
                               std::size_t dim, const SeededRng& rng);

// Rebuilds gamma from the stored eps under new (mu, sigma); labels reset.
void rebuild_gamma(PerturbationBatch& batch, const PerturbationParams& omega);

// Mean-prediction shift |h(phi + gamma) - h(phi)| via two full sweeps.
double delta_exact(const SurrogateParams& phi, std::span<const double> gamma,
                   const OfflineDataset& data);
// Linearized shift |grad_h . gamma|.
double delta_taylor(std::span<const double> grad_h, std::span<const double> gamma);

// kappa_i = 1 iff A_i > alpha (strict). Also records A_i per sample.
void label_batch(PerturbationBatch& batch, std::span<const double> grad_h, double alpha,
                 DeltaMode mode, const SurrogateParams& phi, const OfflineDataset& data);

struct SensitivityEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t m = 0;
  std::string method;  // mc | phi-net | upper-bound | cdf
};

SensitivityEstimate mc_sensitivity(const PerturbationBatch& batch);

// Tiny classifier gamma -> membership probability: one hidden layer of two
// tanh units, sigmoid output kept strictly inside (0, 1). Inputs are divided
// by input_scale (the RMS of the fitting batch), so the fit behaves the same
// whether perturbations live at 1e-3 or at unit scale.
struct PhiNet {
  std::size_t dim = 0;
  double input_scale = 1.0;
  Vec w1;  // 2 x dim
  Vec b1;  // 2
  Vec w2;  // 2
  double b2 = 0.0;

  double forward(std::span<const double> gamma) const;
  // d Phi / d gamma at gamma, written into out.
  void input_grad(std::span<const double> gamma, std::span<double> out) const;
  double mean_output(const PerturbationBatch& batch) const;
};

struct PhiFitResult {
  PhiNet net;
  double final_log_likelihood = 0.0;  // mean over the batch
  bool degenerate_labels = false;     // all-one or all-zero batch (fitted anyway)
};

// Full-batch gradient ascent on the mean Bernoulli log-likelihood.
PhiFitResult fit_phi_net(const PerturbationBatch& batch, int epochs, double lr,
                         SeededRng rng);

// Reparameterization gradients of the smoothed sensitivity (1/m) sum Phi(gamma_i):
// d/d mu sums input partials over coordinates, d/d sigma weights them by eps.
struct OmegaGrad {
  double d_mu = 0.0;
  double d_sigma = 0.0;
};
OmegaGrad omega_gradients(const PhiNet& net, const PerturbationBatch& batch);

// Differentiable upper bound: mean of min(1, (A_i/alpha)^2). Dominates the
// indicator estimate sample by sample.
SensitivityEstimate upper_bound_sensitivity(const PerturbationBatch& batch,
                                            std::span<const double> grad_h, double alpha,
                                            DeltaMode mode, const SurrogateParams& phi,
                                            const OfflineDataset& data);

enum class PhiGradMode { TaylorHvp, Exact };

// Gradient of the upper bound with respect to phi on a frozen batch.
// Exact: per-sample 2*Delta_i*(grad h(phi+gamma_i) - grad h(phi))/alpha^2 for
// unsaturated samples. TaylorHvp: collapses the same sum into a single
// Hessian-vector product with the t_i-weighted gamma average.
ParamVector grad_phi_upper_bound(const SurrogateParams& phi, const PerturbationBatch& batch,
                                 double alpha, const OfflineDataset& data, PhiGradMode mode);

// Closed form under the linearized shift: grad_h . gamma is univariate
// Gaussian with mu_z = mu * sum(grad_h), sigma_z = sigma * ||grad_h||, and
// the tail mass is 1 + F(-alpha) - F(alpha). sigma_z == 0 degenerates to the
// indicator of |mu_z| >= alpha.
SensitivityEstimate cdf_sensitivity(std::span<const double> grad_h,
                                    const PerturbationParams& omega, double alpha);
OmegaGrad cdf_omega_gradients(std::span<const double> grad_h,
                              const PerturbationParams& omega, double alpha);
// phi-gradient of the closed form, chained through grad_h (two HVPs).
ParamVector grad_phi_cdf(const SurrogateParams& phi, std::span<const double> grad_h,
                         const PerturbationParams& omega, double alpha,
                         const OfflineDataset& data);

// Standard normal CDF.
double std_normal_cdf(double t);

struct Box {
  std::vector<double> lo, hi;
  std::size_t dim() const { return lo.size(); }
  void validate() const;
};

struct LipschitzEstimate {
  double value = 0.0;       // max over probes; lower bound on the true constant
  std::size_t probe_count = 0;
};

// Max of |g(x)-g(x')|/||x-x'|| over seeded probe pairs plus gradient-norm
// probes. Probe i always uses sub-stream i, so growing the budget only
// extends the probe set.
LipschitzEstimate empirical_lipschitz(const SurrogateParams& phi, const Box& box,
                                      std::size_t probes, const SeededRng& rng);

struct Lemma1Report {
  bool vacuous = false;       // no data point with |Delta| >= alpha
  bool pass = false;
  std::size_t witnesses = 0;
  std::size_t checked_points = 0;
  std::size_t violations = 0;
  double radius = 0.0;
  bool inconclusive = false;  // failed, but L is only an empirical lower bound
  std::vector<DesignPoint> counterexamples;
};

// For each data point x with pointwise shift |Delta(x)| >= alpha, verifies
// every grid point within alpha/(4L) of x keeps |Delta| >= alpha/2.
Lemma1Report lemma1_check(const SurrogateParams& phi, std::span<const double> gamma,
                          const OfflineDataset& data, double alpha,
                          const LipschitzEstimate& lipschitz,
                          const std::vector<DesignPoint>& grid);

}  // namespace bossopt
