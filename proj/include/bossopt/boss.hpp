#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bossopt/mlp.hpp"
#include "bossopt/sensitivity.hpp"
#include "bossopt/types.hpp"

namespace bossopt {

enum class RegMode { None, Boss, Boss2, L1, L2 };

std::string to_string(RegMode m);
RegMode reg_mode_from_string(const std::string& s);
std::string to_string(DeltaMode m);
DeltaMode delta_mode_from_string(const std::string& s);
std::string to_string(PhiGradMode m);
PhiGradMode phi_grad_mode_from_string(const std::string& s);

struct BossConfig {
  double alpha = 0.1;
  double lambda = 1e-3;
  int m = 100;           // perturbation samples per iteration
  int iters = 300;       // outer iterations
  double eta_omega = 1e-2;
  double eta_phi = 1e-3;
  double mu_init = 0.0;
  double sigma_init = 1e-3;
  double mu_lo = -1e-3, mu_hi = 1e-3;
  double sigma_lo = 1e-5, sigma_hi = 1e-2;
  RegMode mode = RegMode::Boss;
  DeltaMode delta_mode = DeltaMode::Taylor;
  PhiGradMode phi_grad_mode = PhiGradMode::TaylorHvp;
  int phi_epochs = 50;        // classifier fit epochs per iteration
  std::size_t fit_batch = 0;  // 0 = full-batch fit gradient
  std::uint64_t seed = 0;

  PerturbationParams initial_omega() const;
  void validate() const;
};

struct BossTraceRow {
  int iter = 0;
  double mu = 0.0;
  double sigma = 0.0;
  double s_mc = 0.0;
  double s_plus = 0.0;
  double fit_loss = 0.0;
  double total_loss = 0.0;
};

struct BossTrace {
  std::vector<BossTraceRow> rows;
  void write_csv(std::ostream& os) const;
};

// Clamp omega into its box. Idempotent; identity inside the box.
PerturbationParams project_omega(const PerturbationParams& omega);

// Value of the configured regularizer at (phi, omega). The sampled-bound mode
// needs a perturbation batch; pass the one the caller is working with.
double regularizer_value(const SurrogateParams& phi, const PerturbationParams& omega,
                         const OfflineDataset& data, const BossConfig& cfg,
                         const PerturbationBatch* batch = nullptr);

// Alternating ascent on omega / descent on phi of the regularized fit loss.
// Per iteration: sample perturbations at the current omega, label them against
// the mean-prediction shift, fit the membership classifier, step omega along
// its reparameterization gradients, project, then step phi against the fit
// gradient plus lambda times the bound's phi-gradient evaluated at the updated
// omega. The trace records omega and both sensitivity estimates on the shared
// post-update batch, so the bound dominates the indicator estimate row by row.
struct BossResult {
  SurrogateParams params;
  BossTrace trace;
};
BossResult boss_train(const OfflineDataset& data, const MlpSpec& spec, const BossConfig& cfg,
                      const SurrogateParams& phi_init);

struct GapSummary {
  double mean_gap = 0.0;
  double max_gap = 0.0;
};
GapSummary lemma2_gap(const BossTrace& trace);

}  // namespace bossopt
