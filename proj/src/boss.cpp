#include "bossopt/boss.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace bossopt {

std::string to_string(RegMode m) {
  switch (m) {
    case RegMode::None: return "none";
    case RegMode::Boss: return "boss";
    case RegMode::Boss2: return "boss2";
    case RegMode::L1: return "l1";
    case RegMode::L2: return "l2";
  }
  return "none";
}

RegMode reg_mode_from_string(const std::string& s) {
  if (s == "none") return RegMode::None;
  if (s == "boss") return RegMode::Boss;
  if (s == "boss2") return RegMode::Boss2;
  if (s == "l1") return RegMode::L1;
  if (s == "l2") return RegMode::L2;
  throw ContractError("unknown regularizer mode: " + s);
}

std::string to_string(DeltaMode m) { return m == DeltaMode::Taylor ? "taylor" : "exact"; }

DeltaMode delta_mode_from_string(const std::string& s) {
  if (s == "taylor") return DeltaMode::Taylor;
  if (s == "exact") return DeltaMode::Exact;
  throw ContractError("unknown delta mode: " + s);
}

std::string to_string(PhiGradMode m) {
  return m == PhiGradMode::TaylorHvp ? "taylor-hvp" : "exact";
}

PhiGradMode phi_grad_mode_from_string(const std::string& s) {
  if (s == "taylor-hvp") return PhiGradMode::TaylorHvp;
  if (s == "exact") return PhiGradMode::Exact;
  throw ContractError("unknown phi grad mode: " + s);
}

PerturbationParams BossConfig::initial_omega() const {
  PerturbationParams w;
  w.mu = mu_init;
  w.sigma = sigma_init;
  w.mu_lo = mu_lo;
  w.mu_hi = mu_hi;
  w.sigma_lo = sigma_lo;
  w.sigma_hi = sigma_hi;
  return w;
}

void BossConfig::validate() const {
  BOSSOPT_REQUIRE(alpha > 0.0, "BossConfig: alpha must be positive");
  BOSSOPT_REQUIRE(lambda >= 0.0, "BossConfig: lambda must be >= 0");
  BOSSOPT_REQUIRE(m >= 1, "BossConfig: m must be >= 1");
  BOSSOPT_REQUIRE(iters >= 1, "BossConfig: iters must be >= 1");
  BOSSOPT_REQUIRE(eta_omega >= 0.0 && eta_phi >= 0.0, "BossConfig: learning rates must be >= 0");
  BOSSOPT_REQUIRE(phi_epochs >= 1, "BossConfig: phi_epochs must be >= 1");
  initial_omega().validate();  // bounds ordered, inits inside
}

PerturbationParams project_omega(const PerturbationParams& omega) {
  PerturbationParams out = omega;
  out.mu = std::clamp(out.mu, out.mu_lo, out.mu_hi);
  out.sigma = std::clamp(out.sigma, out.sigma_lo, out.sigma_hi);
  return out;
}

double regularizer_value(const SurrogateParams& phi, const PerturbationParams& omega,
                         const OfflineDataset& data, const BossConfig& cfg,
                         const PerturbationBatch* batch) {
  switch (cfg.mode) {
    case RegMode::None:
      return 0.0;
    case RegMode::L1: {
      double s = 0.0;
      for (double v : phi.flat) s += std::abs(v);
      return s;
    }
    case RegMode::L2:
      return dot(phi.flat, phi.flat);
    case RegMode::Boss2:
      return cdf_sensitivity(mean_pred_grad(phi, data), omega, cfg.alpha).value;
    case RegMode::Boss: {
      BOSSOPT_REQUIRE(batch != nullptr, "regularizer_value: boss mode needs a batch");
      const ParamVector grad_h = mean_pred_grad(phi, data);
      return upper_bound_sensitivity(*batch, grad_h, cfg.alpha, cfg.delta_mode, phi, data).value;
    }
  }
  return 0.0;
}

void BossTrace::write_csv(std::ostream& os) const {
  os << "iter,mu,sigma,s_mc,s_plus,fit_loss,total_loss\n";
  for (const auto& r : rows) {
    os << r.iter << ',' << format_double(r.mu) << ',' << format_double(r.sigma) << ','
       << format_double(r.s_mc) << ',' << format_double(r.s_plus) << ','
       << format_double(r.fit_loss) << ',' << format_double(r.total_loss) << '\n';
  }
}

namespace {

// Full-batch ascent rate for the membership classifier. With standardized
// inputs the fit reaches a stable boundary well inside the default 50 epochs.
constexpr double kPhiFitLr = 0.5;

ParamVector l1_subgradient(const Vec& flat) {
  ParamVector g(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i)
    g[i] = flat[i] > 0.0 ? 1.0 : (flat[i] < 0.0 ? -1.0 : 0.0);
  return g;
}

}  // namespace

BossResult boss_train(const OfflineDataset& data, const MlpSpec& spec, const BossConfig& cfg,
                      const SurrogateParams& phi_init) {
  cfg.validate();
  data.validate();
  BOSSOPT_REQUIRE(phi_init.spec == spec, "boss_train: phi_init incompatible with spec");
  BOSSOPT_REQUIRE(data.d == spec.input_dim(), "boss_train: dimension mismatch");

  SeededRng root(cfg.seed);
  SeededRng rng_perturb = root.fork("perturb");
  SeededRng rng_phi_fit = root.fork("phi-fit");
  MiniBatcher batcher(data.n(), cfg.fit_batch, root.fork("batches"));

  const std::size_t np = spec.param_count();
  BossResult out;
  out.params = phi_init;
  out.trace.rows.reserve(cfg.iters);

  PerturbationParams omega = cfg.initial_omega();
  const bool needs_batch = cfg.mode == RegMode::Boss;

  for (int t = 1; t <= cfg.iters; ++t) {
    SurrogateParams& phi = out.params;
    BossTraceRow row;
    row.iter = t;

    double reg_value = 0.0;
    ParamVector reg_grad;

    if (needs_batch) {
      PerturbationBatch batch =
          sample_batch(omega, static_cast<std::size_t>(cfg.m), np, rng_perturb.fork(t));
      const ParamVector grad_h = mean_pred_grad(phi, data);
      label_batch(batch, grad_h, cfg.alpha, cfg.delta_mode, phi, data);
      const PhiFitResult fit =
          fit_phi_net(batch, cfg.phi_epochs, kPhiFitLr, rng_phi_fit.fork(t));
      const OmegaGrad og = omega_gradients(fit.net, batch);
      PerturbationParams next = omega;
      next.mu += cfg.eta_omega * og.d_mu;
      next.sigma += cfg.eta_omega * og.d_sigma;
      omega = project_omega(next);

      // The phi step and both trace estimates use the updated omega: the same
      // eps re-expressed under the new (mu, sigma).
      rebuild_gamma(batch, omega);
      label_batch(batch, grad_h, cfg.alpha, cfg.delta_mode, phi, data);
      row.s_mc = mc_sensitivity(batch).value;
      const SensitivityEstimate plus =
          upper_bound_sensitivity(batch, grad_h, cfg.alpha, cfg.delta_mode, phi, data);
      row.s_plus = plus.value;
      reg_value = plus.value;
      reg_grad = cfg.lambda == 0.0
                     ? ParamVector(np, 0.0)
                     : grad_phi_upper_bound(phi, batch, cfg.alpha, data, cfg.phi_grad_mode);
    } else if (cfg.mode == RegMode::Boss2) {
      const ParamVector grad_h = mean_pred_grad(phi, data);
      const OmegaGrad og = cdf_omega_gradients(grad_h, omega, cfg.alpha);
      PerturbationParams next = omega;
      next.mu += cfg.eta_omega * og.d_mu;
      next.sigma += cfg.eta_omega * og.d_sigma;
      omega = project_omega(next);
      const SensitivityEstimate s = cdf_sensitivity(grad_h, omega, cfg.alpha);
      row.s_mc = row.s_plus = s.value;  // one closed-form estimate in this mode
      reg_value = s.value;
      reg_grad = cfg.lambda == 0.0 ? ParamVector(np, 0.0)
                                   : grad_phi_cdf(phi, grad_h, omega, cfg.alpha, data);
    } else if (cfg.mode == RegMode::L1) {
      reg_value = regularizer_value(phi, omega, data, cfg);
      reg_grad = l1_subgradient(phi.flat);
    } else if (cfg.mode == RegMode::L2) {
      reg_value = regularizer_value(phi, omega, data, cfg);
      reg_grad.assign(np, 0.0);
      for (std::size_t i = 0; i < np; ++i) reg_grad[i] = 2.0 * phi.flat[i];
    } else {
      reg_grad.assign(np, 0.0);
    }

    const LossGrad fit = loss_and_grad(phi, data, batcher.next());
    row.mu = omega.mu;
    row.sigma = omega.sigma;
    row.fit_loss = fit.loss;
    row.total_loss = fit.loss + cfg.lambda * reg_value;
    if (!std::isfinite(row.total_loss)) {
      out.trace.rows.push_back(row);
      throw ContractError("boss_train: non-finite loss at iteration " + std::to_string(t));
    }

    for (std::size_t i = 0; i < np; ++i)
      phi.flat[i] -= cfg.eta_phi * (fit.grad[i] + cfg.lambda * reg_grad[i]);
    out.trace.rows.push_back(row);
  }
  return out;
}

GapSummary lemma2_gap(const BossTrace& trace) {
  GapSummary g;
  if (trace.rows.empty()) return g;
  for (const auto& r : trace.rows) {
    const double gap = std::abs(r.s_mc - r.s_plus);
    g.mean_gap += gap;
    g.max_gap = std::max(g.max_gap, gap);
  }
  g.mean_gap /= static_cast<double>(trace.rows.size());
  return g;
}

}  // namespace bossopt
