#include "bossopt/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bossopt/parallel.hpp"

namespace bossopt {

void PerturbationParams::validate() const {
  BOSSOPT_REQUIRE(sigma_lo > 0.0, "PerturbationParams: sigma_lo must be positive");
  BOSSOPT_REQUIRE(mu_lo <= mu_hi && sigma_lo <= sigma_hi,
                  "PerturbationParams: bounds out of order");
  BOSSOPT_REQUIRE(mu >= mu_lo && mu <= mu_hi, "PerturbationParams: mu outside bounds");
  BOSSOPT_REQUIRE(sigma >= sigma_lo && sigma <= sigma_hi,
                  "PerturbationParams: sigma outside bounds");
}

void Box::validate() const {
  BOSSOPT_REQUIRE(!lo.empty() && lo.size() == hi.size(), "Box: bad bounds");
  for (std::size_t i = 0; i < lo.size(); ++i)
    BOSSOPT_REQUIRE(lo[i] < hi[i], "Box: lo must be < hi in every dimension");
}

PerturbationBatch sample_batch(const PerturbationParams& omega, std::size_t m,
                               std::size_t dim, const SeededRng& rng) {
  BOSSOPT_REQUIRE(m >= 1, "sample_batch: m must be >= 1");
  BOSSOPT_REQUIRE(dim >= 1, "sample_batch: dim must be >= 1");
  omega.validate();
  PerturbationBatch b;
  b.m = m;
  b.dim = dim;
  b.eps.resize(m * dim);
  b.gamma.resize(m * dim);
  par::for_each_index(m, [&](std::size_t i) {
    SeededRng row = rng.fork(i);
    row.fill_normal({b.eps.data() + i * dim, dim});
    const double* e = b.eps.data() + i * dim;
    double* g = b.gamma.data() + i * dim;
    for (std::size_t c = 0; c < dim; ++c) g[c] = omega.mu + omega.sigma * e[c];
  });
  return b;
}

void rebuild_gamma(PerturbationBatch& batch, const PerturbationParams& omega) {
  omega.validate();
  par::for_each_index(batch.m, [&](std::size_t i) {
    const double* e = batch.eps.data() + i * batch.dim;
    double* g = batch.gamma.data() + i * batch.dim;
    for (std::size_t c = 0; c < batch.dim; ++c) g[c] = omega.mu + omega.sigma * e[c];
  });
  batch.labeled = false;
  batch.kappa.clear();
  batch.delta.clear();
}

namespace {

// Signed mean-prediction shift h(phi + gamma) - h(phi).
double signed_delta_exact(const SurrogateParams& phi, std::span<const double> gamma,
                          const OfflineDataset& data) {
  SurrogateParams shifted = phi;
  for (std::size_t i = 0; i < gamma.size(); ++i) shifted.flat[i] += gamma[i];
  return mean_prediction(shifted, data) - mean_prediction(phi, data);
}

}  // namespace

double delta_exact(const SurrogateParams& phi, std::span<const double> gamma,
                   const OfflineDataset& data) {
  BOSSOPT_REQUIRE(gamma.size() == phi.flat.size(), "delta_exact: gamma length mismatch");
  return std::abs(signed_delta_exact(phi, gamma, data));
}

double delta_taylor(std::span<const double> grad_h, std::span<const double> gamma) {
  BOSSOPT_REQUIRE(grad_h.size() == gamma.size(), "delta_taylor: length mismatch");
  return std::abs(dot(grad_h, gamma));
}

void label_batch(PerturbationBatch& batch, std::span<const double> grad_h, double alpha,
                 DeltaMode mode, const SurrogateParams& phi, const OfflineDataset& data) {
  BOSSOPT_REQUIRE(alpha > 0.0, "label_batch: alpha must be positive");
  batch.kappa.assign(batch.m, 0);
  batch.delta.assign(batch.m, 0.0);
  par::for_each_index(batch.m, [&](std::size_t i) {
    const double a = mode == DeltaMode::Taylor
                         ? delta_taylor(grad_h, batch.gamma_row(i))
                         : delta_exact(phi, batch.gamma_row(i), data);
    batch.delta[i] = a;
    batch.kappa[i] = a > alpha ? 1 : 0;
  });
  batch.labeled = true;
}

SensitivityEstimate mc_sensitivity(const PerturbationBatch& batch) {
  BOSSOPT_REQUIRE(batch.labeled, "mc_sensitivity: batch has no labels");
  const double hits =
      par::block_sum(batch.m, [&](std::size_t i) { return double(batch.kappa[i]); });
  const double p = hits / static_cast<double>(batch.m);
  SensitivityEstimate e;
  e.value = p;
  e.stderr_ = std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(batch.m));
  e.m = batch.m;
  e.method = "mc";
  return e;
}

// ---------------------------------------------------------------------------
// Phi net

namespace {

constexpr double kLogitClamp = 30.0;  // keeps sigmoid strictly inside (0,1)

inline double sigmoid(double z) {
  z = std::clamp(z, -kLogitClamp, kLogitClamp);
  return 1.0 / (1.0 + std::exp(-z));
}

struct PhiForward {
  double a1[2];
  double prob;
};

inline PhiForward phi_forward(const PhiNet& net, std::span<const double> gamma) {
  PhiForward f;
  const double inv_s = 1.0 / net.input_scale;
  for (int k = 0; k < 2; ++k) {
    const double* row = net.w1.data() + static_cast<std::size_t>(k) * net.dim;
    double z = 0.0;
    for (std::size_t c = 0; c < net.dim; ++c) z += row[c] * gamma[c];
    f.a1[k] = std::tanh(z * inv_s + net.b1[k]);
  }
  f.prob = sigmoid(net.w2[0] * f.a1[0] + net.w2[1] * f.a1[1] + net.b2);
  return f;
}

}  // namespace

double PhiNet::forward(std::span<const double> gamma) const {
  BOSSOPT_REQUIRE(gamma.size() == dim, "PhiNet: input dimension mismatch");
  return phi_forward(*this, gamma).prob;
}

void PhiNet::input_grad(std::span<const double> gamma, std::span<double> out) const {
  const PhiForward f = phi_forward(*this, gamma);
  const double dlogit = f.prob * (1.0 - f.prob);
  const double inv_s = 1.0 / input_scale;
  const double c0 = dlogit * w2[0] * (1.0 - f.a1[0] * f.a1[0]) * inv_s;
  const double c1 = dlogit * w2[1] * (1.0 - f.a1[1] * f.a1[1]) * inv_s;
  const double* r0 = w1.data();
  const double* r1 = w1.data() + dim;
  for (std::size_t c = 0; c < dim; ++c) out[c] = c0 * r0[c] + c1 * r1[c];
}

double PhiNet::mean_output(const PerturbationBatch& batch) const {
  return par::block_sum(batch.m,
                        [&](std::size_t i) { return phi_forward(*this, batch.gamma_row(i)).prob; }) /
         static_cast<double>(batch.m);
}

PhiFitResult fit_phi_net(const PerturbationBatch& batch, int epochs, double lr,
                         SeededRng rng) {
  BOSSOPT_REQUIRE(batch.labeled, "fit_phi_net: batch has no labels");
  BOSSOPT_REQUIRE(epochs >= 1, "fit_phi_net: epochs must be >= 1");
  const std::size_t dim = batch.dim;

  PhiFitResult res;
  PhiNet& net = res.net;
  net.dim = dim;
  net.w1.resize(2 * dim);
  net.b1.assign(2, 0.0);
  net.w2.resize(2);
  const double bound1 = std::sqrt(6.0 / (static_cast<double>(dim) + 2.0));
  for (double& w : net.w1) w = (2.0 * rng.uniform() - 1.0) * bound1;
  const double bound2 = std::sqrt(6.0 / 3.0);
  for (double& w : net.w2) w = (2.0 * rng.uniform() - 1.0) * bound2;
  net.b2 = 0.0;
  double ms = 0.0;
  for (double g : batch.gamma) ms += g * g;
  net.input_scale = std::max(1e-300, std::sqrt(ms / static_cast<double>(batch.gamma.size())));

  std::size_t ones = 0;
  for (auto k : batch.kappa) ones += k;
  res.degenerate_labels = (ones == 0 || ones == batch.m);

  // grad layout: [w1 (2*dim), b1 (2), w2 (2), b2]
  const std::size_t gdim = 2 * dim + 5;
  Vec grad(gdim);
  const double inv_m = 1.0 / static_cast<double>(batch.m);
  const double inv_s = 1.0 / net.input_scale;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    par::block_vec_sum(
        batch.m, gdim,
        [&](std::size_t i, std::span<double> acc) {
          const auto gamma = batch.gamma_row(i);
          const PhiForward f = phi_forward(net, gamma);
          const double err = static_cast<double>(batch.kappa[i]) - f.prob;  // dLL/dlogit
          double* gw1 = acc.data();
          double* gb1 = acc.data() + 2 * dim;
          double* gw2 = acc.data() + 2 * dim + 2;
          double* gb2 = acc.data() + 2 * dim + 4;
          for (int k = 0; k < 2; ++k) {
            const double dz = err * net.w2[k] * (1.0 - f.a1[k] * f.a1[k]);
            const double dzs = dz * inv_s;
            double* row = gw1 + static_cast<std::size_t>(k) * dim;
            for (std::size_t c = 0; c < dim; ++c) row[c] += dzs * gamma[c];
            gb1[k] += dz;
            gw2[k] += err * f.a1[k];
          }
          *gb2 += err;
        },
        grad);
    const double step = lr * inv_m;
    for (std::size_t j = 0; j < 2 * dim; ++j) net.w1[j] += step * grad[j];
    net.b1[0] += step * grad[2 * dim];
    net.b1[1] += step * grad[2 * dim + 1];
    net.w2[0] += step * grad[2 * dim + 2];
    net.w2[1] += step * grad[2 * dim + 3];
    net.b2 += step * grad[2 * dim + 4];
  }

  res.final_log_likelihood =
      par::block_sum(batch.m,
                     [&](std::size_t i) {
                       const double p = phi_forward(net, batch.gamma_row(i)).prob;
                       return batch.kappa[i] ? std::log(p) : std::log(1.0 - p);
                     }) *
      inv_m;
  return res;
}

OmegaGrad omega_gradients(const PhiNet& net, const PerturbationBatch& batch) {
  BOSSOPT_REQUIRE(net.dim == batch.dim, "omega_gradients: dimension mismatch");
  // Row sums of w1 let the coordinate reduction collapse to two dots per row.
  double rowsum[2] = {0.0, 0.0};
  for (int k = 0; k < 2; ++k) {
    const double* row = net.w1.data() + static_cast<std::size_t>(k) * net.dim;
    for (std::size_t c = 0; c < net.dim; ++c) rowsum[k] += row[c];
  }
  const double inv_m = 1.0 / static_cast<double>(batch.m);
  const double inv_s = 1.0 / net.input_scale;
  double acc[2];
  par::block_vec_sum(
      batch.m, 2,
      [&](std::size_t i, std::span<double> a) {
        const auto gamma = batch.gamma_row(i);
        const auto eps = batch.eps_row(i);
        const PhiForward f = phi_forward(net, gamma);
        const double dlogit = f.prob * (1.0 - f.prob);
        for (int k = 0; k < 2; ++k) {
          const double ck = dlogit * net.w2[k] * (1.0 - f.a1[k] * f.a1[k]) * inv_s;
          const double* row = net.w1.data() + static_cast<std::size_t>(k) * net.dim;
          double de = 0.0;
          for (std::size_t c = 0; c < net.dim; ++c) de += row[c] * eps[c];
          a[0] += ck * rowsum[k];
          a[1] += ck * de;
        }
      },
      {acc, 2});
  return {acc[0] * inv_m, acc[1] * inv_m};
}

// ---------------------------------------------------------------------------
// Lemma-2 upper bound and its phi-gradient

SensitivityEstimate upper_bound_sensitivity(const PerturbationBatch& batch,
                                            std::span<const double> grad_h, double alpha,
                                            DeltaMode mode, const SurrogateParams& phi,
                                            const OfflineDataset& data) {
  BOSSOPT_REQUIRE(alpha > 0.0, "upper_bound_sensitivity: alpha must be positive");
  auto term = [&](std::size_t i) {
    const double a = batch.labeled ? batch.delta[i]
                     : mode == DeltaMode::Taylor
                         ? delta_taylor(grad_h, batch.gamma_row(i))
                         : delta_exact(phi, batch.gamma_row(i), data);
    const double q = a / alpha;
    return std::min(1.0, q * q);
  };
  const double inv_m = 1.0 / static_cast<double>(batch.m);
  const double mean = par::block_sum(batch.m, term) * inv_m;
  const double sq = par::block_sum(batch.m, [&](std::size_t i) {
                      const double t = term(i);
                      return t * t;
                    }) *
                    inv_m;
  SensitivityEstimate e;
  e.value = mean;
  e.stderr_ = std::sqrt(std::max(0.0, sq - mean * mean) / static_cast<double>(batch.m));
  e.m = batch.m;
  e.method = "upper-bound";
  return e;
}

ParamVector grad_phi_upper_bound(const SurrogateParams& phi, const PerturbationBatch& batch,
                                 double alpha, const OfflineDataset& data, PhiGradMode mode) {
  BOSSOPT_REQUIRE(alpha > 0.0, "grad_phi_upper_bound: alpha must be positive");
  BOSSOPT_REQUIRE(batch.dim == phi.flat.size(), "grad_phi_upper_bound: dimension mismatch");
  const std::size_t np = phi.flat.size();
  const double inv_m = 1.0 / static_cast<double>(batch.m);
  const double scale = 2.0 / (alpha * alpha);

  if (mode == PhiGradMode::TaylorHvp) {
    const ParamVector grad_h = mean_pred_grad(phi, data);
    // Saturated samples sit on the flat part of min(1, .) and drop out; the
    // rest collapse into one HVP because the Hessian acts linearly.
    Vec weighted(np, 0.0);
    par::block_vec_sum(
        batch.m, np,
        [&](std::size_t i, std::span<double> acc) {
          const auto gamma = batch.gamma_row(i);
          const double t = dot(grad_h, gamma);
          if (std::abs(t) >= alpha) return;
          axpy(scale * t * inv_m, gamma, acc);
        },
        weighted);
    if (norm_inf(weighted) == 0.0) return ParamVector(np, 0.0);
    return hvp_mean_pred(phi, data, weighted, HvpMethod::FiniteDiff);
  }

  const ParamVector grad_at_phi = mean_pred_grad(phi, data);
  const double h_at_phi = mean_prediction(phi, data);
  ParamVector g(np, 0.0);
  par::block_vec_sum(
      batch.m, np,
      [&](std::size_t i, std::span<double> acc) {
        const auto gamma = batch.gamma_row(i);
        SurrogateParams shifted = phi;
        for (std::size_t j = 0; j < np; ++j) shifted.flat[j] += gamma[j];
        const double ds = mean_prediction(shifted, data) - h_at_phi;
        if (std::abs(ds) >= alpha) return;
        const ParamVector grad_shifted = mean_pred_grad(shifted, data);
        const double w = scale * ds * inv_m;
        for (std::size_t j = 0; j < np; ++j) acc[j] += w * (grad_shifted[j] - grad_at_phi[j]);
      },
      g);
  return g;
}

// ---------------------------------------------------------------------------
// Closed form via the Gaussian CDF

double std_normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

namespace {

inline double std_normal_pdf(double t) {
  return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

struct ZParams {
  double mu_z;
  double sigma_z;
  double grad_sum;
  double grad_norm;
};

ZParams z_params(std::span<const double> grad_h, const PerturbationParams& omega) {
  double s = 0.0;
  for (double g : grad_h) s += g;
  const double n = norm2(grad_h);
  return {omega.mu * s, omega.sigma * n, s, n};
}

}  // namespace

SensitivityEstimate cdf_sensitivity(std::span<const double> grad_h,
                                    const PerturbationParams& omega, double alpha) {
  BOSSOPT_REQUIRE(alpha > 0.0, "cdf_sensitivity: alpha must be positive");
  const ZParams z = z_params(grad_h, omega);
  SensitivityEstimate e;
  e.method = "cdf";
  if (z.sigma_z == 0.0) {
    e.value = std::abs(z.mu_z) >= alpha ? 1.0 : 0.0;  // indicator limit
    return e;
  }
  const double fa = std_normal_cdf((-alpha - z.mu_z) / z.sigma_z);
  const double fb = std_normal_cdf((alpha - z.mu_z) / z.sigma_z);
  e.value = std::clamp(1.0 + fa - fb, 0.0, 1.0);
  return e;
}

OmegaGrad cdf_omega_gradients(std::span<const double> grad_h,
                              const PerturbationParams& omega, double alpha) {
  BOSSOPT_REQUIRE(alpha > 0.0, "cdf_omega_gradients: alpha must be positive");
  const ZParams z = z_params(grad_h, omega);
  BOSSOPT_REQUIRE(z.sigma_z > 0.0, "cdf_omega_gradients: sigma_z must be positive");
  const double a = (-alpha - z.mu_z) / z.sigma_z;
  const double b = (alpha - z.mu_z) / z.sigma_z;
  const double dS_dmu_z = (std_normal_pdf(b) - std_normal_pdf(a)) / z.sigma_z;
  const double dS_dsigma_z = (b * std_normal_pdf(b) - a * std_normal_pdf(a)) / z.sigma_z;
  return {dS_dmu_z * z.grad_sum, dS_dsigma_z * z.grad_norm};
}

ParamVector grad_phi_cdf(const SurrogateParams& phi, std::span<const double> grad_h,
                         const PerturbationParams& omega, double alpha,
                         const OfflineDataset& data) {
  BOSSOPT_REQUIRE(alpha > 0.0, "grad_phi_cdf: alpha must be positive");
  const std::size_t np = phi.flat.size();
  const ZParams z = z_params(grad_h, omega);
  if (z.sigma_z == 0.0 || z.grad_norm == 0.0) return ParamVector(np, 0.0);
  const double a = (-alpha - z.mu_z) / z.sigma_z;
  const double b = (alpha - z.mu_z) / z.sigma_z;
  const double dS_dmu_z = (std_normal_pdf(b) - std_normal_pdf(a)) / z.sigma_z;
  const double dS_dsigma_z = (b * std_normal_pdf(b) - a * std_normal_pdf(a)) / z.sigma_z;
  // mu_z and sigma_z depend on phi only through grad_h, so the chain rule is
  // a single HVP with the combined direction.
  Vec dir(np);
  const double c_mu = dS_dmu_z * omega.mu;
  const double c_sigma = dS_dsigma_z * omega.sigma / z.grad_norm;
  for (std::size_t j = 0; j < np; ++j) dir[j] = c_mu + c_sigma * grad_h[j];
  if (norm_inf(dir) == 0.0) return ParamVector(np, 0.0);
  return hvp_mean_pred(phi, data, dir, HvpMethod::FiniteDiff);
}

// ---------------------------------------------------------------------------
// Lipschitz probing and the neighborhood check

LipschitzEstimate empirical_lipschitz(const SurrogateParams& phi, const Box& box,
                                      std::size_t probes, const SeededRng& rng) {
  BOSSOPT_REQUIRE(probes >= 100, "empirical_lipschitz: need at least 100 probes");
  box.validate();
  BOSSOPT_REQUIRE(box.dim() == phi.spec.input_dim(), "empirical_lipschitz: dimension mismatch");
  const std::size_t d = box.dim();
  std::vector<double> best(probes, 0.0);
  par::for_each_index(probes, [&](std::size_t i) {
    SeededRng sub = rng.fork(i);  // probe i is self-contained: larger budgets extend the set
    Vec x(d), x2(d);
    for (std::size_t c = 0; c < d; ++c) x[c] = box.lo[c] + sub.uniform() * (box.hi[c] - box.lo[c]);
    for (std::size_t c = 0; c < d; ++c) x2[c] = box.lo[c] + sub.uniform() * (box.hi[c] - box.lo[c]);
    double dist = 0.0;
    for (std::size_t c = 0; c < d; ++c) dist += (x[c] - x2[c]) * (x[c] - x2[c]);
    dist = std::sqrt(dist);
    double ratio = 0.0;
    if (dist > 1e-12)
      ratio = std::abs(mlp_forward(phi, x) - mlp_forward(phi, x2)) / dist;
    best[i] = std::max(ratio, norm2(input_grad(phi, x)));
  });
  LipschitzEstimate e;
  e.probe_count = probes;
  for (double v : best) e.value = std::max(e.value, v);
  return e;
}

Lemma1Report lemma1_check(const SurrogateParams& phi, std::span<const double> gamma,
                          const OfflineDataset& data, double alpha,
                          const LipschitzEstimate& lipschitz,
                          const std::vector<DesignPoint>& grid) {
  BOSSOPT_REQUIRE(alpha > 0.0, "lemma1_check: alpha must be positive");
  BOSSOPT_REQUIRE(lipschitz.value > 0.0, "lemma1_check: Lipschitz estimate must be positive");
  SurrogateParams shifted = phi;
  for (std::size_t j = 0; j < gamma.size(); ++j) shifted.flat[j] += gamma[j];

  Lemma1Report rep;
  rep.radius = alpha / (4.0 * lipschitz.value);

  std::vector<std::size_t> witnesses;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto x = data.point(i);
    if (std::abs(mlp_forward(shifted, x) - mlp_forward(phi, x)) >= alpha)
      witnesses.push_back(i);
  }
  rep.witnesses = witnesses.size();
  if (witnesses.empty()) {
    rep.vacuous = true;
    rep.pass = true;
    return rep;
  }

  // Shift profile over the grid, computed once.
  Vec grid_delta(grid.size());
  par::for_each_index(grid.size(), [&](std::size_t gi) {
    grid_delta[gi] = mlp_forward(shifted, grid[gi]) - mlp_forward(phi, grid[gi]);
  });

  for (std::size_t wi : witnesses) {
    const auto x = data.point(wi);
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      double dist = 0.0;
      for (std::size_t c = 0; c < data.d; ++c)
        dist += (grid[gi][c] - x[c]) * (grid[gi][c] - x[c]);
      if (std::sqrt(dist) > rep.radius) continue;
      ++rep.checked_points;
      if (std::abs(grid_delta[gi]) < alpha / 2.0) {
        ++rep.violations;
        if (rep.counterexamples.size() < 10) rep.counterexamples.push_back(grid[gi]);
      }
    }
  }
  rep.pass = rep.violations == 0;
  rep.inconclusive = !rep.pass;  // an under-estimated L cannot disprove the bound
  return rep;
}

}  // namespace bossopt
