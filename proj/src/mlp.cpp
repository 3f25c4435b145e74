#include "bossopt/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "bossopt/parallel.hpp"

namespace bossopt {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw ContractError("unknown activation: " + s);
}

std::size_t MlpSpec::param_count() const {
  std::size_t c = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    c += static_cast<std::size_t>(layer_sizes[l + 1]) * layer_sizes[l] + layer_sizes[l + 1];
  return c;
}

std::size_t MlpSpec::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l)
    off += static_cast<std::size_t>(layer_sizes[l + 1]) * layer_sizes[l] + layer_sizes[l + 1];
  return off;
}

std::size_t MlpSpec::bias_offset(std::size_t layer) const {
  return weight_offset(layer) +
         static_cast<std::size_t>(layer_sizes[layer + 1]) * layer_sizes[layer];
}

void MlpSpec::validate() const {
  BOSSOPT_REQUIRE(layer_sizes.size() >= 2, "MlpSpec needs input and output sizes");
  BOSSOPT_REQUIRE(layer_sizes.back() == 1, "MlpSpec output size must be 1");
  for (int s : layer_sizes) BOSSOPT_REQUIRE(s >= 1, "MlpSpec layer sizes must be >= 1");
}

void SurrogateParams::validate() const {
  spec.validate();
  BOSSOPT_REQUIRE(flat.size() == spec.param_count(), "parameter vector length mismatch");
  BOSSOPT_REQUIRE(all_finite(flat), "parameter vector contains non-finite entry");
}

SurrogateParams init_params(const MlpSpec& spec, SeededRng rng) {
  spec.validate();
  SurrogateParams p{spec, Vec(spec.param_count(), 0.0)};
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const int fan_in = spec.layer_sizes[l];
    const int fan_out = spec.layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    double* w = p.flat.data() + spec.weight_offset(l);
    for (int i = 0; i < fan_out * fan_in; ++i) w[i] = (2.0 * rng.uniform() - 1.0) * bound;
  }
  return p;
}

SurrogateParams init_params_centered(const MlpSpec& spec, SeededRng rng,
                                     const OfflineDataset& data) {
  SurrogateParams p = init_params(spec, rng);
  double mean_y = 0.0;
  for (double y : data.y) mean_y += y;
  mean_y /= static_cast<double>(data.n());
  p.flat[spec.bias_offset(spec.num_layers() - 1)] = mean_y;
  return p;
}

namespace {

inline double act_fwd(Activation a, double z) {
  return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// Derivative from the post-activation value (tanh' = 1 - y^2; relu' as a
// subgradient that is 0 at the kink).
inline double act_bwd(Activation a, double y) {
  return a == Activation::Tanh ? 1.0 - y * y : (y > 0.0 ? 1.0 : 0.0);
}

// Per-thread scratch: activations for all layers plus backward deltas.
struct Scratch {
  std::vector<double> act;    // concat of layer outputs incl. input copy
  std::vector<double> delta;  // concat of per-layer deltas (excl. input)
  std::vector<std::size_t> act_off, delta_off;

  void prepare(const MlpSpec& spec) {
    act_off.assign(spec.layer_sizes.size(), 0);
    delta_off.assign(spec.num_layers(), 0);
    std::size_t a = 0;
    for (std::size_t l = 0; l < spec.layer_sizes.size(); ++l) {
      act_off[l] = a;
      a += static_cast<std::size_t>(spec.layer_sizes[l]);
    }
    std::size_t d = 0;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
      delta_off[l] = d;
      d += static_cast<std::size_t>(spec.layer_sizes[l + 1]);
    }
    if (act.size() < a) act.resize(a);
    if (delta.size() < d) delta.resize(d);
  }
};

Scratch& tls_scratch(const MlpSpec& spec) {
  thread_local Scratch s;
  s.prepare(spec);
  return s;
}

double forward_into(const SurrogateParams& p, std::span<const double> x, Scratch& s) {
  const MlpSpec& spec = p.spec;
  std::copy(x.begin(), x.end(), s.act.begin() + s.act_off[0]);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    const double* w = p.flat.data() + spec.weight_offset(l);
    const double* b = p.flat.data() + spec.bias_offset(l);
    const double* src = s.act.data() + s.act_off[l];
    double* dst = s.act.data() + s.act_off[l + 1];
    const bool last = (l + 1 == spec.num_layers());
    for (int o = 0; o < out; ++o) {
      const double* row = w + static_cast<std::size_t>(o) * in;
      double z = b[o];
      for (int i = 0; i < in; ++i) z += row[i] * src[i];
      dst[o] = last ? z : act_fwd(spec.activation, z);
    }
  }
  return s.act[s.act_off[spec.num_layers()]];
}

// Accumulates seed * d g(x)/d phi into grad (no zeroing) after forward_into.
void backward_params_into(const SurrogateParams& p, Scratch& s, double seed,
                          std::span<double> grad) {
  const MlpSpec& spec = p.spec;
  const std::size_t L = spec.num_layers();
  s.delta[s.delta_off[L - 1]] = seed;
  for (std::size_t l = L; l-- > 0;) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    const double* w = p.flat.data() + spec.weight_offset(l);
    const double* src = s.act.data() + s.act_off[l];
    const double* dl = s.delta.data() + s.delta_off[l];
    double* gw = grad.data() + spec.weight_offset(l);
    double* gb = grad.data() + spec.bias_offset(l);
    for (int o = 0; o < out; ++o) {
      const double d = dl[o];
      double* grow = gw + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) grow[i] += d * src[i];
      gb[o] += d;
    }
    if (l == 0) break;
    const double* prev_act = s.act.data() + s.act_off[l];
    double* dprev = s.delta.data() + s.delta_off[l - 1];
    for (int i = 0; i < in; ++i) {
      double acc = 0.0;
      for (int o = 0; o < out; ++o) acc += w[static_cast<std::size_t>(o) * in + i] * dl[o];
      dprev[i] = acc * act_bwd(spec.activation, prev_act[i]);
    }
  }
}

void backward_input_into(const SurrogateParams& p, Scratch& s, double seed,
                         std::span<double> gx) {
  const MlpSpec& spec = p.spec;
  const std::size_t L = spec.num_layers();
  s.delta[s.delta_off[L - 1]] = seed;
  for (std::size_t l = L; l-- > 0;) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    const double* w = p.flat.data() + spec.weight_offset(l);
    const double* dl = s.delta.data() + s.delta_off[l];
    if (l == 0) {
      for (int i = 0; i < in; ++i) {
        double acc = 0.0;
        for (int o = 0; o < out; ++o) acc += w[static_cast<std::size_t>(o) * in + i] * dl[o];
        gx[i] = acc;
      }
      break;
    }
    const double* prev_act = s.act.data() + s.act_off[l];
    double* dprev = s.delta.data() + s.delta_off[l - 1];
    for (int i = 0; i < in; ++i) {
      double acc = 0.0;
      for (int o = 0; o < out; ++o) acc += w[static_cast<std::size_t>(o) * in + i] * dl[o];
      dprev[i] = acc * act_bwd(spec.activation, prev_act[i]);
    }
  }
}

}  // namespace

double mlp_forward(const SurrogateParams& p, std::span<const double> x) {
  BOSSOPT_REQUIRE(x.size() == p.spec.input_dim(), "mlp_forward: input dimension mismatch");
  return forward_into(p, x, tls_scratch(p.spec));
}

LossGrad loss_and_grad(const SurrogateParams& p, const OfflineDataset& data,
                       std::span<const std::uint32_t> batch) {
  BOSSOPT_REQUIRE(data.d == p.spec.input_dim(), "loss_and_grad: dataset dimension mismatch");
  const std::size_t nb = batch.empty() ? data.n() : batch.size();
  BOSSOPT_REQUIRE(nb >= 1, "loss_and_grad: empty batch");
  const std::size_t np = p.flat.size();
  auto row = [&](std::size_t i) { return batch.empty() ? i : batch[i]; };

  // One sweep accumulates the gradient and, in a trailing slot, the loss.
  const double inv = 1.0 / static_cast<double>(nb);
  Vec acc(np + 1, 0.0);
  par::block_vec_sum(
      nb, np + 1,
      [&](std::size_t i, std::span<double> a) {
        Scratch& s = tls_scratch(p.spec);
        const double pred = forward_into(p, data.point(row(i)), s);
        const double r = pred - data.y[row(i)];
        backward_params_into(p, s, 2.0 * r * inv, a.first(np));
        a[np] += r * r * inv;
      },
      acc);
  LossGrad out;
  out.loss = acc[np];
  out.grad.assign(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(np));
  return out;
}

double mean_prediction(const SurrogateParams& p, const OfflineDataset& data) {
  BOSSOPT_REQUIRE(data.d == p.spec.input_dim(), "mean_prediction: dimension mismatch");
  const double total = par::block_sum(data.n(), [&](std::size_t i) {
    return forward_into(p, data.point(i), tls_scratch(p.spec));
  });
  return total / static_cast<double>(data.n());
}

ParamVector mean_pred_grad(const SurrogateParams& p, const OfflineDataset& data) {
  BOSSOPT_REQUIRE(data.n() >= 1, "mean_pred_grad: empty dataset");
  BOSSOPT_REQUIRE(data.d == p.spec.input_dim(), "mean_pred_grad: dimension mismatch");
  ParamVector g(p.flat.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(data.n());
  par::block_vec_sum(
      data.n(), g.size(),
      [&](std::size_t i, std::span<double> acc) {
        Scratch& s = tls_scratch(p.spec);
        forward_into(p, data.point(i), s);
        backward_params_into(p, s, inv, acc);
      },
      g);
  return g;
}

Vec input_grad(const SurrogateParams& p, std::span<const double> x) {
  BOSSOPT_REQUIRE(x.size() == p.spec.input_dim(), "input_grad: input dimension mismatch");
  Scratch& s = tls_scratch(p.spec);
  forward_into(p, x, s);
  Vec gx(x.size(), 0.0);
  backward_input_into(p, s, 1.0, gx);
  return gx;
}

ParamVector hvp_mean_pred(const SurrogateParams& p, const OfflineDataset& data,
                          std::span<const double> v, HvpMethod method) {
  BOSSOPT_REQUIRE(v.size() == p.flat.size(), "hvp_mean_pred: vector length mismatch");
  const std::size_t np = p.flat.size();
  if (method == HvpMethod::ExactSmall) {
    BOSSOPT_REQUIRE(np <= 200, "hvp_mean_pred: exact-small limited to 200 parameters");
    const double r = 1e-4 * std::max(1.0, norm_inf(p.flat));
    std::vector<Vec> cols(np);
    SurrogateParams q = p;
    for (std::size_t j = 0; j < np; ++j) {
      q.flat = p.flat;
      q.flat[j] = p.flat[j] + r;
      Vec gp = mean_pred_grad(q, data);
      q.flat[j] = p.flat[j] - r;
      Vec gm = mean_pred_grad(q, data);
      cols[j].resize(np);
      for (std::size_t i = 0; i < np; ++i) cols[j][i] = (gp[i] - gm[i]) / (2.0 * r);
    }
    ParamVector out(np, 0.0);
    // symmetrized product: H_ij = (c_j[i] + c_i[j]) / 2
    for (std::size_t i = 0; i < np; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < np; ++j) acc += 0.5 * (cols[j][i] + cols[i][j]) * v[j];
      out[i] = acc;
    }
    return out;
  }

  const double vinf = norm_inf(v);
  if (vinf == 0.0) return ParamVector(np, 0.0);
  double r = 1e-4 * std::max(1.0, norm_inf(p.flat)) / std::max(1e-12, vinf);
  SurrogateParams q = p;
  for (int attempt = 0; attempt <= 8; ++attempt) {
    for (std::size_t i = 0; i < np; ++i) q.flat[i] = p.flat[i] + r * v[i];
    Vec gp = mean_pred_grad(q, data);
    for (std::size_t i = 0; i < np; ++i) q.flat[i] = p.flat[i] - r * v[i];
    Vec gm = mean_pred_grad(q, data);
    ParamVector out(np);
    for (std::size_t i = 0; i < np; ++i) out[i] = (gp[i] - gm[i]) / (2.0 * r);
    if (all_finite(out)) return out;
    r *= 0.5;
  }
  throw ContractError("hvp_mean_pred: non-finite result after 8 step reductions");
}

MiniBatcher::MiniBatcher(std::size_t n, std::size_t batch_size, SeededRng rng)
    : n_(n), batch_(batch_size >= n ? 0 : batch_size), rng_(rng) {}

std::size_t MiniBatcher::steps_per_epoch() const {
  return batch_ == 0 ? 1 : (n_ + batch_ - 1) / batch_;
}

std::span<const std::uint32_t> MiniBatcher::next() {
  if (batch_ == 0) return {};
  if (cursor_ >= n_) cursor_ = 0;
  if (cursor_ == 0) perm_ = rng_.permutation(n_);
  const std::size_t take = std::min(batch_, n_ - cursor_);
  std::span<const std::uint32_t> out(perm_.data() + cursor_, take);
  cursor_ += take;
  return out;
}

SurrogateParams train_surrogate(const OfflineDataset& data, const MlpSpec& spec,
                                int epochs, double lr, std::size_t batch_size,
                                SeededRng rng, const std::optional<SurrogateParams>& init) {
  BOSSOPT_REQUIRE(epochs >= 1, "train_surrogate: epochs must be >= 1");
  BOSSOPT_REQUIRE(lr > 0.0, "train_surrogate: lr must be positive");
  data.validate();
  BOSSOPT_REQUIRE(data.d == spec.input_dim(), "train_surrogate: dimension mismatch");

  SurrogateParams p = init ? *init : init_params(spec, rng.fork("init"));
  BOSSOPT_REQUIRE(p.spec == spec, "train_surrogate: init params incompatible with spec");
  MiniBatcher batcher(data.n(), batch_size, rng.fork("batches"));
  const std::size_t steps = static_cast<std::size_t>(epochs) * batcher.steps_per_epoch();
  for (std::size_t step = 0; step < steps; ++step) {
    const LossGrad lg = loss_and_grad(p, data, batcher.next());
    if (!std::isfinite(lg.loss))
      throw ContractError("train_surrogate: non-finite loss at step " + std::to_string(step));
    for (std::size_t i = 0; i < p.flat.size(); ++i) p.flat[i] -= lr * lg.grad[i];
  }
  return p;
}

void save_params(const SurrogateParams& p, std::ostream& os) {
  os << "mlp";
  for (int s : p.spec.layer_sizes) os << ' ' << s;
  os << ' ' << to_string(p.spec.activation) << '\n';
  for (double v : p.flat) os << format_double(v) << '\n';
}

SurrogateParams load_params(std::istream& is) {
  std::string header;
  BOSSOPT_REQUIRE(static_cast<bool>(std::getline(is, header)), "params: missing header");
  std::istringstream hs(header);
  std::string tag;
  hs >> tag;
  BOSSOPT_REQUIRE(tag == "mlp", "params: bad header tag");
  MlpSpec spec;
  std::string tok;
  while (hs >> tok) {
    if (tok == "tanh" || tok == "relu") {
      spec.activation = activation_from_string(tok);
      break;
    }
    spec.layer_sizes.push_back(std::stoi(tok));
  }
  spec.validate();
  SurrogateParams p{spec, Vec()};
  p.flat.reserve(spec.param_count());
  std::string line;
  while (p.flat.size() < spec.param_count() && std::getline(is, line))
    p.flat.push_back(std::stod(line));
  BOSSOPT_REQUIRE(p.flat.size() == spec.param_count(), "params: truncated file");
  return p;
}

void save_params_file(const SurrogateParams& p, const std::string& path) {
  std::ofstream os(path);
  BOSSOPT_REQUIRE(os.good(), "cannot open for write: " + path);
  save_params(p, os);
}

SurrogateParams load_params_file(const std::string& path) {
  std::ifstream is(path);
  BOSSOPT_REQUIRE(is.good(), "cannot open for read: " + path);
  return load_params(is);
}

}  // namespace bossopt
