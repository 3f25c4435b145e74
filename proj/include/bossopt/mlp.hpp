#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bossopt/common.hpp"
#include "bossopt/rng.hpp"
#include "bossopt/types.hpp"

namespace bossopt {

enum class Activation { Tanh, Relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Fully-connected net: input d, optional hidden layers, scalar linear output.
// A spec with no hidden layer ({d, 1}) is a plain affine map.
struct MlpSpec {
  std::vector<int> layer_sizes;  // {d, hidden..., 1}
  Activation activation = Activation::Tanh;

  std::size_t input_dim() const { return static_cast<std::size_t>(layer_sizes.front()); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  std::size_t param_count() const;
  // Flat layout per layer: weights (out x in, row-major), then biases.
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
  void validate() const;
  bool operator==(const MlpSpec&) const = default;
};

struct SurrogateParams {
  MlpSpec spec;
  Vec flat;
  void validate() const;
};

// Flat vector aligned index-for-index with SurrogateParams::flat.
using ParamVector = Vec;

// Glorot-uniform weights, zero biases.
SurrogateParams init_params(const MlpSpec& spec, SeededRng rng);

// Same, but the output bias starts at the mean training score so plain
// gradient descent does not spend its budget chasing the target offset.
SurrogateParams init_params_centered(const MlpSpec& spec, SeededRng rng,
                                     const OfflineDataset& data);

double mlp_forward(const SurrogateParams& p, std::span<const double> x);

// Mean squared error over the given batch rows and its exact parameter
// gradient. Empty `batch` means the whole dataset.
struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};
LossGrad loss_and_grad(const SurrogateParams& p, const OfflineDataset& data,
                       std::span<const std::uint32_t> batch = {});

// Dataset-mean prediction h and its exact gradient, always over the full set.
double mean_prediction(const SurrogateParams& p, const OfflineDataset& data);
ParamVector mean_pred_grad(const SurrogateParams& p, const OfflineDataset& data);

Vec input_grad(const SurrogateParams& p, std::span<const double> x);

enum class HvpMethod { FiniteDiff, ExactSmall };

// Hessian-of-h times v. FiniteDiff differences mean_pred_grad along v with a
// scale-aware step (halved up to 8 times if the result is non-finite).
// ExactSmall assembles the dense Hessian column by column; test oracle only,
// restricted to param counts <= 200.
ParamVector hvp_mean_pred(const SurrogateParams& p, const OfflineDataset& data,
                          std::span<const double> v, HvpMethod method);

// Mini-batch index stream shared by every training loop so that two loops
// seeded alike consume identical batches. batch_size == 0 means full batch.
class MiniBatcher {
 public:
  MiniBatcher(std::size_t n, std::size_t batch_size, SeededRng rng);
  // Indices for the next step; empty span means "use the whole dataset".
  std::span<const std::uint32_t> next();
  std::size_t steps_per_epoch() const;

 private:
  std::size_t n_;
  std::size_t batch_;
  SeededRng rng_;
  std::vector<std::uint32_t> perm_;
  std::size_t cursor_ = 0;
};

// Plain mini-batch gradient descent on the fit loss.
SurrogateParams train_surrogate(const OfflineDataset& data, const MlpSpec& spec,
                                int epochs, double lr, std::size_t batch_size,
                                SeededRng rng,
                                const std::optional<SurrogateParams>& init = {});

// Text format: header "mlp <sizes...> <activation>", one parameter per line.
void save_params(const SurrogateParams& p, std::ostream& os);
SurrogateParams load_params(std::istream& is);
void save_params_file(const SurrogateParams& p, const std::string& path);
SurrogateParams load_params_file(const std::string& path);

}  // namespace bossopt
