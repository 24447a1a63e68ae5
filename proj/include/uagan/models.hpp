#pragma once

// Generator and discriminator MLPs, noise sampling and the local
// discriminator update.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uagan/adam.hpp"
#include "uagan/autodiff.hpp"
#include "uagan/random.hpp"
#include "uagan/tensor.hpp"

namespace uagan {

// Discriminator outputs are clamped to [kDiscClamp, 1 - kDiscClamp] so their
// odds values are always finite and positive.
inline constexpr double kDiscClamp = 1e-6;

// Isotropic Gaussian N(mean, variance * I).
class NoiseSpec {
 public:
  NoiseSpec(std::size_t dim, std::vector<double> mean, double variance);
  // Zero-mean convenience constructor.
  NoiseSpec(std::size_t dim, double variance)
      : NoiseSpec(dim, std::vector<double>(dim, 0.0), variance) {}

  std::size_t dim() const { return dim_; }
  const std::vector<double>& mean() const { return mean_; }
  double variance() const { return variance_; }

 private:
  std::size_t dim_;
  std::vector<double> mean_;
  double variance_;
};

enum class Activation { kIdentity, kTanh, kSigmoid };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

struct MlpSpec {
  // Input width first, output width last.
  std::vector<std::size_t> widths;
  Activation output = Activation::kIdentity;
  double leaky_slope = ad::kDefaultLeakySlope;

  void validate() const;
  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
};

// One-hot label encoding appended to the network input.
class LabelEncoding {
 public:
  explicit LabelEncoding(std::size_t num_classes);
  std::size_t num_classes() const { return num_classes_; }
  // m labels -> [m x num_classes] one-hot rows.
  Tensor encode(std::span<const int> labels) const;

 private:
  std::size_t num_classes_;
};

class Mlp {
 public:
  // Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Mlp(MlpSpec spec, Rng& rng);
  Mlp(MlpSpec spec, std::vector<Tensor> params);

  const MlpSpec& spec() const { return spec_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::size_t num_layers() const { return spec_.widths.size() - 1; }

  // Records the forward pass on `tape`. Parameters are added as variables;
  // their handles are written to `param_vars` when given, otherwise as
  // constants.
  ad::Var forward(ad::Tape& tape, ad::Var input,
                  std::vector<ad::Var>* param_vars = nullptr) const;

  std::vector<std::pair<std::string, Tensor>> named_params() const;
  void load_named_params(const std::vector<std::pair<std::string, Tensor>>& named);

 private:
  MlpSpec spec_;
  std::vector<Tensor> params_;  // w0, b0, w1, b1, ...
};

Tensor sample_noise(std::size_t m, const NoiseSpec& spec, Rng& rng);

// Feeds z (concatenated with one-hot labels when given) through G.
ad::Var generator_forward(const Mlp& generator, ad::Tape& tape, ad::Var z,
                          const Tensor* onehot = nullptr,
                          std::vector<ad::Var>* param_vars = nullptr);

// Sigmoid output clamped to [kDiscClamp, 1 - kDiscClamp]; the MLP must end
// in a sigmoid.
ad::Var discriminator_forward(const Mlp& disc, ad::Tape& tape, ad::Var x,
                              const Tensor* onehot = nullptr,
                              std::vector<ad::Var>* param_vars = nullptr);

// Plain evaluation without keeping the tape.
Tensor predict(const Mlp& disc, const Tensor& x, const Tensor* onehot = nullptr);
Tensor generate(const Mlp& generator, const Tensor& z, const Tensor* onehot = nullptr);

// Predictions D(x_i) and per-row input gradients dD(x_i)/dx_i.
struct InputGradient {
  std::vector<double> predictions;
  Tensor gradients;  // m x data_dim
};
InputGradient predict_with_input_gradient(const Mlp& disc, const Tensor& x,
                                          const Tensor* onehot = nullptr);

// One Adam ascent step on mean[log D(real)] + mean[log(1 - D(fake))].
// Returns the objective evaluated before the update.
double local_discriminator_step(Mlp& disc, AdamState& state,
                                const AdamConfig& config, const Tensor& real,
                                const Tensor& fake,
                                const Tensor* real_onehot = nullptr,
                                const Tensor* fake_onehot = nullptr);

// Checkpoint file: "UAGN", u32 version, then per tensor: u64 name length,
// name bytes, u64 rank, u64 dims, f64 data. All little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors);
std::vector<std::pair<std::string, Tensor>> load_checkpoint(
    const std::filesystem::path& path);

}  // namespace uagan
