#include "uagan/models.hpp"

#include <cmath>
#include <fstream>

#include "uagan/bytes.hpp"
#include "uagan/error.hpp"

namespace uagan {

NoiseSpec::NoiseSpec(std::size_t dim, std::vector<double> mean, double variance)
    : dim_(dim), mean_(std::move(mean)), variance_(variance) {
  if (dim_ < 1) throw ConfigError("noise: dim must be >= 1");
  if (mean_.size() != dim_) throw ConfigError("noise: mean has wrong length");
  if (!(variance_ > 0.0) || !std::isfinite(variance_)) {
    throw ConfigError("noise: variance must be positive and finite");
  }
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "identity";
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ConfigError("mlp: need at least two layer widths");
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("mlp: layer widths must be positive");
  }
}

LabelEncoding::LabelEncoding(std::size_t num_classes) : num_classes_(num_classes) {
  if (num_classes_ < 1) throw ConfigError("labels: num_classes must be >= 1");
}

Tensor LabelEncoding::encode(std::span<const int> labels) const {
  Tensor out({labels.size(), num_classes_});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes_) {
      throw DomainError("labels: class " + std::to_string(labels[i]) +
                        " outside [0, " + std::to_string(num_classes_) + ")");
    }
    out.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

Mlp::Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
  spec_.validate();
  for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
    const std::size_t in = spec_.widths[l], out = spec_.widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor w({in, out});
    for (double& v : w.data()) v = uniform(rng, -bound, bound);
    Tensor b({out});
    for (double& v : b.data()) v = uniform(rng, -bound, bound);
    params_.push_back(std::move(w));
    params_.push_back(std::move(b));
  }
}

Mlp::Mlp(MlpSpec spec, std::vector<Tensor> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (params_.size() != 2 * num_layers()) {
    throw ShapeError("mlp: expected " + std::to_string(2 * num_layers()) +
                     " parameter tensors, got " + std::to_string(params_.size()));
  }
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const Shape w{spec_.widths[l], spec_.widths[l + 1]};
    const Shape b{spec_.widths[l + 1]};
    if (params_[2 * l].shape() != w || params_[2 * l + 1].shape() != b) {
      throw ShapeError("mlp: layer " + std::to_string(l) + " expects " +
                       shape_str(w) + " / " + shape_str(b));
    }
  }
}

ad::Var Mlp::forward(ad::Tape& tape, ad::Var input,
                     std::vector<ad::Var>* param_vars) const {
  const Tensor& x = input.value();
  if (x.rank() != 2 || x.dim(1) != spec_.input_dim()) {
    throw ShapeError("mlp: input " + shape_str(x.shape()) + " but network expects " +
                     std::to_string(spec_.input_dim()) + " columns");
  }
  std::vector<ad::Var> local;
  std::vector<ad::Var>& vars = param_vars ? *param_vars : local;
  if (vars.empty()) {
    for (const Tensor& p : params_) {
      vars.push_back(param_vars ? tape.variable(p) : tape.constant(p));
    }
  }

  ad::Var h = input;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    h = ad::add_bias(ad::matmul(h, vars[2 * l]), vars[2 * l + 1]);
    if (l + 1 < num_layers()) {
      h = ad::leaky_relu(h, spec_.leaky_slope);
    }
  }
  switch (spec_.output) {
    case Activation::kIdentity: return h;
    case Activation::kTanh: return ad::tanh(h);
    case Activation::kSigmoid: return ad::sigmoid(h);
  }
  return h;
}

std::vector<std::pair<std::string, Tensor>> Mlp::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    out.emplace_back("layer" + std::to_string(l) + ".weight", params_[2 * l]);
    out.emplace_back("layer" + std::to_string(l) + ".bias", params_[2 * l + 1]);
  }
  return out;
}

void Mlp::load_named_params(const std::vector<std::pair<std::string, Tensor>>& named) {
  auto expected = named_params();
  if (named.size() != expected.size()) {
    throw FormatError("checkpoint: expected " + std::to_string(expected.size()) +
                      " tensors, found " + std::to_string(named.size()));
  }
  std::vector<Tensor> loaded;
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (named[i].first != expected[i].first ||
        named[i].second.shape() != expected[i].second.shape()) {
      throw FormatError("checkpoint: tensor '" + named[i].first + "' " +
                        shape_str(named[i].second.shape()) + " does not match '" +
                        expected[i].first + "' " + shape_str(expected[i].second.shape()));
    }
    loaded.push_back(named[i].second);
  }
  params_ = std::move(loaded);
}

Tensor sample_noise(std::size_t m, const NoiseSpec& spec, Rng& rng) {
  Tensor z({m, spec.dim()});
  const double sd = std::sqrt(spec.variance());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < spec.dim(); ++c) {
      z.at(i, c) = spec.mean()[c] + sd * normal(rng);
    }
  }
  return z;
}

namespace {

ad::Var with_labels(ad::Tape& tape, ad::Var x, const Tensor* onehot) {
  if (!onehot) return x;
  if (onehot->rank() != 2 || onehot->dim(0) != x.value().dim(0)) {
    throw ShapeError("labels: one-hot block " + shape_str(onehot->shape()) +
                     " does not match batch " + shape_str(x.value().shape()));
  }
  return ad::concat(x, tape.constant(*onehot));
}

}  // namespace

ad::Var generator_forward(const Mlp& generator, ad::Tape& tape, ad::Var z,
                          const Tensor* onehot, std::vector<ad::Var>* param_vars) {
  return generator.forward(tape, with_labels(tape, z, onehot), param_vars);
}

ad::Var discriminator_forward(const Mlp& disc, ad::Tape& tape, ad::Var x,
                              const Tensor* onehot, std::vector<ad::Var>* param_vars) {
  if (disc.spec().output != Activation::kSigmoid || disc.spec().output_dim() != 1) {
    throw ConfigError("discriminator: network must end in a single sigmoid unit");
  }
  ad::Var p = disc.forward(tape, with_labels(tape, x, onehot), param_vars);
  return ad::clamp(p, kDiscClamp, 1.0 - kDiscClamp);
}

Tensor predict(const Mlp& disc, const Tensor& x, const Tensor* onehot) {
  ad::Tape tape;
  return discriminator_forward(disc, tape, tape.constant(x), onehot).value();
}

Tensor generate(const Mlp& generator, const Tensor& z, const Tensor* onehot) {
  ad::Tape tape;
  return generator_forward(generator, tape, tape.constant(z), onehot).value();
}

InputGradient predict_with_input_gradient(const Mlp& disc, const Tensor& x,
                                          const Tensor* onehot) {
  ad::Tape tape;
  ad::Var xv = tape.variable(x);
  ad::Var d = discriminator_forward(disc, tape, xv, onehot);
  // Rows are independent, so a ones seed yields per-row input gradients.
  ad::Gradients grads = tape.backward(d, Tensor::ones(d.value().shape()));
  InputGradient out;
  out.predictions.assign(d.value().data().begin(), d.value().data().end());
  out.gradients = grads[xv];
  return out;
}

double local_discriminator_step(Mlp& disc, AdamState& state,
                                const AdamConfig& config, const Tensor& real,
                                const Tensor& fake, const Tensor* real_onehot,
                                const Tensor* fake_onehot) {
  if (real.rows() == 0 || fake.rows() == 0 || real.size() == 0 || fake.size() == 0) {
    throw ShapeError("discriminator step: empty batch");
  }
  ad::Tape tape;
  std::vector<ad::Var> params;
  ad::Var d_real = discriminator_forward(disc, tape, tape.constant(real), real_onehot, &params);
  ad::Var d_fake = discriminator_forward(disc, tape, tape.constant(fake), fake_onehot, &params);
  ad::Var objective = ad::add(ad::mean(ad::log(d_real)),
                              ad::mean(ad::log(ad::scale(d_fake, -1.0, 1.0))));
  // Ascend the objective by descending its negation.
  ad::Gradients grads = tape.backward(objective, Tensor::scalar(-1.0));
  std::vector<Tensor> g;
  g.reserve(params.size());
  for (ad::Var p : params) g.push_back(grads[p]);
  adam_step(disc.params(), g, state, config);
  return objective.value()[0];
}

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors) {
  ByteWriter w;
  w.raw("UAGN");
  w.u32(kCheckpointVersion);
  for (const auto& [name, t] : tensors) {
    w.u64(name.size());
    w.raw(name);
    w.u64(t.rank());
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("checkpoint: cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(w.bytes().data()),
            static_cast<std::streamsize>(w.size()));
  if (!out) throw FormatError("checkpoint: write failed for " + path.string());
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  ByteReader r(bytes);
  if (r.str(4) != "UAGN") throw DecodeError("checkpoint: bad magic", 0);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DecodeError("checkpoint: unsupported version " + std::to_string(version), 4);
  }
  std::vector<std::pair<std::string, Tensor>> out;
  while (!r.done()) {
    const std::uint64_t name_len = r.count(1);
    std::string name = r.str(name_len);
    const std::uint64_t rank = r.count(8);
    Shape shape;
    for (std::uint64_t i = 0; i < rank; ++i) shape.push_back(r.u64());
    const std::size_t n = shape_numel(shape);
    if (n > r.remaining() / 8) throw DecodeError("checkpoint: tensor data truncated", r.offset());
    std::vector<double> data(n);
    for (double& v : data) v = r.f64();
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace uagan
