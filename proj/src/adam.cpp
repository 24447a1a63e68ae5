#include "uagan/adam.hpp"

#include <cmath>

#include "uagan/error.hpp"

namespace uagan {

AdamState make_adam_state(std::span<const Tensor> params) {
  AdamState state;
  for (const Tensor& p : params) {
    state.m.push_back(Tensor::zeros(p.shape()));
    state.v.push_back(Tensor::zeros(p.shape()));
  }
  return state;
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads,
               AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) +
                     " params, " + std::to_string(grads.size()) + " grads, " +
                     std::to_string(state.m.size()) + " moment buffers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() ||
        params[i].shape() != state.m[i].shape()) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " shape " +
                       shape_str(params[i].shape()) + " vs grad " +
                       shape_str(grads[i].shape()));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
    }
  }
}

}  // namespace uagan
