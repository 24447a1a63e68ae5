#include "uagan/autodiff.hpp"

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "uagan/error.hpp"

namespace uagan::ad {

namespace {

[[noreturn]] void shape_mismatch(Op op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " +
                   shape_str(a) + " and " + shape_str(b));
}

void require_same_tape(Op op, Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw ShapeError(std::string(op_name(op)) + ": operands on different tapes");
  }
}

void require_matrix(Op op, const Tensor& t) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op_name(op)) + ": expected a matrix, got " +
                     shape_str(t.shape()));
  }
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

// out[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  MutMap(out, m, n).noalias() += ConstMap(a, m, k) * ConstMap(b, k, n);
}

// out[m x k] += g[m x n] * b[k x n]^T
void gemm_nt(const double* g, const double* b, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  MutMap(out, m, k).noalias() += ConstMap(g, m, n) * ConstMap(b, k, n).transpose();
}

// out[k x n] += a[m x k]^T * g[m x n]
void gemm_tn(const double* a, const double* g, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  MutMap(out, k, n).noalias() += ConstMap(a, m, k).transpose() * ConstMap(g, m, n);
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void accumulate(Tensor& into, const Tensor& from) {
  if (into.size() == 0 && from.size() != 0) {
    into = from;
    return;
  }
  auto dst = into.data();
  auto src = from.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kAddBias: return "add_bias";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kTanh: return "tanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kLog: return "log";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kConcat: return "concat";
    case Op::kClamp: return "clamp";
  }
  return "unknown";
}

void matmul_into(std::span<const double> a, std::span<const double> b,
                 std::span<double> out, std::size_t m, std::size_t k,
                 std::size_t n) {
  std::fill(out.begin(), out.end(), 0.0);
  gemm_nn(a.data(), b.data(), out.data(), m, k, n);
}

const Tensor& Var::value() const { return tape_->value(*this); }

const Tensor& Gradients::operator[](Var v) const { return grads_.at(v.id()); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  Node n;
  n.requires_grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::record(Op op, std::initializer_list<Var> inputs, double p0,
                 double p1, Tensor value) {
  Node n;
  n.op = op;
  n.p0 = p0;
  n.p1 = p1;
  for (Var v : inputs) {
    n.inputs[n.num_inputs++] = v.id();
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  n.value = std::move(value);
  return push(std::move(n));
}

Gradients Tape::backward(Var output) const {
  return backward(output, Tensor::ones(value(output).shape()));
}

Gradients Tape::backward(Var output, const Tensor& seed) const {
  if (output.tape() != this) throw ShapeError("backward: output not on this tape");
  const Node& out_node = nodes_.at(output.id());
  if (seed.shape() != out_node.value.shape()) {
    throw ShapeError("backward: seed shape " + shape_str(seed.shape()) +
                     " does not match output shape " +
                     shape_str(out_node.value.shape()));
  }

  Gradients result;
  auto& g = result.grads_;
  g.resize(nodes_.size());
  g[output.id()] = seed;

  for (std::size_t idx = output.id() + 1; idx-- > 0;) {
    const Node& node = nodes_[idx];
    if (node.op == Op::kLeaf || !node.requires_grad || g[idx].size() == 0) {
      continue;
    }
    const Tensor& gout = g[idx];
    const Tensor& y = node.value;
    auto input_needs = [&](int k) {
      return nodes_[node.inputs[k]].requires_grad;
    };
    auto grad_slot = [&](int k) -> Tensor& {
      Tensor& slot = g[node.inputs[k]];
      if (slot.size() == 0) slot = Tensor::zeros(nodes_[node.inputs[k]].value.shape());
      return slot;
    };
    const Tensor& x0 = nodes_[node.inputs[0]].value;

    switch (node.op) {
      case Op::kLeaf:
        break;
      case Op::kMatmul: {
        const Tensor& x1 = nodes_[node.inputs[1]].value;
        const std::size_t m = x0.dim(0), k = x0.dim(1), n = x1.dim(1);
        if (input_needs(0)) {
          gemm_nt(gout.data().data(), x1.data().data(),
                  grad_slot(0).data().data(), m, k, n);
        }
        if (input_needs(1)) {
          gemm_tn(x0.data().data(), gout.data().data(),
                  grad_slot(1).data().data(), m, k, n);
        }
        break;
      }
      case Op::kAdd:
        if (input_needs(0)) accumulate(grad_slot(0), gout);
        if (input_needs(1)) accumulate(grad_slot(1), gout);
        break;
      case Op::kAddBias: {
        if (input_needs(0)) accumulate(grad_slot(0), gout);
        if (input_needs(1)) {
          Tensor& gb = grad_slot(1);
          const std::size_t rows = gout.rows(), cols = gout.cols();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) gb[c] += gout[r * cols + c];
          }
        }
        break;
      }
      case Op::kMul: {
        const Tensor& x1 = nodes_[node.inputs[1]].value;
        if (input_needs(0)) {
          Tensor& ga = grad_slot(0);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] * x1[i];
        }
        if (input_needs(1)) {
          Tensor& gb = grad_slot(1);
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[i] * x0[i];
        }
        break;
      }
      case Op::kScale: {
        Tensor& ga = grad_slot(0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] * node.p0;
        break;
      }
      case Op::kLeakyRelu: {
        Tensor& ga = grad_slot(0);
        for (std::size_t i = 0; i < ga.size(); ++i) {
          ga[i] += gout[i] * (x0[i] > 0.0 ? 1.0 : node.p0);
        }
        break;
      }
      case Op::kTanh: {
        Tensor& ga = grad_slot(0);
        for (std::size_t i = 0; i < ga.size(); ++i) {
          ga[i] += gout[i] * (1.0 - y[i] * y[i]);
        }
        break;
      }
      case Op::kSigmoid: {
        Tensor& ga = grad_slot(0);
        for (std::size_t i = 0; i < ga.size(); ++i) {
          ga[i] += gout[i] * y[i] * (1.0 - y[i]);
        }
        break;
      }
      case Op::kLog: {
        Tensor& ga = grad_slot(0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] / x0[i];
        break;
      }
      case Op::kSum: {
        Tensor& ga = grad_slot(0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[0];
        break;
      }
      case Op::kMean: {
        Tensor& ga = grad_slot(0);
        const double w = gout[0] / static_cast<double>(ga.size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += w;
        break;
      }
      case Op::kConcat: {
        const Tensor& x1 = nodes_[node.inputs[1]].value;
        const std::size_t rows = y.rows(), ca = x0.cols(), cb = x1.cols();
        if (input_needs(0)) {
          Tensor& ga = grad_slot(0);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < ca; ++c) ga[r * ca + c] += gout[r * (ca + cb) + c];
          }
        }
        if (input_needs(1)) {
          Tensor& gb = grad_slot(1);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cb; ++c) {
              gb[r * cb + c] += gout[r * (ca + cb) + ca + c];
            }
          }
        }
        break;
      }
      case Op::kClamp: {
        Tensor& ga = grad_slot(0);
        for (std::size_t i = 0; i < ga.size(); ++i) {
          if (x0[i] > node.p0 && x0[i] < node.p1) ga[i] += gout[i];
        }
        break;
      }
    }
  }

  for (std::size_t idx = 0; idx < nodes_.size(); ++idx) {
    if (nodes_[idx].op == Op::kLeaf && g[idx].size() == 0) {
      g[idx] = Tensor::zeros(nodes_[idx].value.shape());
    }
  }
  return result;
}

Var matmul(Var a, Var b) {
  require_same_tape(Op::kMatmul, a, b);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0)) {
    shape_mismatch(Op::kMatmul, x.shape(), w.shape());
  }
  Tensor out({x.dim(0), w.dim(1)});
  gemm_nn(x.data().data(), w.data().data(), out.data().data(), x.dim(0),
          x.dim(1), w.dim(1));
  return a.tape()->record(Op::kMatmul, {a, b}, 0, 0, std::move(out));
}

Var add(Var a, Var b) {
  require_same_tape(Op::kAdd, a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) shape_mismatch(Op::kAdd, x.shape(), y.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return a.tape()->record(Op::kAdd, {a, b}, 0, 0, std::move(out));
}

Var add_bias(Var x, Var bias) {
  require_same_tape(Op::kAddBias, x, bias);
  const Tensor& v = x.value();
  const Tensor& b = bias.value();
  require_matrix(Op::kAddBias, v);
  const bool bias_ok = (b.rank() == 1 && b.dim(0) == v.dim(1)) ||
                       (b.rank() == 2 && b.dim(0) == 1 && b.dim(1) == v.dim(1));
  if (!bias_ok) shape_mismatch(Op::kAddBias, v.shape(), b.shape());
  Tensor out = v;
  const std::size_t rows = v.dim(0), cols = v.dim(1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += b[c];
  }
  return x.tape()->record(Op::kAddBias, {x, bias}, 0, 0, std::move(out));
}

Var mul(Var a, Var b) {
  require_same_tape(Op::kMul, a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) shape_mismatch(Op::kMul, x.shape(), y.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return a.tape()->record(Op::kMul, {a, b}, 0, 0, std::move(out));
}

Var scale(Var x, double factor, double offset) {
  Tensor out = x.value();
  for (double& v : out.data()) v = factor * v + offset;
  return x.tape()->record(Op::kScale, {x}, factor, offset, std::move(out));
}

Var leaky_relu(Var x, double alpha) {
  Tensor out = x.value();
  for (double& v : out.data()) v = v > 0.0 ? v : alpha * v;
  return x.tape()->record(Op::kLeakyRelu, {x}, alpha, 0, std::move(out));
}

Var tanh(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = std::tanh(v);
  return x.tape()->record(Op::kTanh, {x}, 0, 0, std::move(out));
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) {
    if (!std::isfinite(v)) throw DomainError("sigmoid: non-finite input");
    v = sigmoid_scalar(v);
  }
  return x.tape()->record(Op::kSigmoid, {x}, 0, 0, std::move(out));
}

Var log(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) {
    if (!(v > 0.0)) {
      throw DomainError("log: non-positive input " + std::to_string(v));
    }
    v = std::log(v);
  }
  return x.tape()->record(Op::kLog, {x}, 0, 0, std::move(out));
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape()->record(Op::kSum, {x}, 0, 0, Tensor::scalar(s));
}

Var mean(Var x) {
  const Tensor& v = x.value();
  if (v.size() == 0) throw ShapeError("mean: empty tensor");
  double s = 0.0;
  for (double e : v.data()) s += e;
  return x.tape()->record(Op::kMean, {x}, 0, 0,
                          Tensor::scalar(s / static_cast<double>(v.size())));
}

Var concat(Var a, Var b) {
  require_same_tape(Op::kConcat, a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rank() != 2 || y.rank() != 2 || x.dim(0) != y.dim(0)) {
    shape_mismatch(Op::kConcat, x.shape(), y.shape());
  }
  const std::size_t rows = x.dim(0), ca = x.dim(1), cb = y.dim(1);
  Tensor out({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ca; ++c) out[r * (ca + cb) + c] = x[r * ca + c];
    for (std::size_t c = 0; c < cb; ++c) out[r * (ca + cb) + ca + c] = y[r * cb + c];
  }
  return a.tape()->record(Op::kConcat, {a, b}, 0, 0, std::move(out));
}

Var clamp(Var x, double lo, double hi) {
  if (!(lo < hi)) throw DomainError("clamp: empty interval");
  Tensor out = x.value();
  for (double& v : out.data()) v = std::min(std::max(v, lo), hi);
  return x.tape()->record(Op::kClamp, {x}, lo, hi, std::move(out));
}

}  // namespace uagan::ad
