#pragma once

// Tape-based reverse-mode differentiation over dense tensors.
//
// A Tape owns every intermediate value of one forward pass. Operations are
// free functions over Var handles and append a node to the tape of their
// inputs, so the node list is always in topological order. backward() walks
// the list once in reverse and never mutates the tape, which makes repeated
// calls with the same seed return identical gradients.
//
// Broadcasting is limited to adding a bias row to every row of a matrix
// (add_bias); any other shape disagreement is a ShapeError.

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "uagan/tensor.hpp"

namespace uagan::ad {

enum class Op : std::uint8_t {
  kLeaf,
  kMatmul,
  kAdd,
  kAddBias,
  kMul,
  kScale,
  kLeakyRelu,
  kTanh,
  kSigmoid,
  kLog,
  kSum,
  kMean,
  kConcat,
  kClamp,
};

std::string_view op_name(Op op);

inline constexpr double kDefaultLeakySlope = 0.2;

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Gradients {
 public:
  // Gradient of the seeded output w.r.t. `v`. Leaves that did not influence
  // the output get a zero tensor of their own shape.
  const Tensor& operator[](Var v) const;
  const Tensor& at(std::size_t id) const { return grads_.at(id); }

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable leaf (parameters, inputs we want gradients for).
  Var variable(Tensor value);
  // Leaf that never receives a gradient; backward skips subgraphs that only
  // depend on constants.
  Var constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  Op op(Var v) const { return nodes_.at(v.id()).op; }
  std::size_t size() const { return nodes_.size(); }

  Gradients backward(Var output, const Tensor& seed) const;
  // Seeds with ones; intended for scalar losses.
  Gradients backward(Var output) const;

  // Appends an op node; used by the op functions below.
  Var record(Op op, std::initializer_list<Var> inputs, double p0, double p1,
             Tensor value);

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::array<std::size_t, 2> inputs{};
    std::uint8_t num_inputs = 0;
    double p0 = 0.0;  // op parameter: slope, scale factor, clamp low
    double p1 = 0.0;  // op parameter: offset, clamp high
    bool requires_grad = false;
    Tensor value;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
// x[m x n] + bias[n] (or [1 x n]) added to every row.
Var add_bias(Var x, Var bias);
Var mul(Var a, Var b);
// factor * x + offset, elementwise.
Var scale(Var x, double factor, double offset = 0.0);
// Slope `alpha` applies for x <= 0, including the kink at exactly zero.
Var leaky_relu(Var x, double alpha = kDefaultLeakySlope);
Var tanh(Var x);
Var sigmoid(Var x);
// Throws DomainError if any input entry is <= 0.
Var log(Var x);
Var sum(Var x);
Var mean(Var x);
// Column-wise concatenation of two matrices with equal row counts.
Var concat(Var a, Var b);
// Gradient passes through strictly inside (lo, hi) and is zero at or past
// either bound.
Var clamp(Var x, double lo, double hi);

// Raw kernels, shared with code that needs plain matrix products.
void matmul_into(std::span<const double> a, std::span<const double> b,
                 std::span<double> out, std::size_t m, std::size_t k,
                 std::size_t n);

}  // namespace uagan::ad
