#pragma once

// Tape-based reverse-mode automatic differentiation over dense tensors.
//
// A Graph owns every value computed during one forward pass. Operations
// append nodes whose parents always precede them, so insertion order is a
// topological order and backward() is a single reverse sweep. Graphs are
// meant to be short-lived: build one per training step, read the leaf
// gradients, discard it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "core/tensor.hpp"

namespace uqr::ad {

enum class OpKind : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  AddScalar,
  MulScalar,
  Exp,
  Log,
  Square,
  LeakyRelu,
  Sigmoid,
  Softplus,
  Clamp,
  Upsample2x,
  ConcatChannels,
  Mean,
  Sum,
  Conv2d,
  AddBias,
};

std::string_view op_name(OpKind kind);

template <typename T>
class Graph;

template <typename T>
struct Var {
  Graph<T>* graph = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return graph->value(*this); }
  const Shape& shape() const { return graph->value(*this).shape(); }
};

template <typename T>
class Graph {
 public:
  // Receives the gradient flowing into the node and one slot per parent;
  // a slot is null when that parent does not require a gradient.
  using BackwardFn =
      std::function<void(const Graph& graph, const Tensor<T>& out_grad, std::span<Tensor<T>* const> parent_grads)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = false);
  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  Var<T> record(OpKind kind, Tensor<T> value, std::vector<Var<T>> parents, BackwardFn backward);

  const Tensor<T>& value(Var<T> v) const { return node(v).value; }
  const Tensor<T>& value_at(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(Var<T> v) const { return node(v).requires_grad; }

  // Gradient of the last backward() loss with respect to v. Nodes that do
  // not require gradients, or were unreachable, report zeros.
  Tensor<T> grad(Var<T> v) const;

  void backward(Var<T> loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_.at(id).parents; }
  // Number of nodes whose backward rule ran during the last backward().
  std::size_t backward_visits() const noexcept { return visits_; }

 private:
  struct Node {
    OpKind kind;
    Tensor<T> value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad;
    Tensor<T> grad;
    bool has_grad = false;
  };

  const Node& node(Var<T> v) const;

  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

// ---- operations -------------------------------------------------------------
// Binary elementwise ops accept equal shapes, or one operand with a single
// element broadcast against the other.

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> div(Var<T> a, Var<T> b);
template <typename T> Var<T> add_scalar(Var<T> a, T c);
template <typename T> Var<T> mul_scalar(Var<T> a, T c);

template <typename T> Var<T> exp(Var<T> a);
template <typename T> Var<T> log(Var<T> a);
template <typename T> Var<T> square(Var<T> a);
template <typename T> Var<T> leaky_relu(Var<T> a, T slope = T(0.01));
template <typename T> Var<T> sigmoid(Var<T> a);
// log(1 + e^a), evaluated without overflow.
template <typename T> Var<T> softplus(Var<T> a);
// Gradient passes where lo <= a <= hi, zero elsewhere.
template <typename T> Var<T> clamp(Var<T> a, T lo, T hi);

// [C,H,W] -> [C,2H,2W]
template <typename T> Var<T> upsample2x(Var<T> a);
// [C1,H,W] ++ [C2,H,W] -> [C1+C2,H,W]
template <typename T> Var<T> concat_channels(Var<T> a, Var<T> b);
template <typename T> Var<T> mean(Var<T> a);
template <typename T> Var<T> sum(Var<T> a);

// input [C_in,H,W], kernel [C_out,C_in,k,k]
template <typename T> Var<T> conv2d(Var<T> input, Var<T> kernel, int stride, int padding);
// x [C,H,W] + bias [C] per channel
template <typename T> Var<T> add_bias(Var<T> x, Var<T> bias);

template <typename T> Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <typename T> Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <typename T> Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }
template <typename T> Var<T> operator/(Var<T> a, Var<T> b) { return div(a, b); }
template <typename T> Var<T> operator+(Var<T> a, T c) { return add_scalar(a, c); }
template <typename T> Var<T> operator*(Var<T> a, T c) { return mul_scalar(a, c); }
template <typename T> Var<T> operator*(T c, Var<T> a) { return mul_scalar(a, c); }

// Raw convolution kernels, shared by the graph op and by tests.
struct ConvGeometry {
  std::size_t in_channels, out_channels, height, width, kernel;
  int stride, padding;
  std::size_t out_height() const { return (height + 2 * padding - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * padding - kernel) / stride + 1; }
};

ConvGeometry conv_geometry(const Shape& input, const Shape& kernel, int stride, int padding);

}  // namespace uqr::ad
