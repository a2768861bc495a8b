#include "core/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace uqr::ad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Div: return "div";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::MulScalar: return "mul_scalar";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Square: return "square";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Softplus: return "softplus";
    case OpKind::Clamp: return "clamp";
    case OpKind::Upsample2x: return "upsample2x";
    case OpKind::ConcatChannels: return "concat_channels";
    case OpKind::Mean: return "mean";
    case OpKind::Sum: return "sum";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::AddBias: return "add_bias";
  }
  return "unknown";
}

// ---- Graph ------------------------------------------------------------------

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(Var<T> v) const {
  if (v.graph != this || v.id >= nodes_.size()) throw ContractError("variable does not belong to this graph");
  return nodes_[v.id];
}

template <typename T>
Var<T> Graph<T>::leaf(Tensor<T> value, bool requires_grad) {
  nodes_.push_back(Node{OpKind::Leaf, std::move(value), {}, nullptr, requires_grad, Tensor<T>{}, false});
  return Var<T>{this, nodes_.size() - 1};
}

template <typename T>
Var<T> Graph<T>::record(OpKind kind, Tensor<T> value, std::vector<Var<T>> parents, BackwardFn backward) {
  std::vector<std::size_t> ids;
  ids.reserve(parents.size());
  bool needs = false;
  for (const Var<T>& p : parents) {
    node(p);
    ids.push_back(p.id);
    needs = needs || nodes_[p.id].requires_grad;
  }
  nodes_.push_back(Node{kind, std::move(value), std::move(ids), needs ? std::move(backward) : nullptr, needs,
                        Tensor<T>{}, false});
  return Var<T>{this, nodes_.size() - 1};
}

template <typename T>
Tensor<T> Graph<T>::grad(Var<T> v) const {
  const Node& n = node(v);
  if (n.requires_grad && n.has_grad) return n.grad;
  return Tensor<T>::zeros(n.value.shape());
}

template <typename T>
void Graph<T>::backward(Var<T> loss) {
  const Node& root = node(loss);
  if (root.value.size() != 1)
    throw ContractError("backward() needs a scalar loss, got shape " + shape_str(root.value.shape()));
  if (!std::isfinite(static_cast<double>(root.value[0]))) throw NumericError("backward() on a non-finite loss");

  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor<T>{};
  }
  visits_ = 0;
  if (!root.requires_grad) return;

  Node& top = nodes_[loss.id];
  top.grad = Tensor<T>::full(top.value.shape(), T{1});
  top.has_grad = true;

  std::vector<Tensor<T>*> slots;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    slots.assign(n.parents.size(), nullptr);
    for (std::size_t k = 0; k < n.parents.size(); ++k) {
      Node& p = nodes_[n.parents[k]];
      if (!p.requires_grad) continue;
      if (!p.has_grad) {
        p.grad = Tensor<T>::zeros(p.value.shape());
        p.has_grad = true;
      }
      slots[k] = &p.grad;
    }
    n.backward(*this, n.grad, slots);
    ++visits_;
  }
}

// ---- helpers ----------------------------------------------------------------

namespace {

template <typename T>
Graph<T>& same_graph(Var<T> a, Var<T> b) {
  if (a.graph == nullptr || a.graph != b.graph) throw ContractError("operands belong to different graphs");
  return *a.graph;
}

template <typename T>
const Shape& broadcast_shape(const Tensor<T>& a, const Tensor<T>& b, std::string_view op) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.size() == 1) return a.shape();
  if (a.size() == 1) return b.shape();
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()));
}

// f(x, y) -> value; dx(x, y, z) and dy(x, y, z) -> local partials, z = f(x, y).
template <typename T, typename F, typename DX, typename DY>
Var<T> binary(OpKind kind, Var<T> a, Var<T> b, F f, DX dx, DY dy) {
  Graph<T>& g = same_graph(a, b);
  const Tensor<T>& av = g.value(a);
  const Tensor<T>& bv = g.value(b);
  Shape shape = broadcast_shape(av, bv, op_name(kind));
  const std::size_t n = shape_size(shape);
  const std::size_t as = av.size() == 1 ? 0 : 1, bs = bv.size() == 1 ? 0 : 1;
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i * as], bv[i * bs]);
  Tensor<T> value(std::move(shape), std::move(out));

  return g.record(kind, std::move(value), {a, b},
                  [a, b, as, bs, n, dx, dy, out_id = g.size()](const Graph<T>& gr, const Tensor<T>& go,
                                                               std::span<Tensor<T>* const> pg) {
                    const Tensor<T>& x = gr.value(a);
                    const Tensor<T>& y = gr.value(b);
                    const Tensor<T>& z = gr.value_at(out_id);
                    if (pg[0])
                      for (std::size_t i = 0; i < n; ++i)
                        (*pg[0])[i * as] += go[i] * dx(x[i * as], y[i * bs], z[i]);
                    if (pg[1])
                      for (std::size_t i = 0; i < n; ++i)
                        (*pg[1])[i * bs] += go[i] * dy(x[i * as], y[i * bs], z[i]);
                  });
}

// f(x) -> value; df(x, z) -> local derivative.
template <typename T, typename F, typename DF>
Var<T> unary(OpKind kind, Var<T> a, F f, DF df) {
  Graph<T>& g = *a.graph;
  const Tensor<T>& av = g.value(a);
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  Tensor<T> value(av.shape(), std::move(out));
  return g.record(kind, std::move(value), {a},
                  [a, df, out_id = g.size()](const Graph<T>& gr, const Tensor<T>& go,
                                             std::span<Tensor<T>* const> pg) {
                    const Tensor<T>& x = gr.value(a);
                    const Tensor<T>& z = gr.value_at(out_id);
                    Tensor<T>& gx = *pg[0];
                    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += go[i] * df(x[i], z[i]);
                  });
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= 0) return T{1} / (T{1} + std::exp(-x));
  T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
void require_chw(const Tensor<T>& t, std::string_view op) {
  if (t.rank() != 3) throw ShapeError(std::string(op) + " expects [C,H,W], got " + shape_str(t.shape()));
}

}  // namespace

// ---- elementwise ------------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  return binary(
      OpKind::Add, a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T{1}; },
      [](T, T, T) { return T{1}; });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  return binary(
      OpKind::Sub, a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T{1}; },
      [](T, T, T) { return T{-1}; });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  return binary(
      OpKind::Mul, a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; },
      [](T x, T, T) { return x; });
}

template <typename T>
Var<T> div(Var<T> a, Var<T> b) {
  const Tensor<T>& bv = same_graph(a, b).value(b);
  for (std::size_t i = 0; i < bv.size(); ++i)
    if (bv[i] == T{0}) throw DomainError("div: zero divisor", i);
  return binary(
      OpKind::Div, a, b, [](T x, T y) { return x / y; }, [](T, T y, T) { return T{1} / y; },
      [](T, T y, T z) { return -z / y; });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T c) {
  return unary(OpKind::AddScalar, a, [c](T x) { return x + c; }, [](T, T) { return T{1}; });
}

template <typename T>
Var<T> mul_scalar(Var<T> a, T c) {
  return unary(OpKind::MulScalar, a, [c](T x) { return x * c; }, [c](T, T) { return c; });
}

template <typename T>
Var<T> exp(Var<T> a) {
  return unary(OpKind::Exp, a, [](T x) { return std::exp(x); }, [](T, T z) { return z; });
}

template <typename T>
Var<T> log(Var<T> a) {
  const Tensor<T>& av = a.graph->value(a);
  for (std::size_t i = 0; i < av.size(); ++i)
    if (!(av[i] > T{0})) throw DomainError("log: non-positive operand", i);
  return unary(OpKind::Log, a, [](T x) { return std::log(x); }, [](T x, T) { return T{1} / x; });
}

template <typename T>
Var<T> square(Var<T> a) {
  return unary(OpKind::Square, a, [](T x) { return x * x; }, [](T x, T) { return T{2} * x; });
}

template <typename T>
Var<T> leaky_relu(Var<T> a, T slope) {
  return unary(
      OpKind::LeakyRelu, a, [slope](T x) { return x > 0 ? x : slope * x; },
      [slope](T x, T) { return x > 0 ? T{1} : slope; });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  return unary(
      OpKind::Sigmoid, a, [](T x) { return stable_sigmoid(x); }, [](T, T z) { return z * (T{1} - z); });
}

template <typename T>
Var<T> softplus(Var<T> a) {
  return unary(
      OpKind::Softplus, a, [](T x) { return std::max(x, T{0}) + std::log1p(std::exp(-std::abs(x))); },
      [](T x, T) { return stable_sigmoid(x); });
}

template <typename T>
Var<T> clamp(Var<T> a, T lo, T hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo > hi");
  return unary(
      OpKind::Clamp, a, [lo, hi](T x) { return std::clamp(x, lo, hi); },
      [lo, hi](T x, T) { return (x >= lo && x <= hi) ? T{1} : T{0}; });
}

// ---- structural -------------------------------------------------------------

template <typename T>
Var<T> upsample2x(Var<T> a) {
  Graph<T>& g = *a.graph;
  const Tensor<T>& av = g.value(a);
  require_chw(av, "upsample2x");
  const std::size_t C = av.dim(0), H = av.dim(1), W = av.dim(2);
  const std::size_t H2 = 2 * H, W2 = 2 * W;
  std::vector<T> out(C * H2 * W2);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H2; ++y)
      for (std::size_t x = 0; x < W2; ++x) out[(c * H2 + y) * W2 + x] = av[(c * H + y / 2) * W + x / 2];
  return g.record(OpKind::Upsample2x, Tensor<T>({C, H2, W2}, std::move(out)), {a},
                  [C, H, W](const Graph<T>&, const Tensor<T>& go, std::span<Tensor<T>* const> pg) {
                    Tensor<T>& gx = *pg[0];
                    const std::size_t H2 = 2 * H, W2 = 2 * W;
                    for (std::size_t c = 0; c < C; ++c)
                      for (std::size_t y = 0; y < H2; ++y)
                        for (std::size_t x = 0; x < W2; ++x)
                          gx[(c * H + y / 2) * W + x / 2] += go[(c * H2 + y) * W2 + x];
                  });
}

template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  Graph<T>& g = same_graph(a, b);
  const Tensor<T>& av = g.value(a);
  const Tensor<T>& bv = g.value(b);
  require_chw(av, "concat_channels");
  require_chw(bv, "concat_channels");
  if (av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
    throw ShapeError("concat_channels: spatial extents differ, " + shape_str(av.shape()) + " vs " +
                     shape_str(bv.shape()));
  std::vector<T> out;
  out.reserve(av.size() + bv.size());
  out.insert(out.end(), av.values().begin(), av.values().end());
  out.insert(out.end(), bv.values().begin(), bv.values().end());
  const std::size_t na = av.size();
  return g.record(OpKind::ConcatChannels, Tensor<T>({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)}, std::move(out)),
                  {a, b}, [na](const Graph<T>&, const Tensor<T>& go, std::span<Tensor<T>* const> pg) {
                    if (pg[0])
                      for (std::size_t i = 0; i < na; ++i) (*pg[0])[i] += go[i];
                    if (pg[1])
                      for (std::size_t i = 0; i < pg[1]->size(); ++i) (*pg[1])[i] += go[na + i];
                  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  Graph<T>& g = *a.graph;
  const Tensor<T>& av = g.value(a);
  T total{0};
  for (T v : av.values()) total += v;
  return g.record(OpKind::Sum, Tensor<T>::scalar(total), {a},
                  [](const Graph<T>&, const Tensor<T>& go, std::span<Tensor<T>* const> pg) {
                    const T s = go[0];
                    for (T& v : pg[0]->values()) v += s;
                  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  Graph<T>& g = *a.graph;
  const Tensor<T>& av = g.value(a);
  T total{0};
  for (T v : av.values()) total += v;
  const T n = static_cast<T>(av.size());
  return g.record(OpKind::Mean, Tensor<T>::scalar(total / n), {a},
                  [n](const Graph<T>&, const Tensor<T>& go, std::span<Tensor<T>* const> pg) {
                    const T s = go[0] / n;
                    for (T& v : pg[0]->values()) v += s;
                  });
}

// ---- convolution ------------------------------------------------------------

ConvGeometry conv_geometry(const Shape& input, const Shape& kernel, int stride, int padding) {
  if (input.size() != 3 || kernel.size() != 4)
    throw ShapeError("conv2d expects input [C,H,W] and kernel [O,C,k,k], got " + shape_str(input) + " and " +
                     shape_str(kernel));
  if (input[0] != kernel[1])
    throw ShapeError("conv2d: input channels of " + shape_str(input) + " do not match kernel " + shape_str(kernel));
  if (kernel[2] != kernel[3] || kernel[2] % 2 == 0)
    throw ShapeError("conv2d: kernel must be square with odd extent, got " + shape_str(kernel));
  if (stride != 1 && stride != 2) throw ContractError("conv2d: stride must be 1 or 2");
  if (padding < 0) throw ContractError("conv2d: negative padding");
  const std::size_t k = kernel[2];
  if (stride == 1 && static_cast<std::size_t>(padding) != (k - 1) / 2)
    throw ContractError("conv2d: stride 1 requires padding (k-1)/2");
  if (input[1] + 2 * padding < k || input[2] + 2 * padding < k)
    throw ShapeError("conv2d: kernel larger than padded input " + shape_str(input));
  return ConvGeometry{input[0], kernel[0], input[1], input[2], k, stride, padding};
}

namespace {

// cols[(c*k+ky)*k+kx][oy*Wo+ox] = in[c][oy*s+ky-p][ox*s+kx-p], zero outside.
template <typename T>
void im2col(const ConvGeometry& g, std::span<const T> in, std::vector<T>& cols) {
  const std::size_t Ho = g.out_height(), Wo = g.out_width(), k = g.kernel;
  const std::size_t J = Ho * Wo;
  cols.assign(g.in_channels * k * k * J, T{0});
  for (std::size_t c = 0; c < g.in_channels; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = cols.data() + ((c * k + ky) * k + kx) * J;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.padding;
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          const T* src = in.data() + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          T* dst = row + oy * Wo;
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride + static_cast<long>(kx) - g.padding;
            if (ix >= 0 && ix < static_cast<long>(g.width)) dst[ox] = src[ix];
          }
        }
      }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const std::vector<T>& cols, std::span<T> out) {
  const std::size_t Ho = g.out_height(), Wo = g.out_width(), k = g.kernel;
  const std::size_t J = Ho * Wo;
  for (std::size_t c = 0; c < g.in_channels; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = cols.data() + ((c * k + ky) * k + kx) * J;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.padding;
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          T* dst = out.data() + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          const T* src = row + oy * Wo;
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride + static_cast<long>(kx) - g.padding;
            if (ix >= 0 && ix < static_cast<long>(g.width)) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernel, int stride, int padding) {
  Graph<T>& g = same_graph(input, kernel);
  const Tensor<T>& xv = g.value(input);
  const Tensor<T>& kv = g.value(kernel);
  const ConvGeometry geo = conv_geometry(xv.shape(), kv.shape(), stride, padding);
  const std::size_t Ho = geo.out_height(), Wo = geo.out_width();
  const std::size_t J = Ho * Wo, R = geo.in_channels * geo.kernel * geo.kernel, O = geo.out_channels;

  std::vector<T> cols;
  im2col<T>(geo, xv.values(), cols);
  std::vector<T> out(O * J, T{0});
  for (std::size_t o = 0; o < O; ++o) {
    T* dst = out.data() + o * J;
    for (std::size_t r = 0; r < R; ++r) {
      const T w = kv[o * R + r];
      const T* src = cols.data() + r * J;
      for (std::size_t j = 0; j < J; ++j) dst[j] += w * src[j];
    }
  }

  return g.record(OpKind::Conv2d, Tensor<T>({O, Ho, Wo}, std::move(out)), {input, kernel},
                  [geo, kernel, cols = std::move(cols), J, R, O](const Graph<T>& gr, const Tensor<T>& go,
                                                                 std::span<Tensor<T>* const> pg) {
                    if (pg[1]) {
                      Tensor<T>& gk = *pg[1];
                      for (std::size_t o = 0; o < O; ++o) {
                        const T* dy = go.values().data() + o * J;
                        for (std::size_t r = 0; r < R; ++r) {
                          const T* src = cols.data() + r * J;
                          T acc{0};
                          for (std::size_t j = 0; j < J; ++j) acc += dy[j] * src[j];
                          gk[o * R + r] += acc;
                        }
                      }
                    }
                    if (pg[0]) {
                      const Tensor<T>& kv = gr.value(kernel);
                      std::vector<T> dcols(R * J, T{0});
                      for (std::size_t o = 0; o < O; ++o) {
                        const T* dy = go.values().data() + o * J;
                        for (std::size_t r = 0; r < R; ++r) {
                          const T w = kv[o * R + r];
                          T* dst = dcols.data() + r * J;
                          for (std::size_t j = 0; j < J; ++j) dst[j] += w * dy[j];
                        }
                      }
                      col2im_add<T>(geo, dcols, pg[0]->values());
                    }
                  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  Graph<T>& g = same_graph(x, bias);
  const Tensor<T>& xv = g.value(x);
  const Tensor<T>& bv = g.value(bias);
  require_chw(xv, "add_bias");
  if (bv.rank() != 1 || bv.dim(0) != xv.dim(0))
    throw ShapeError("add_bias: bias " + shape_str(bv.shape()) + " does not match " + shape_str(xv.shape()));
  const std::size_t C = xv.dim(0), P = xv.dim(1) * xv.dim(2);
  std::vector<T> out(xv.values().begin(), xv.values().end());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < P; ++i) out[c * P + i] += bv[c];
  return g.record(OpKind::AddBias, Tensor<T>(xv.shape(), std::move(out)), {x, bias},
                  [C, P](const Graph<T>&, const Tensor<T>& go, std::span<Tensor<T>* const> pg) {
                    if (pg[0])
                      for (std::size_t i = 0; i < C * P; ++i) (*pg[0])[i] += go[i];
                    if (pg[1])
                      for (std::size_t c = 0; c < C; ++c) {
                        T acc{0};
                        for (std::size_t i = 0; i < P; ++i) acc += go[c * P + i];
                        (*pg[1])[c] += acc;
                      }
                  });
}

// ---- instantiations ---------------------------------------------------------

#define UQR_INSTANTIATE(T)                                         \
  template class Graph<T>;                                         \
  template Var<T> add(Var<T>, Var<T>);                             \
  template Var<T> sub(Var<T>, Var<T>);                             \
  template Var<T> mul(Var<T>, Var<T>);                             \
  template Var<T> div(Var<T>, Var<T>);                             \
  template Var<T> add_scalar(Var<T>, T);                           \
  template Var<T> mul_scalar(Var<T>, T);                           \
  template Var<T> exp(Var<T>);                                     \
  template Var<T> log(Var<T>);                                     \
  template Var<T> square(Var<T>);                                  \
  template Var<T> leaky_relu(Var<T>, T);                           \
  template Var<T> sigmoid(Var<T>);                                 \
  template Var<T> softplus(Var<T>);                                \
  template Var<T> clamp(Var<T>, T, T);                             \
  template Var<T> upsample2x(Var<T>);                              \
  template Var<T> concat_channels(Var<T>, Var<T>);                 \
  template Var<T> mean(Var<T>);                                    \
  template Var<T> sum(Var<T>);                                     \
  template Var<T> conv2d(Var<T>, Var<T>, int, int);                \
  template Var<T> add_bias(Var<T>, Var<T>);

UQR_INSTANTIATE(float)
UQR_INSTANTIATE(double)

#undef UQR_INSTANTIATE

}  // namespace uqr::ad
