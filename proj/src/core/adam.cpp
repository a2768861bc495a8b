#include "core/adam.hpp"

#include <cmath>

#include "core/error.hpp"

namespace uqr::ad {

template <typename T>
AdamState<T> AdamState<T>::init(const ParameterSet<T>& params, AdamHyper hyper) {
  if (!(hyper.lr > 0)) throw ConfigError("adam: lr must be positive");
  if (!(hyper.beta1 >= 0 && hyper.beta1 < 1) || !(hyper.beta2 >= 0 && hyper.beta2 < 1))
    throw ConfigError("adam: betas must lie in [0,1)");
  if (!(hyper.epsilon > 0)) throw ConfigError("adam: epsilon must be positive");
  AdamState s;
  s.hyper = hyper;
  for (const auto& p : params) {
    s.first_moment.push_back(Tensor<T>::zeros(p.tensor.shape()));
    s.second_moment.push_back(Tensor<T>::zeros(p.tensor.shape()));
  }
  return s;
}

template <typename T>
void adam_step(ParameterSet<T>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size())
    throw ContractError("adam: parameter, gradient and moment counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& s = params[i].tensor.shape();
    if (grads[i].shape() != s || state.first_moment[i].shape() != s || state.second_moment[i].shape() != s)
      throw ShapeError("adam: shape mismatch for parameter " + params[i].name);
    for (T g : grads[i].values())
      if (!std::isfinite(static_cast<double>(g)))
        throw NumericError("adam: non-finite gradient for parameter " + params[i].name);
  }

  const AdamHyper& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].tensor.values();
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    auto g = grads[i].values();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = b1 * m[j] + (T{1} - b1) * g[j];
      v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
      const double mhat = static_cast<double>(m[j]) / c1;
      const double vhat = static_cast<double>(v[j]) / c2;
      theta[j] = static_cast<T>(static_cast<double>(theta[j]) - h.lr * mhat / (std::sqrt(vhat) + h.epsilon));
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(ParameterSet<float>&, const std::vector<Tensor<float>>&, AdamState<float>&);
template void adam_step(ParameterSet<double>&, const std::vector<Tensor<double>>&, AdamState<double>&);

}  // namespace uqr::ad
