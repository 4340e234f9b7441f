#ifndef INTRIN_ADAM_HPP
#define INTRIN_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "intrin/tensor.hpp"

namespace intrin {

// Adam with bias correction. Parameters whose requires_grad flag was cleared
// (frozen encoder) are skipped entirely: neither the parameter nor its
// moments change.
template <class T>
struct AdamState {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  std::int64_t t = 0;
  std::vector<std::vector<T>> m, v;

  void init(const std::vector<Tensor<T>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.numel(), T(0));
      v.emplace_back(p.numel(), T(0));
    }
    t = 0;
  }
};

template <class T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state) {
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state not initialized for these parameters");
  state.t += 1;
  const T bc1 = T(1) - std::pow(state.beta1, T(state.t));
  const T bc2 = T(1) - std::pow(state.beta2, T(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    if (p.numel() != state.m[k].size())
      throw std::invalid_argument("adam_step: parameter/moment shape mismatch");
    if (!p.requires_grad()) continue;
    const auto g = p.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    auto& x = p.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = state.beta1 * m[i] + (T(1) - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (T(1) - state.beta2) * g[i] * g[i];
      const T mhat = m[i] / bc1;
      const T vhat = v[i] / bc2;
      x[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

template <class T>
void zero_grads(std::vector<Tensor<T>>& params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace intrin

#endif  // INTRIN_ADAM_HPP
