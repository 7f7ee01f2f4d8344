#pragma once

#include <vector>

#include "isf/common.hpp"

namespace isf {

template <class T>
struct AdamConfig {
  T beta1 = T(0);
  T beta2 = T(0.99);
  T eps = T(1e-8);

  void validate() const {
    if (!(beta1 >= T(0) && beta1 < T(1)) || !(beta2 >= T(0) && beta2 < T(1))) {
      throw InvalidArgument("adam: betas must lie in [0,1)");
    }
    if (!(eps > T(0))) throw InvalidArgument("adam: eps must be positive");
  }
};

template <class T>
struct AdamState {
  Vec<T> m;
  Vec<T> v;
  int64_t step = 0;

  void init(Eigen::Index n) {
    m = Vec<T>::Zero(n);
    v = Vec<T>::Zero(n);
    step = 0;
  }
};

// One bias-corrected Adam update over the flattened parameter list. Params
// and grads must be collected in the same tensor order.
template <class T>
void adam_step(const std::vector<TensorRef<T>>& params,
               const std::vector<TensorRef<T>>& grads, AdamState<T>& state,
               T lr, const AdamConfig<T>& cfg) {
  cfg.validate();
  const Eigen::Index n = total_size(params);
  if (n != total_size(grads)) {
    throw InvalidArgument("adam_step: parameter/gradient size mismatch");
  }
  if (state.m.size() != n) state.init(n);

  state.step += 1;
  const T bc1 = T(1) - std::pow(cfg.beta1, T(double(state.step)));
  const T bc2 = T(1) - std::pow(cfg.beta2, T(double(state.step)));

  const Vec<T> g_flat = flatten_tensors(grads);
  Eigen::Index flat = 0;
  for (const auto& p : params) {
    for (Eigen::Index i = 0; i < p.size(); ++i, ++flat) {
      const T g = g_flat[flat];
      T& m = state.m[flat];
      T& v = state.v[flat];
      m = cfg.beta1 * m + (T(1) - cfg.beta1) * g;
      v = cfg.beta2 * v + (T(1) - cfg.beta2) * g * g;
      const T m_hat = m / bc1;
      const T v_hat = v / bc2;
      p.data[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

}  // namespace isf
