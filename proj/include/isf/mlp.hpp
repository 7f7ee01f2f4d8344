#pragma once

#include <string>
#include <vector>

#include "isf/common.hpp"
#include "isf/rng.hpp"

namespace isf {

template <class T>
struct Linear {
  Mat<T> W;  // out x in
  Vec<T> b;  // out

  Vec<T> apply(const Vec<T>& x) const { return W * x + b; }

  void set_zero(Eigen::Index out, Eigen::Index in) {
    W = Mat<T>::Zero(out, in);
    b = Vec<T>::Zero(out);
  }
};

// He-uniform weights (bound sqrt(6/fan_in)), zero bias
template <class T>
Linear<T> he_uniform_linear(Eigen::Index out, Eigen::Index in, Rng& rng) {
  Linear<T> l;
  l.W.resize(out, in);
  const double bound = std::sqrt(6.0 / double(in));
  for (Eigen::Index i = 0; i < out; ++i) {
    for (Eigen::Index j = 0; j < in; ++j) {
      l.W(i, j) = T(bound * (2.0 * rng.uniform() - 1.0));
    }
  }
  l.b = Vec<T>::Zero(out);
  return l;
}

// Plain MLP with leaky-ReLU between layers. When activate_last is false, the
// final layer is linear (used for output projections).
template <class T>
struct Mlp {
  std::vector<Linear<T>> layers;
  T slope = T(0.2);
  bool activate_last = true;

  Eigen::Index in_dim() const { return layers.front().W.cols(); }
  Eigen::Index out_dim() const { return layers.back().W.rows(); }
};

template <class T>
struct MlpCache {
  std::vector<Vec<T>> inputs;   // input to each layer
  std::vector<Vec<T>> preacts;  // W*x+b per layer
};

template <class T>
Vec<T> mlp_forward(const Mlp<T>& mlp, const Vec<T>& x, MlpCache<T>* cache) {
  if (x.size() != mlp.in_dim()) {
    throw InvalidArgument("mlp_forward: input width mismatch");
  }
  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
  }
  Vec<T> cur = x;
  for (size_t li = 0; li < mlp.layers.size(); ++li) {
    if (cache) cache->inputs.push_back(cur);
    Vec<T> z = mlp.layers[li].apply(cur);
    if (cache) cache->preacts.push_back(z);
    const bool act = mlp.activate_last || li + 1 < mlp.layers.size();
    if (act) {
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        z[i] = leaky_relu(z[i], mlp.slope);
      }
    }
    cur = std::move(z);
  }
  return cur;
}

// Gradients use the Linear layout of the net they belong to.
template <class T>
using MlpGrads = std::vector<Linear<T>>;

template <class T>
MlpGrads<T> zero_grads(const Mlp<T>& mlp) {
  MlpGrads<T> g;
  g.reserve(mlp.layers.size());
  for (const auto& l : mlp.layers) {
    Linear<T> z;
    z.set_zero(l.W.rows(), l.W.cols());
    g.push_back(std::move(z));
  }
  return g;
}

// Accumulates into grads; returns gradient w.r.t. the input.
template <class T>
Vec<T> mlp_backward(const Mlp<T>& mlp, const MlpCache<T>& cache,
                    const Vec<T>& dout, MlpGrads<T>& grads) {
  Vec<T> d = dout;
  for (size_t li = mlp.layers.size(); li-- > 0;) {
    const bool act = mlp.activate_last || li + 1 < mlp.layers.size();
    if (act) {
      const Vec<T>& z = cache.preacts[li];
      for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (z[i] < T(0)) d[i] *= mlp.slope;
      }
    }
    grads[li].W.noalias() += d * cache.inputs[li].transpose();
    grads[li].b += d;
    d = mlp.layers[li].W.transpose() * d;
  }
  return d;
}

template <class T>
void collect_tensors(Linear<T>& l, const std::string& prefix,
                     std::vector<TensorRef<T>>& out) {
  out.push_back({prefix + ".w", l.W.data(), l.W.rows(), l.W.cols()});
  out.push_back({prefix + ".b", l.b.data(), l.b.size(), 1});
}

template <class T>
void collect_tensors(Mlp<T>& mlp, const std::string& prefix,
                     std::vector<TensorRef<T>>& out) {
  for (size_t i = 0; i < mlp.layers.size(); ++i) {
    collect_tensors(mlp.layers[i], prefix + "." + std::to_string(i), out);
  }
}

template <class T>
void collect_tensors(MlpGrads<T>& grads, const std::string& prefix,
                     std::vector<TensorRef<T>>& out) {
  for (size_t i = 0; i < grads.size(); ++i) {
    collect_tensors(grads[i], prefix + "." + std::to_string(i), out);
  }
}

}  // namespace isf
