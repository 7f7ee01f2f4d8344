#pragma once

#include <string>
#include <vector>

#include "isf/mlp.hpp"
#include "isf/types.hpp"

namespace isf {

// Multi-task discriminator: shared stride-2 conv trunk, global average
// pooling, then a scalar real/fake head and an m-logit attribute head.
// 3x3 kernels, stride 2, pad 1; one block per halving down to spatial 2.
struct CriticConfig {
  int resolution = 32;
  int m = 4;
  std::vector<int> channels = {32, 64, 128, 256};

  int blocks() const { return int(channels.size()); }

  void validate() const {
    if (m < 1) throw InvalidArgument("critic: m must be positive");
    int r = resolution;
    for (int c : channels) {
      if (c < 1) throw InvalidArgument("critic: channel count must be positive");
      if (r < 4 || r % 2 != 0) {
        throw InvalidArgument("critic: resolution not divisible by trunk depth");
      }
      r /= 2;
    }
    if (r < 1) throw InvalidArgument("critic: too many blocks for resolution");
  }
};

// channels double per block starting from `base`, depth log2(resolution)-1
inline CriticConfig default_critic_config(int resolution, int m,
                                          int base = 32) {
  CriticConfig cfg;
  cfg.resolution = resolution;
  cfg.m = m;
  cfg.channels.clear();
  int ch = base;
  for (int r = resolution; r > 2; r /= 2) {
    cfg.channels.push_back(ch);
    ch *= 2;
  }
  cfg.validate();
  return cfg;
}

template <class T>
struct ConvLayer {
  Mat<T> W;  // out_ch x (in_ch*9)
  Vec<T> b;  // out_ch
  int in_ch = 0;
  int out_ch = 0;
};

template <class T>
struct CriticParams {
  CriticConfig cfg;
  std::vector<ConvLayer<T>> trunk;
  Linear<T> rf_head;   // 1 x C_last
  Linear<T> cls_head;  // m x C_last
  T slope = T(0.2);
};

template <class T>
CriticParams<T> init_critic_params(const CriticConfig& cfg, Rng& rng) {
  cfg.validate();
  CriticParams<T> p;
  p.cfg = cfg;
  int in_ch = 3;
  for (int out_ch : cfg.channels) {
    ConvLayer<T> l;
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    const Linear<T> init = he_uniform_linear<T>(out_ch, in_ch * 9, rng);
    l.W = init.W;
    l.b = init.b;
    p.trunk.push_back(std::move(l));
    in_ch = out_ch;
  }
  p.rf_head = he_uniform_linear<T>(1, in_ch, rng);
  p.cls_head = he_uniform_linear<T>(cfg.m, in_ch, rng);
  return p;
}

namespace detail {

// planes: (channels) x (H*W), one row per channel
template <class T>
Mat<T> image_to_planes(const ImageTensor<T>& img) {
  Mat<T> planes(3, Eigen::Index(img.height) * img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        planes(c, Eigen::Index(y) * img.width + x) = img.at(y, x, c);
      }
    }
  }
  return planes;
}

template <class T>
ImageTensor<T> planes_to_image(const Mat<T>& planes, int h, int w) {
  ImageTensor<T> img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = planes(c, Eigen::Index(y) * w + x);
      }
    }
  }
  return img;
}

// 3x3/stride-2/pad-1 patch matrix: (in_ch*9) x (OH*OW)
template <class T>
void im2col_3s2p1(const Mat<T>& in, int H, int W, Mat<T>& cols) {
  const int OH = H / 2, OW = W / 2;
  const Eigen::Index in_ch = in.rows();
  cols.setZero(in_ch * 9, Eigen::Index(OH) * OW);
  for (int oy = 0; oy < OH; ++oy) {
    for (int ox = 0; ox < OW; ++ox) {
      const Eigen::Index col = Eigen::Index(oy) * OW + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int y = 2 * oy + ky - 1;
        if (y < 0 || y >= H) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int x = 2 * ox + kx - 1;
          if (x < 0 || x >= W) continue;
          const Eigen::Index pix = Eigen::Index(y) * W + x;
          const Eigen::Index krow = Eigen::Index(ky) * 3 + kx;
          for (Eigen::Index c = 0; c < in_ch; ++c) {
            cols(c * 9 + krow, col) = in(c, pix);
          }
        }
      }
    }
  }
}

template <class T>
void col2im_3s2p1_acc(const Mat<T>& dcols, int H, int W, Mat<T>& din) {
  const int OH = H / 2, OW = W / 2;
  const Eigen::Index in_ch = din.rows();
  for (int oy = 0; oy < OH; ++oy) {
    for (int ox = 0; ox < OW; ++ox) {
      const Eigen::Index col = Eigen::Index(oy) * OW + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int y = 2 * oy + ky - 1;
        if (y < 0 || y >= H) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int x = 2 * ox + kx - 1;
          if (x < 0 || x >= W) continue;
          const Eigen::Index pix = Eigen::Index(y) * W + x;
          const Eigen::Index krow = Eigen::Index(ky) * 3 + kx;
          for (Eigen::Index c = 0; c < in_ch; ++c) {
            din(c, pix) += dcols(c * 9 + krow, col);
          }
        }
      }
    }
  }
}

}  // namespace detail

template <class T>
struct CriticCache {
  std::vector<Mat<T>> cols;     // im2col of each block input
  std::vector<Mat<T>> preacts;  // out_ch x (OH*OW) per block
  std::vector<std::pair<int, int>> in_size;  // (H, W) per block
  Vec<T> features;  // after global average pooling
  T rf_logit = T(0);
  Vec<T> cls_logits;
};

template <class T>
CriticCache<T> critic_forward(const CriticParams<T>& p,
                              const ImageTensor<T>& x) {
  if (x.height != p.cfg.resolution || x.width != p.cfg.resolution) {
    throw InvalidArgument("critic: input resolution mismatch");
  }
  CriticCache<T> cache;
  Mat<T> cur = detail::image_to_planes(x);
  int H = x.height, W = x.width;
  for (const auto& layer : p.trunk) {
    cache.in_size.emplace_back(H, W);
    Mat<T> cols;
    detail::im2col_3s2p1(cur, H, W, cols);
    Mat<T> pre = layer.W * cols;
    pre.colwise() += layer.b;
    cache.cols.push_back(std::move(cols));
    cache.preacts.push_back(pre);
    Mat<T>& act = pre;
    for (Eigen::Index i = 0; i < act.size(); ++i) {
      T* d = act.data() + i;
      if (*d < T(0)) *d *= p.slope;
    }
    cur = std::move(act);
    H /= 2;
    W /= 2;
  }
  const T inv_hw = T(1) / T(H * W);
  cache.features = cur.rowwise().sum() * inv_hw;
  cache.rf_logit = (p.rf_head.W * cache.features + p.rf_head.b)(0);
  cache.cls_logits = p.cls_head.apply(cache.features);
  return cache;
}

template <class T>
struct CriticGrads {
  std::vector<Linear<T>> trunk;  // W: out_ch x in_ch*9
  Linear<T> rf_head, cls_head;
};

template <class T>
CriticGrads<T> zero_critic_grads(const CriticParams<T>& p) {
  CriticGrads<T> g;
  for (const auto& l : p.trunk) {
    Linear<T> z;
    z.set_zero(l.W.rows(), l.W.cols());
    g.trunk.push_back(std::move(z));
  }
  g.rf_head.set_zero(p.rf_head.W.rows(), p.rf_head.W.cols());
  g.cls_head.set_zero(p.cls_head.W.rows(), p.cls_head.W.cols());
  return g;
}

// Reverse pass. Accumulates into grads when non-null; returns dL/d(input
// image) when want_input_grad. drf/dcls are the cotangents of the two heads.
template <class T>
ImageTensor<T> critic_backward(const CriticParams<T>& p,
                               const CriticCache<T>& cache, T drf,
                               const Vec<T>& dcls, CriticGrads<T>* grads,
                               bool want_input_grad) {
  Vec<T> dfeat = Vec<T>::Zero(cache.features.size());
  dfeat += p.rf_head.W.transpose() * Vec<T>::Constant(1, drf);
  if (dcls.size() > 0) dfeat += p.cls_head.W.transpose() * dcls;
  if (grads) {
    grads->rf_head.W.noalias() += drf * cache.features.transpose();
    grads->rf_head.b[0] += drf;
    if (dcls.size() > 0) {
      grads->cls_head.W.noalias() += dcls * cache.features.transpose();
      grads->cls_head.b += dcls;
    }
  }

  const int n_blocks = int(p.trunk.size());
  const auto [h_last, w_last] = cache.in_size.back();
  const int hw_last = (h_last / 2) * (w_last / 2);

  // GAP backward: spread the feature cotangent uniformly
  Mat<T> dcur(dfeat.size(), hw_last);
  const T inv_hw = T(1) / T(hw_last);
  for (Eigen::Index c = 0; c < dfeat.size(); ++c) {
    dcur.row(c).setConstant(dfeat[c] * inv_hw);
  }

  for (int bi = n_blocks - 1; bi >= 0; --bi) {
    const auto& layer = p.trunk[size_t(bi)];
    const Mat<T>& pre = cache.preacts[size_t(bi)];
    for (Eigen::Index i = 0; i < dcur.size(); ++i) {
      if (pre.data()[i] < T(0)) dcur.data()[i] *= p.slope;
    }
    if (grads) {
      grads->trunk[size_t(bi)].W.noalias() +=
          dcur * cache.cols[size_t(bi)].transpose();
      grads->trunk[size_t(bi)].b += dcur.rowwise().sum();
    }
    const bool need_below = bi > 0 || want_input_grad;
    if (!need_below) break;
    const Mat<T> dcols = layer.W.transpose() * dcur;
    const auto [H, W] = cache.in_size[size_t(bi)];
    Mat<T> din = Mat<T>::Zero(layer.in_ch, Eigen::Index(H) * W);
    detail::col2im_3s2p1_acc(dcols, H, W, din);
    dcur = std::move(din);
  }

  if (want_input_grad) {
    return detail::planes_to_image(dcur, p.cfg.resolution, p.cfg.resolution);
  }
  return ImageTensor<T>();
}

// gradient of the real/fake logit w.r.t. the input pixels
template <class T>
ImageTensor<T> critic_input_grad(const CriticParams<T>& p,
                                 const CriticCache<T>& cache) {
  return critic_backward(p, cache, T(1), Vec<T>(),
                         static_cast<CriticGrads<T>*>(nullptr), true);
}

template <class T>
T discriminate(const ImageTensor<T>& x, const CriticParams<T>& p) {
  return critic_forward(p, x).rf_logit;
}

template <class T>
Vec<T> classify_logits(const ImageTensor<T>& x, const CriticParams<T>& p) {
  return critic_forward(p, x).cls_logits;
}

// --- R1 second-order path -------------------------------------------------
//
// The R1 penalty (gamma/2)·||∇_x D(x)||² needs its own parameter gradient.
// With v = ∇_x D(x) held constant, ∇_θ ||v||² = 2·∇_θ (J_x D · v), and the
// directional derivative J_x D · v is computed by a tangent (forward-mode)
// pass through the trunk with the leaky-ReLU gates frozen to the primal
// activation pattern. Reverse over that tangent graph gives the parameter
// gradient; the gates are piecewise constant so they contribute nothing.

template <class T>
struct R1TangentCache {
  std::vector<Mat<T>> t_cols;  // im2col of tangent input per block
  std::vector<Mat<T>> t_acts;  // gated tangent output per block
  Vec<T> t_features;
  T jvp = T(0);  // equals ||∇_x D||² when seeded with v = ∇_x D
};

template <class T>
R1TangentCache<T> r1_tangent_forward(const CriticParams<T>& p,
                                     const CriticCache<T>& cache,
                                     const ImageTensor<T>& v) {
  R1TangentCache<T> tc;
  Mat<T> cur = detail::image_to_planes(v);
  int H = p.cfg.resolution, W = p.cfg.resolution;
  for (size_t bi = 0; bi < p.trunk.size(); ++bi) {
    Mat<T> cols;
    detail::im2col_3s2p1(cur, H, W, cols);
    Mat<T> u = p.trunk[bi].W * cols;
    const Mat<T>& pre = cache.preacts[bi];
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      if (pre.data()[i] < T(0)) u.data()[i] *= p.slope;
    }
    tc.t_cols.push_back(std::move(cols));
    tc.t_acts.push_back(u);
    cur = std::move(u);
    H /= 2;
    W /= 2;
  }
  tc.t_features = cur.rowwise().sum() * (T(1) / T(H * W));
  tc.jvp = (p.rf_head.W * tc.t_features)(0);  // bias has zero tangent
  return tc;
}

// Accumulates scale · d(jvp)/dθ into grads. Biases get no contribution.
template <class T>
void r1_tangent_backward(const CriticParams<T>& p, const CriticCache<T>& cache,
                         const R1TangentCache<T>& tc, T scale,
                         CriticGrads<T>& grads) {
  grads.rf_head.W.noalias() += scale * tc.t_features.transpose();

  const int n_blocks = int(p.trunk.size());
  const auto [h_last, w_last] = cache.in_size.back();
  const int hw_last = (h_last / 2) * (w_last / 2);

  Mat<T> dcur(p.rf_head.W.cols(), hw_last);
  const T inv_hw = T(1) / T(hw_last);
  for (Eigen::Index c = 0; c < dcur.rows(); ++c) {
    dcur.row(c).setConstant(scale * p.rf_head.W(0, c) * inv_hw);
  }

  for (int bi = n_blocks - 1; bi >= 0; --bi) {
    const Mat<T>& pre = cache.preacts[size_t(bi)];
    for (Eigen::Index i = 0; i < dcur.size(); ++i) {
      if (pre.data()[i] < T(0)) dcur.data()[i] *= p.slope;
    }
    grads.trunk[size_t(bi)].W.noalias() +=
        dcur * tc.t_cols[size_t(bi)].transpose();
    if (bi == 0) break;
    const Mat<T> dcols = p.trunk[size_t(bi)].W.transpose() * dcur;
    const auto [H, W] = cache.in_size[size_t(bi)];
    Mat<T> din = Mat<T>::Zero(p.trunk[size_t(bi)].in_ch, Eigen::Index(H) * W);
    detail::col2im_3s2p1_acc(dcols, H, W, din);
    dcur = std::move(din);
  }
}

template <class T>
void collect_tensors(CriticParams<T>& p, std::vector<TensorRef<T>>& out) {
  for (size_t i = 0; i < p.trunk.size(); ++i) {
    const std::string prefix = "trunk." + std::to_string(i);
    out.push_back({prefix + ".w", p.trunk[i].W.data(), p.trunk[i].W.rows(),
                   p.trunk[i].W.cols()});
    out.push_back({prefix + ".b", p.trunk[i].b.data(), p.trunk[i].b.size(), 1});
  }
  collect_tensors(p.rf_head, "rf", out);
  collect_tensors(p.cls_head, "cls", out);
}

template <class T>
void collect_tensors(CriticGrads<T>& g, std::vector<TensorRef<T>>& out) {
  for (size_t i = 0; i < g.trunk.size(); ++i) {
    const std::string prefix = "trunk." + std::to_string(i);
    out.push_back({prefix + ".w", g.trunk[i].W.data(), g.trunk[i].W.rows(),
                   g.trunk[i].W.cols()});
    out.push_back({prefix + ".b", g.trunk[i].b.data(), g.trunk[i].b.size(), 1});
  }
  collect_tensors(g.rf_head, "rf", out);
  collect_tensors(g.cls_head, "cls", out);
}

}  // namespace isf
