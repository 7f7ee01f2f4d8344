#pragma once

#include <string>
#include <vector>

#include "isf/mlp.hpp"
#include "isf/types.hpp"

namespace isf {

// Which entries share one normalization statistic pair. `layer` is the
// default: one mean/std over the entire L×C code per sample. `per_row`
// normalizes each of the L rows independently; `per_channel` each of the C
// columns (the instance-norm style variant). The last two exist for the
// ablation harness.
enum class NormMode { layer, per_row, per_channel };

inline std::string to_string(NormMode m) {
  switch (m) {
    case NormMode::layer: return "layer";
    case NormMode::per_row: return "per_row";
    case NormMode::per_channel: return "per_channel";
  }
  return "layer";
}

inline NormMode norm_mode_from_string(const std::string& s) {
  if (s == "layer") return NormMode::layer;
  if (s == "per_row") return NormMode::per_row;
  if (s == "per_channel") return NormMode::per_channel;
  throw InvalidArgument("unknown norm mode: " + s);
}

template <class T>
struct AdalnCache {
  Mat<T> x_hat;        // normalized code
  std::vector<T> sigma;  // population std per group
  std::vector<T> scale;  // sigma + eps per group
  NormMode mode = NormMode::layer;
};

namespace detail {

template <class T, class Fn>
void for_each_group(const Mat<T>& w, NormMode mode, Fn&& fn) {
  // fn(group_index, entry_visitor) where entry_visitor iterates (i, j)
  switch (mode) {
    case NormMode::layer:
      fn(0, [&](auto&& g) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
          for (Eigen::Index j = 0; j < w.cols(); ++j) g(i, j);
        }
      });
      break;
    case NormMode::per_row:
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        fn(size_t(i), [&, i](auto&& g) {
          for (Eigen::Index j = 0; j < w.cols(); ++j) g(i, j);
        });
      }
      break;
    case NormMode::per_channel:
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        fn(size_t(j), [&, j](auto&& g) {
          for (Eigen::Index i = 0; i < w.rows(); ++i) g(i, j);
        });
      }
      break;
  }
}

template <class T>
size_t group_count(const Mat<T>& w, NormMode mode) {
  switch (mode) {
    case NormMode::layer: return 1;
    case NormMode::per_row: return size_t(w.rows());
    case NormMode::per_channel: return size_t(w.cols());
  }
  return 1;
}

}  // namespace detail

// gamma ⊙ (w - mu)/(sigma + eps) + beta, with mu/sigma the mean and
// population standard deviation over each normalization group. gamma and
// beta have length L*C and map onto the code row-major.
template <class T>
Mat<T> adaln(const Mat<T>& w, const Vec<T>& gamma, const Vec<T>& beta, T eps,
             NormMode mode = NormMode::layer, AdalnCache<T>* cache = nullptr) {
  const Eigen::Index total = w.size();
  if (gamma.size() != total || beta.size() != total) {
    throw InvalidArgument("adaln: gamma/beta length mismatch");
  }
  if (eps < T(0)) throw InvalidArgument("adaln: eps must be non-negative");

  Mat<T> x_hat(w.rows(), w.cols());
  const size_t n_groups = detail::group_count(w, mode);
  std::vector<T> sigmas(n_groups), scales(n_groups);

  detail::for_each_group(w, mode, [&](size_t g, auto&& visit) {
    T sum = T(0);
    Eigen::Index count = 0;
    visit([&](Eigen::Index i, Eigen::Index j) {
      sum += w(i, j);
      ++count;
    });
    const T mu = sum / T(count);
    T sq = T(0);
    visit([&](Eigen::Index i, Eigen::Index j) {
      const T d = w(i, j) - mu;
      sq += d * d;
    });
    const T sigma = std::sqrt(sq / T(count));
    const T scale = sigma + eps;
    sigmas[g] = sigma;
    scales[g] = scale;
    visit([&](Eigen::Index i, Eigen::Index j) {
      // scale can only vanish for a constant group with eps == 0, where the
      // centered value is zero anyway
      x_hat(i, j) = scale > T(0) ? (w(i, j) - mu) / scale : T(0);
    });
  });

  Mat<T> out(w.rows(), w.cols());
  const Eigen::Index C = w.cols();
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < C; ++j) {
      const Eigen::Index f = i * C + j;
      out(i, j) = gamma[f] * x_hat(i, j) + beta[f];
    }
  }
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->sigma = std::move(sigmas);
    cache->scale = std::move(scales);
    cache->mode = mode;
  }
  return out;
}

// Backward of adaln w.r.t. the code and gamma/beta. dgamma/dbeta are
// accumulated; the returned matrix is dL/dw.
template <class T>
Mat<T> adaln_backward(const Mat<T>& dy, const Vec<T>& gamma,
                      const AdalnCache<T>& cache, Vec<T>& dgamma,
                      Vec<T>& dbeta) {
  const Eigen::Index C = cache.x_hat.cols();
  Mat<T> dw(cache.x_hat.rows(), C);

  detail::for_each_group(cache.x_hat, cache.mode, [&](size_t g, auto&& visit) {
    const T scale = cache.scale[g];
    const T sigma = cache.sigma[g];
    T sum_gv = T(0), sum_gvx = T(0);
    Eigen::Index count = 0;
    visit([&](Eigen::Index i, Eigen::Index j) {
      const Eigen::Index f = i * C + j;
      const T gv = dy(i, j) * gamma[f];
      sum_gv += gv;
      sum_gvx += gv * cache.x_hat(i, j);
      ++count;
    });
    const T mean_gv = sum_gv / T(count);
    // at sigma == 0 the normalized entries are all zero; drop the term
    const T proj = sigma > T(0) ? sum_gvx / (T(count) * sigma) : T(0);
    visit([&](Eigen::Index i, Eigen::Index j) {
      const Eigen::Index f = i * C + j;
      const T gv = dy(i, j) * gamma[f];
      dw(i, j) = scale > T(0)
                     ? (gv - mean_gv) / scale - cache.x_hat(i, j) * proj
                     : T(0);
      dgamma[f] += dy(i, j) * cache.x_hat(i, j);
      dbeta[f] += dy(i, j);
    });
  });
  return dw;
}

struct IsfDims {
  int L = 4;
  int C = 16;
  int m = 4;       // attribute count
  int n = 32;      // noise dim
  int hidden = 256;
  int depth = 2;   // hidden layers in each of f1 and f2

  int code_size() const { return L * C; }
};

// All learnable parameters of the style function M(w, z, d) -> w*:
//   h = f1(d ⊕ z); (gamma, beta) = affine(h); w* = x̂ + f2(x̂),
// with x̂ = adaln(w, gamma, beta). gamma is parameterized as 1 + raw affine
// output and the f2 output layer starts at zero, so a fresh net is the
// identity on the normalized code.
template <class T>
struct IsfParams {
  IsfDims dims;
  Mlp<T> f1;       // (m+n) -> hidden (x depth), activation after each layer
  Linear<T> affine;  // hidden -> 2*L*C
  Mlp<T> f2;       // L*C -> hidden (x depth) -> L*C, linear output
  NormMode norm_mode = NormMode::layer;
  T eps = T(1e-8);
};

template <class T>
IsfParams<T> init_isf_params(const IsfDims& dims, Rng& rng,
                             NormMode mode = NormMode::layer) {
  if (dims.L < 1 || dims.C < 1 || dims.m < 1 || dims.n < 1 ||
      dims.hidden < 1 || dims.depth < 1) {
    throw InvalidArgument("init_isf_params: dimensions must be positive");
  }
  IsfParams<T> p;
  p.dims = dims;
  p.norm_mode = mode;

  p.f1.activate_last = true;
  Eigen::Index in = dims.m + dims.n;
  for (int i = 0; i < dims.depth; ++i) {
    p.f1.layers.push_back(he_uniform_linear<T>(dims.hidden, in, rng));
    in = dims.hidden;
  }

  p.affine.set_zero(2 * dims.code_size(), dims.hidden);

  p.f2.activate_last = false;
  in = dims.code_size();
  for (int i = 0; i < dims.depth; ++i) {
    p.f2.layers.push_back(he_uniform_linear<T>(dims.hidden, in, rng));
    in = dims.hidden;
  }
  Linear<T> out_layer;
  out_layer.set_zero(dims.code_size(), dims.hidden);
  p.f2.layers.push_back(std::move(out_layer));
  return p;
}

inline int64_t isf_param_count(const IsfDims& d) {
  const int64_t lc = d.code_size();
  int64_t count = 0;
  int64_t in = d.m + d.n;
  for (int i = 0; i < d.depth; ++i) {
    count += in * d.hidden + d.hidden;
    in = d.hidden;
  }
  count += int64_t(d.hidden) * 2 * lc + 2 * lc;  // affine
  in = lc;
  for (int i = 0; i < d.depth; ++i) {
    count += in * d.hidden + d.hidden;
    in = d.hidden;
  }
  count += int64_t(d.hidden) * lc + lc;  // f2 output layer
  return count;
}

// Single linear map from the conditioning feature h to (gamma, beta).
template <class T>
std::pair<Vec<T>, Vec<T>> style_affine(const Vec<T>& h,
                                       const IsfParams<T>& p) {
  if (h.size() != p.affine.W.cols()) {
    throw InvalidArgument("style_affine: conditioning width mismatch");
  }
  const Vec<T> raw = p.affine.apply(h);
  const Eigen::Index lc = p.dims.code_size();
  Vec<T> gamma = raw.head(lc);
  gamma.array() += T(1);
  Vec<T> beta = raw.tail(lc);
  return {std::move(gamma), std::move(beta)};
}

template <class T>
struct IsfCache {
  Vec<T> cond_in;  // d ⊕ z
  MlpCache<T> f1;
  Vec<T> h;
  Vec<T> gamma, beta;
  AdalnCache<T> adaln;
  Mat<T> x_hat_affine;  // adaln output (normalized + styled)
  MlpCache<T> f2;
};

template <class T>
LatentCode<T> isf_forward(const LatentCode<T>& w, const NoiseVector<T>& z,
                          const AttributeVector<T>& d, const IsfParams<T>& p,
                          IsfCache<T>* cache = nullptr) {
  const auto& dims = p.dims;
  if (w.rows() != dims.L || w.cols() != dims.C) {
    throw InvalidArgument("isf_forward: latent shape mismatch");
  }
  if (z.size() != dims.n) {
    throw InvalidArgument("isf_forward: noise length mismatch");
  }
  if (d.size() != dims.m) {
    throw InvalidArgument("isf_forward: attribute length mismatch");
  }

  Vec<T> cond(dims.m + dims.n);
  cond.head(dims.m) = d.values;
  cond.tail(dims.n) = z.values;

  MlpCache<T> f1_cache;
  const Vec<T> h = mlp_forward(p.f1, cond, cache ? &f1_cache : nullptr);
  auto [gamma, beta] = style_affine(h, p);

  AdalnCache<T> ad_cache;
  Mat<T> styled = adaln(w.data, gamma, beta, p.eps, p.norm_mode,
                        cache ? &ad_cache : nullptr);

  const Eigen::Map<const Vec<T>> styled_flat(styled.data(), styled.size());
  MlpCache<T> f2_cache;
  const Vec<T> res =
      mlp_forward(p.f2, Vec<T>(styled_flat), cache ? &f2_cache : nullptr);

  LatentCode<T> out(dims.L, dims.C);
  out.flat() = styled_flat + res;

  if (cache) {
    cache->cond_in = std::move(cond);
    cache->f1 = std::move(f1_cache);
    cache->h = h;
    cache->gamma = std::move(gamma);
    cache->beta = std::move(beta);
    cache->adaln = std::move(ad_cache);
    cache->x_hat_affine = std::move(styled);
    cache->f2 = std::move(f2_cache);
  }
  return out;
}

template <class T>
struct IsfGrads {
  MlpGrads<T> f1;
  Linear<T> affine;
  MlpGrads<T> f2;
};

template <class T>
IsfGrads<T> zero_isf_grads(const IsfParams<T>& p) {
  IsfGrads<T> g;
  g.f1 = zero_grads(p.f1);
  g.affine.set_zero(p.affine.W.rows(), p.affine.W.cols());
  g.f2 = zero_grads(p.f2);
  return g;
}

// Accumulates parameter gradients; returns dL/dw. dL/d(d⊕z) is discarded —
// the noise and target are training inputs, never optimized.
template <class T>
Mat<T> isf_backward(const IsfParams<T>& p, const IsfCache<T>& cache,
                    const Mat<T>& dwstar, IsfGrads<T>& grads) {
  const Eigen::Index lc = p.dims.code_size();
  const Eigen::Map<const Vec<T>> dout_flat(dwstar.data(), dwstar.size());

  // residual: w* = styled + f2(styled)
  const Vec<T> dres = dout_flat;
  Vec<T> dstyled_flat = mlp_backward(p.f2, cache.f2, dres, grads.f2);
  dstyled_flat += dout_flat;

  const Eigen::Map<const Mat<T>> dstyled(dstyled_flat.data(), dwstar.rows(),
                                         dwstar.cols());

  Vec<T> dgamma = Vec<T>::Zero(lc);
  Vec<T> dbeta = Vec<T>::Zero(lc);
  Mat<T> dw = adaln_backward(Mat<T>(dstyled), cache.gamma, cache.adaln,
                             dgamma, dbeta);

  Vec<T> draw(2 * lc);
  draw.head(lc) = dgamma;  // gamma = 1 + raw ⇒ pass-through
  draw.tail(lc) = dbeta;

  grads.affine.W.noalias() += draw * cache.h.transpose();
  grads.affine.b += draw;
  const Vec<T> dh = p.affine.W.transpose() * draw;

  mlp_backward(p.f1, cache.f1, dh, grads.f1);
  return dw;
}

template <class T>
void collect_tensors(IsfParams<T>& p, std::vector<TensorRef<T>>& out) {
  collect_tensors(p.f1, "f1", out);
  collect_tensors(p.affine, "affine", out);
  collect_tensors(p.f2, "f2", out);
}

template <class T>
void collect_tensors(IsfGrads<T>& g, std::vector<TensorRef<T>>& out) {
  collect_tensors(g.f1, "f1", out);
  collect_tensors(g.affine, "affine", out);
  collect_tensors(g.f2, "f2", out);
}

}  // namespace isf
