#pragma once

#include <optional>
#include <span>
#include <vector>

#include "isf/critic.hpp"
#include "isf/handles.hpp"
#include "isf/types.hpp"

namespace isf {

template <class T>
struct LossWeights {
  T rf = T(1);
  T cls = T(1);
  T cont = T(1);
  T nb = T(0.1);
  T cyc = T(1);
  T ds = T(2.0);  // initial diversity weight, decayed to zero

  void validate() const {
    if (rf < T(0) || cls < T(0) || cont < T(0) || nb < T(0) || cyc < T(0) ||
        ds < T(0)) {
      throw InvalidArgument("loss weights must be non-negative");
    }
  }
};

// Per-term scalar values of one iteration, in the shape of the JSONL log
// schema: {iter, L_rf_D, L_rf_M, L_cls_D, L_cls_M, L_cont, L_nb, L_cyc,
// L_ds, total_M, total_D, ds_weight}.
template <class T>
struct LossReport {
  int64_t iteration = 0;
  T rf_critic = T(0);
  T rf_mapper = T(0);
  T cls_critic = T(0);
  T cls_mapper = T(0);
  T cont = T(0);
  T nb = T(0);
  T cyc = T(0);
  T ds = T(0);
  T ds_weight = T(0);
  T total_mapper = T(0);
  T total_critic = T(0);
};

// linear decay of the diversity weight to zero over the training horizon
template <class T>
T ds_weight(int64_t iteration, int64_t total_iterations, T lambda_ds_init) {
  if (total_iterations <= 0) {
    throw InvalidArgument("ds_weight: total_iterations must be positive");
  }
  if (iteration < 0) throw InvalidArgument("ds_weight: negative iteration");
  const T w =
      lambda_ds_init * (T(1) - T(double(iteration) / double(total_iterations)));
  return std::max(w, T(0));
}

// Non-saturating critic loss plus R1 penalty on the real branch:
//   mean softplus(-real) + mean softplus(fake)
//   + (r1_gamma/2) · mean ||∇_x D_rf(x_real)||².
template <class T>
T adv_loss_critic(std::span<const T> real_logits, std::span<const T> fake_logits,
                  std::span<const ImageTensor<T>> real_images,
                  const CriticParams<T>& critic, T r1_gamma) {
  std::vector<T> terms;
  terms.reserve(real_logits.size());
  for (T l : real_logits) {
    if (!std::isfinite(l)) throw NumericError("adv_loss_critic: real logit");
    terms.push_back(softplus(-l));
  }
  T loss = pairwise_mean(std::span<const T>(terms));

  terms.clear();
  for (T l : fake_logits) {
    if (!std::isfinite(l)) throw NumericError("adv_loss_critic: fake logit");
    terms.push_back(softplus(l));
  }
  loss += pairwise_mean(std::span<const T>(terms));

  if (r1_gamma > T(0) && !real_images.empty()) {
    terms.clear();
    for (const auto& img : real_images) {
      const CriticCache<T> cache = critic_forward(critic, img);
      const ImageTensor<T> g = critic_input_grad(critic, cache);
      T sq = T(0);
      for (T v : g.pixels) sq += v * v;
      terms.push_back(sq);
    }
    loss += (r1_gamma / T(2)) * pairwise_mean(std::span<const T>(terms));
  }
  if (!std::isfinite(loss)) throw NumericError("adv_loss_critic: non-finite");
  return loss;
}

// non-saturating generator-side loss, mean softplus(-fake_logit)
template <class T>
T adv_loss_mapper(std::span<const T> fake_logits) {
  std::vector<T> terms;
  terms.reserve(fake_logits.size());
  for (T l : fake_logits) {
    if (!std::isfinite(l)) throw NumericError("adv_loss_mapper: logit");
    terms.push_back(softplus(-l));
  }
  const T loss = pairwise_mean(std::span<const T>(terms));
  if (!std::isfinite(loss)) throw NumericError("adv_loss_mapper: non-finite");
  return loss;
}

// mean per-attribute sigmoid binary cross-entropy against targets in [0,1]
template <class T>
T multilabel_bce(const Vec<T>& logits, const Vec<T>& targets) {
  if (logits.size() != targets.size()) {
    throw InvalidArgument("multilabel_bce: length mismatch");
  }
  std::vector<T> terms(size_t(logits.size()));
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (!(targets[i] >= T(0) && targets[i] <= T(1))) {
      throw InvalidArgument("multilabel_bce: target outside [0,1]");
    }
    terms[size_t(i)] = bce_from_logit(logits[i], targets[i]);
  }
  return pairwise_mean(std::span<const T>(terms));
}

template <class T>
T cls_loss_critic(const Vec<T>& cls_logits, const AttributeVector<T>& d0) {
  return multilabel_bce(cls_logits, d0.values);
}

template <class T>
T cls_loss_mapper(const Vec<T>& cls_logits, const AttributeVector<T>& d) {
  return multilabel_bce(cls_logits, d.values);
}

// LPIPS-style perceptual distance: mean squared difference between
// unit-normalized embedder features of the two images.
template <class T>
T content_loss(const ImageTensor<T>& x_src, const ImageTensor<T>& x_edit,
               const Embedder<T>& perceptual,
               ImageTensor<T>* dx_src = nullptr,
               ImageTensor<T>* dx_edit = nullptr) {
  if (!x_src.same_shape(x_edit)) {
    throw InvalidArgument("content_loss: resolution mismatch");
  }
  const Vec<T> f1 = perceptual.embed(x_src);
  const Vec<T> f2 = perceptual.embed(x_edit);
  const T tiny = T(1e-12);
  const T n1 = std::max(f1.norm(), tiny);
  const T n2 = std::max(f2.norm(), tiny);
  const Vec<T> u1 = f1 / n1;
  const Vec<T> u2 = f2 / n2;
  const Vec<T> diff = u1 - u2;
  const T dim = T(f1.size());
  const T loss = diff.squaredNorm() / dim;

  auto pull = [&](const ImageTensor<T>& x, const Vec<T>& u, T n, T sign,
                  ImageTensor<T>* out) {
    if (!out) return;
    const Vec<T> dl_du = (T(2) / dim) * sign * diff;
    const Vec<T> dl_df = (dl_du - u * u.dot(dl_du)) / n;
    *out = perceptual.embed_vjp(x, dl_df);
  };
  pull(x_src, u1, n1, T(1), dx_src);
  pull(x_edit, u2, n2, T(-1), dx_edit);
  return loss;
}

// Euclidean norm of the code difference over the flattened code (unsquared)
template <class T>
T neighbour_loss(const LatentCode<T>& w, const LatentCode<T>& w_star) {
  if (w.rows() != w_star.rows() || w.cols() != w_star.cols()) {
    throw InvalidArgument("neighbour_loss: shape mismatch");
  }
  return (w.data - w_star.data).norm();
}

template <class T>
T cycle_loss(const ImageTensor<T>& x_src, const ImageTensor<T>& x_cycled) {
  if (!x_src.same_shape(x_cycled)) {
    throw InvalidArgument("cycle_loss: resolution mismatch");
  }
  return mean_abs_diff(x_src, x_cycled);
}

template <class T>
T diversity_loss(const ImageTensor<T>& x1, const ImageTensor<T>& x2) {
  if (!x1.same_shape(x2)) {
    throw InvalidArgument("diversity_loss: resolution mismatch");
  }
  return mean_abs_diff(x1, x2);
}

// Weighted objective of the style function; the diversity term enters with
// its decayed weight and a minus sign (it is maximized).
template <class T>
T total_mapper_objective(const LossReport<T>& terms, const LossWeights<T>& w,
                         int64_t iteration, int64_t total_iterations) {
  w.validate();
  const T wd = ds_weight(iteration, total_iterations, w.ds);
  const T total = w.rf * terms.rf_mapper + w.cls * terms.cls_mapper +
                  w.cont * terms.cont + w.nb * terms.nb + w.cyc * terms.cyc -
                  wd * terms.ds;
  if (!std::isfinite(total)) {
    throw NumericError("total_mapper_objective: non-finite");
  }
  return total;
}

}  // namespace isf
