#pragma once

#include <string>

#include "isf/rng.hpp"
#include "isf/types.hpp"

namespace isf {

// Frozen pretrained generator. Parameters are immutable for the lifetime of
// the handle; param_digest() must return the same value on every call, which
// is what the trainer verifies to prove the generator was never touched.
template <class T>
class Generator {
 public:
  virtual ~Generator() = default;

  virtual std::string name() const = 0;
  virtual std::pair<int, int> latent_shape() const = 0;  // (L, C)
  virtual std::pair<int, int> resolution() const = 0;    // (H, W)

  virtual ImageTensor<T> generate(const LatentCode<T>& w) const = 0;

  // pullback of an image-space cotangent to latent space
  virtual LatentCode<T> generate_vjp(const LatentCode<T>& w,
                                     const ImageTensor<T>& dimage) const = 0;

  // draw from the generator's native latent distribution
  virtual LatentCode<T> sample_latent(Rng& rng) const = 0;

  virtual std::string param_digest() const = 0;

  void check_latent(const LatentCode<T>& w) const {
    const auto [L, C] = latent_shape();
    if (w.rows() != L || w.cols() != C) {
      throw InvalidArgument("generator: latent shape mismatch");
    }
  }
};

// Multi-label attribute classifier f: X -> [0,1]^m.
template <class T>
class AttributeClassifier {
 public:
  virtual ~AttributeClassifier() = default;

  virtual std::string name() const = 0;
  virtual int num_attributes() const = 0;
  virtual AttributeVector<T> classify(const ImageTensor<T>& x) const = 0;
};

enum class EmbedderRole { perceptual, identity };

// Fixed feature extractor. Training only ever differentiates through
// perceptual embedders; identity embedders feed similarity metrics.
template <class T>
class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual std::string name() const = 0;
  virtual EmbedderRole role() const = 0;
  virtual Vec<T> embed(const ImageTensor<T>& x) const = 0;

  virtual bool differentiable() const { return false; }
  virtual ImageTensor<T> embed_vjp(const ImageTensor<T>& /*x*/,
                                   const Vec<T>& /*dfeatures*/) const {
    throw InvalidArgument("embedder '" + name() + "' is not differentiable");
  }
};

}  // namespace isf
