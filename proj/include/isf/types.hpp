#pragma once

#include <utility>
#include <vector>

#include "isf/common.hpp"
#include "isf/rng.hpp"

namespace isf {

// A point in the generator's style space, an L×C real matrix.
template <class T>
struct LatentCode {
  Mat<T> data;

  LatentCode() = default;
  explicit LatentCode(Mat<T> m) : data(std::move(m)) {}
  LatentCode(Eigen::Index rows, Eigen::Index cols)
      : data(Mat<T>::Zero(rows, cols)) {}

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index cols() const { return data.cols(); }
  Eigen::Index size() const { return data.size(); }

  Eigen::Map<const Vec<T>> flat() const {
    return Eigen::Map<const Vec<T>>(data.data(), data.size());
  }
  Eigen::Map<Vec<T>> flat() {
    return Eigen::Map<Vec<T>>(data.data(), data.size());
  }
};

// Semantic attribute vector in [0,1]^m. Continuous classifier probabilities
// are kept as-is; binarize() is applied only where a hard label is needed.
template <class T>
struct AttributeVector {
  Vec<T> values;

  AttributeVector() = default;
  explicit AttributeVector(Vec<T> v) : values(std::move(v)) { check(); }

  void check() const {
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      if (!(values[i] >= T(0) && values[i] <= T(1))) {
        throw InvalidArgument("AttributeVector: entry outside [0,1]");
      }
    }
  }

  Eigen::Index size() const { return values.size(); }

  AttributeVector binarized(T threshold = T(0.5)) const {
    Vec<T> b(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      b[i] = values[i] > threshold ? T(1) : T(0);
    }
    return AttributeVector(std::move(b));
  }
};

template <class T>
struct NoiseVector {
  Vec<T> values;

  NoiseVector() = default;
  explicit NoiseVector(Vec<T> v) : values(std::move(v)) {}

  Eigen::Index size() const { return values.size(); }
};

// n i.i.d. standard normal draws; advances the rng stream deterministically.
template <class T>
NoiseVector<T> sample_noise(Eigen::Index n, Rng& rng) {
  if (n < 1) throw InvalidArgument("sample_noise: n must be >= 1");
  Vec<T> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = T(rng.normal());
  return NoiseVector<T>(std::move(v));
}

// H×W×3 image with values in [-1,1], stored row-major interleaved (y, x, c).
template <class T>
struct ImageTensor {
  int height = 0;
  int width = 0;
  std::vector<T> pixels;  // height*width*3

  ImageTensor() = default;
  ImageTensor(int h, int w)
      : height(h), width(w), pixels(size_t(h) * size_t(w) * 3, T(0)) {}

  T& at(int y, int x, int c) {
    return pixels[(size_t(y) * width + size_t(x)) * 3 + size_t(c)];
  }
  T at(int y, int x, int c) const {
    return pixels[(size_t(y) * width + size_t(x)) * 3 + size_t(c)];
  }

  size_t size() const { return pixels.size(); }

  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width;
  }

  T max_abs() const {
    T m = T(0);
    for (T p : pixels) m = std::max(m, std::abs(p));
    return m;
  }
};

template <class T>
Vec<T> flatten(const ImageTensor<T>& img) {
  return Eigen::Map<const Vec<T>>(img.pixels.data(),
                                  Eigen::Index(img.pixels.size()));
}

// mean absolute pixel difference; shared by cycle and diversity losses
template <class T>
T mean_abs_diff(const ImageTensor<T>& a, const ImageTensor<T>& b) {
  if (!a.same_shape(b)) throw InvalidArgument("mean_abs_diff: shape mismatch");
  T acc = T(0);
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    acc += std::abs(a.pixels[i] - b.pixels[i]);
  }
  return acc / T(a.pixels.size());
}

}  // namespace isf
