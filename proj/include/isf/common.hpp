#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace isf {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Matf = Mat<float>;
using Matd = Mat<double>;
using Vecf = Vec<float>;
using Vecd = Vec<double>;

// Error taxonomy shared across modules. The CLI maps InvalidArgument raised
// during config validation to exit code 2 and everything else to exit 3.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CorruptDataset : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidCheckpoint : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UndefinedSimilarity : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Raised when a training step produces a non-finite loss; names the term.
struct TrainingAbort : std::runtime_error {
  std::string term;
  int64_t iteration;
  TrainingAbort(std::string term_, int64_t iter, const std::string& what_)
      : std::runtime_error(what_), term(std::move(term_)), iteration(iter) {}
};

template <class T>
T sigmoid(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class T>
T leaky_relu(T x, T slope) {
  return x >= T(0) ? x : slope * x;
}

// Binary cross-entropy from a logit, stable for large |logit|:
// -y*log(sigmoid(l)) - (1-y)*log(1-sigmoid(l)) == softplus(l) - y*l.
template <class T>
T bce_from_logit(T logit, T target) {
  return softplus(logit) - target * logit;
}

// Fixed-order pairwise tree sum; used for every batch-level reduction so
// results do not depend on how per-sample work was scheduled.
template <class T>
T pairwise_sum(std::span<const T> xs) {
  const size_t n = xs.size();
  if (n == 0) return T(0);
  if (n <= 4) {
    T s = T(0);
    for (const T& x : xs) s += x;
    return s;
  }
  const size_t half = n / 2;
  return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

template <class T>
T pairwise_mean(std::span<const T> xs) {
  if (xs.empty()) throw InvalidArgument("pairwise_mean: empty range");
  return pairwise_sum(xs) / T(xs.size());
}

template <class T>
bool all_finite(const Mat<T>& m) {
  return m.allFinite();
}

template <class T>
bool all_finite(const Vec<T>& v) {
  return v.allFinite();
}

// Named flat view over one parameter tensor. Optimizer steps, serialization
// and finite-difference harnesses all walk the same ordered list of these.
template <class T>
struct TensorRef {
  std::string name;
  T* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 1;  // 1 for vectors

  Eigen::Index size() const { return rows * cols; }
};

template <class T>
Eigen::Index total_size(const std::vector<TensorRef<T>>& refs) {
  Eigen::Index n = 0;
  for (const auto& r : refs) n += r.size();
  return n;
}

template <class T>
Vec<T> flatten_tensors(const std::vector<TensorRef<T>>& refs) {
  Vec<T> out(total_size(refs));
  Eigen::Index at = 0;
  for (const auto& r : refs) {
    for (Eigen::Index i = 0; i < r.size(); ++i) out[at++] = r.data[i];
  }
  return out;
}

template <class T>
void unflatten_tensors(const Vec<T>& flat,
                       const std::vector<TensorRef<T>>& refs) {
  if (flat.size() != total_size(refs)) {
    throw InvalidArgument("unflatten_tensors: size mismatch");
  }
  Eigen::Index at = 0;
  for (const auto& r : refs) {
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data[i] = flat[at++];
  }
}

}  // namespace isf
