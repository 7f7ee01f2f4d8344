#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "isf/handles.hpp"
#include "isf/isf_net.hpp"
#include "isf/objectives.hpp"

namespace isf {

// Equidistant latent path s_0..s_T with its endpoint provenance.
template <class T>
struct InterpolationPath {
  std::vector<LatentCode<T>> codes;
  LatentCode<T> source, target;
  int attribute_edited = -1;  // -1 when the edit is not attribute-tagged

  Eigen::Index steps() const { return Eigen::Index(codes.size()) - 1; }
};

template <class T>
struct MetricsReport {
  std::map<std::string, double> values;
  nlohmann::json metadata;

  nlohmann::json to_json() const {
    nlohmann::json v(values);
    return {{"values", v}, {"metadata", metadata}};
  }
};

// cosine similarity between identity-embedder features of two images
template <class T>
double frs(const ImageTensor<T>& x1, const ImageTensor<T>& x2,
           const Embedder<T>& identity) {
  const Vecd e1 = identity.embed(x1).template cast<double>();
  const Vecd e2 = identity.embed(x2).template cast<double>();
  const double n1 = e1.norm(), n2 = e2.norm();
  if (n1 == 0.0 || n2 == 0.0) {
    throw UndefinedSimilarity("frs: zero-norm identity embedding");
  }
  return e1.dot(e2) / (n1 * n2);
}

template <class T>
LatentCode<T> lerp_code(const LatentCode<T>& a, const LatentCode<T>& b, T t) {
  LatentCode<T> out(a.rows(), a.cols());
  out.data = a.data + t * (b.data - a.data);
  return out;
}

// Expected scaled perceptual change under an epsilon-step along latent
// interpolations; the distance is the squared Euclidean norm between raw
// embedder features. One t ~ U(0,1) per endpoint pair per pass.
template <class T>
double ppl(std::span<const std::pair<LatentCode<T>, LatentCode<T>>> pairs,
           const Generator<T>& gen, const Embedder<T>& embedder, double epsilon,
           Rng& rng) {
  if (!(epsilon > 0.0)) throw InvalidArgument("ppl: epsilon must be positive");
  if (pairs.empty()) throw InvalidArgument("ppl: no endpoint pairs");

  std::vector<double> terms;
  terms.reserve(pairs.size());
  for (const auto& [s, s_star] : pairs) {
    const double t = rng.uniform();
    const auto a = lerp_code(s, s_star, T(t));
    const auto b = lerp_code(s, s_star, T(t + epsilon));
    const Vecd fa = embedder.embed(gen.generate(a)).template cast<double>();
    const Vecd fb = embedder.embed(gen.generate(b)).template cast<double>();
    terms.push_back((fa - fb).squaredNorm() / (epsilon * epsilon));
  }
  return pairwise_mean(std::span<const double>(terms));
}

// Normalized spread of consecutive perceptual increments along a path.
inline double pir_from_distances(std::span<const double> consecutive,
                                 double endpoint_distance, double eps_stab) {
  if (consecutive.size() < 2) {
    throw InvalidArgument("pir: need at least two consecutive distances");
  }
  if (eps_stab < 0.0) throw InvalidArgument("pir: eps_stab must be >= 0");
  double lo = consecutive[0], hi = consecutive[0];
  for (double d : consecutive) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  const double denom = endpoint_distance + eps_stab;
  if (denom == 0.0) return 0.0;
  return (hi - lo) / denom;
}

// Image-space PIR: perceptual distances between consecutive generated
// frames, normalized by the direct distance between the endpoint images.
template <class T>
double pir(const InterpolationPath<T>& path, const Generator<T>& gen,
           const Embedder<T>& perceptual, double eps_stab) {
  if (path.codes.size() < 3) {
    throw InvalidArgument("pir: path must have T >= 2 segments");
  }
  std::vector<ImageTensor<T>> frames;
  frames.reserve(path.codes.size());
  for (const auto& c : path.codes) frames.push_back(gen.generate(c));

  std::vector<double> phis;
  phis.reserve(frames.size() - 1);
  for (size_t i = 1; i < frames.size(); ++i) {
    phis.push_back(double(content_loss(frames[i - 1], frames[i], perceptual)));
  }
  const double endpoint =
      double(content_loss(frames.front(), frames.back(), perceptual));
  return pir_from_distances(std::span<const double>(phis), endpoint, eps_stab);
}

// Mean pairwise perceptual distance across edits of one input under
// independent noise, averaged over inputs.
template <class T>
double diversity_score(
    std::span<const std::pair<LatentCode<T>, AttributeVector<T>>> inputs,
    const Generator<T>& gen, const IsfParams<T>& mapper,
    const Embedder<T>& perceptual, int n_samples, Rng& rng) {
  if (inputs.empty()) throw InvalidArgument("diversity_score: no inputs");
  if (n_samples < 2) {
    throw InvalidArgument("diversity_score: need at least two samples");
  }

  std::vector<double> per_input;
  per_input.reserve(inputs.size());
  for (const auto& [w, d] : inputs) {
    std::vector<ImageTensor<T>> edits;
    edits.reserve(size_t(n_samples));
    for (int k = 0; k < n_samples; ++k) {
      const auto z = sample_noise<T>(mapper.dims.n, rng);
      edits.push_back(gen.generate(isf_forward(w, z, d, mapper)));
    }
    std::vector<double> pair_terms;
    pair_terms.reserve(size_t(n_samples) * (n_samples - 1) / 2);
    for (int i = 0; i < n_samples; ++i) {
      for (int j = i + 1; j < n_samples; ++j) {
        pair_terms.push_back(
            double(content_loss(edits[size_t(i)], edits[size_t(j)], perceptual)));
      }
    }
    per_input.push_back(pairwise_mean(std::span<const double>(pair_terms)));
  }
  return pairwise_mean(std::span<const double>(per_input));
}

// Fréchet distance between Gaussian fits of two feature sets. Covariances
// use the unbiased estimator; the matrix square root comes from the
// eigendecomposition of the symmetrized product with negative eigenvalues
// clamped at zero.
inline double frechet_distance(const Matd& features_a, const Matd& features_b) {
  if (features_a.rows() < 2 || features_b.rows() < 2) {
    throw InvalidArgument("frechet_distance: need at least two vectors per set");
  }
  if (features_a.cols() != features_b.cols()) {
    throw InvalidArgument("frechet_distance: feature dimension mismatch");
  }

  const auto moments = [](const Matd& f) {
    const Vecd mu = f.colwise().mean();
    const Matd centered = f.rowwise() - mu.transpose();
    const Matd cov =
        (centered.transpose() * centered) / double(f.rows() - 1);
    return std::make_pair(mu, cov);
  };
  const auto [mu_a, cov_a] = moments(features_a);
  const auto [mu_b, cov_b] = moments(features_b);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_a(
      Eigen::MatrixXd((cov_a + cov_a.transpose()) / 2.0));
  Eigen::VectorXd ev = es_a.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd sqrt_a = es_a.eigenvectors() *
                                 ev.cwiseSqrt().asDiagonal() *
                                 es_a.eigenvectors().transpose();

  Eigen::MatrixXd prod = sqrt_a * cov_b * sqrt_a;
  prod = (prod + prod.transpose()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_p(prod);
  const double tr_sqrt = es_p.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double fd = (mu_a - mu_b).squaredNorm() + cov_a.trace() +
                    cov_b.trace() - 2.0 * tr_sqrt;
  return fd;
}

template <class T>
Matd stack_features(const std::vector<Vec<T>>& feats) {
  if (feats.empty()) throw InvalidArgument("stack_features: empty set");
  Matd out(Eigen::Index(feats.size()), feats[0].size());
  for (size_t i = 0; i < feats.size(); ++i) {
    if (feats[i].size() != out.cols()) {
      throw InvalidArgument("stack_features: ragged feature set");
    }
    out.row(Eigen::Index(i)) = feats[i].template cast<double>().transpose();
  }
  return out;
}

// One evaluated edit: the produced image, the requested target bits, and
// which attributes the edit actually asked to change.
template <class T>
struct EditEval {
  ImageTensor<T> image;
  AttributeVector<T> target;
  std::vector<bool> requested;
};

struct AccuracyReport {
  Vecd per_attribute;  // NaN where no edit requested that attribute
  double mean_accuracy = 0.0;
};

// Fraction of requested attribute changes the classifier confirms, per
// attribute; mAcc averages over attributes that received requests.
template <class T>
AccuracyReport attribute_accuracy(std::span<const EditEval<T>> edits,
                                  const AttributeClassifier<T>& classifier) {
  if (edits.empty()) throw InvalidArgument("attribute_accuracy: no edits");
  const int m = classifier.num_attributes();
  Vecd hits = Vecd::Zero(m), totals = Vecd::Zero(m);
  for (const auto& e : edits) {
    if (e.target.size() != m || int(e.requested.size()) != m) {
      throw InvalidArgument("attribute_accuracy: misaligned edit record");
    }
    const AttributeVector<T> probs = classifier.classify(e.image);
    for (int j = 0; j < m; ++j) {
      if (!e.requested[size_t(j)]) continue;
      totals[j] += 1.0;
      const bool predicted = probs.values[j] > T(0.5);
      const bool wanted = e.target.values[j] > T(0.5);
      if (predicted == wanted) hits[j] += 1.0;
    }
  }
  AccuracyReport report;
  report.per_attribute = Vecd::Constant(m, std::nan(""));
  double sum = 0.0;
  int counted = 0;
  for (int j = 0; j < m; ++j) {
    if (totals[j] > 0.0) {
      report.per_attribute[j] = hits[j] / totals[j];
      sum += report.per_attribute[j];
      ++counted;
    }
  }
  if (counted == 0) {
    throw InvalidArgument("attribute_accuracy: no attribute was requested");
  }
  report.mean_accuracy = sum / counted;
  return report;
}

}  // namespace isf
