#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "isf/handles.hpp"
#include "isf/params_io.hpp"

namespace isf {

// Labeled latent-code dataset: codes sampled from the generator's native
// latent distribution, labeled by running the attribute classifier on the
// generated images, split into train/test by shuffled index.
template <class T>
struct LatentDataset {
  int L = 0, C = 0, m = 0;
  Mat<T> codes;   // N x (L*C), row-major
  Mat<T> labels;  // N x m, continuous classifier probabilities
  std::vector<int64_t> train_idx, test_idx;

  std::string generator_name, generator_digest, classifier_name;
  uint64_t seed = 0;

  Eigen::Index size() const { return codes.rows(); }

  LatentCode<T> code(int64_t i) const {
    LatentCode<T> w(L, C);
    w.flat() = codes.row(i).transpose();
    return w;
  }

  AttributeVector<T> label(int64_t i) const {
    return AttributeVector<T>(labels.row(i).transpose());
  }

  void check() const {
    if (codes.rows() != labels.rows()) {
      throw CorruptDataset("dataset: codes/labels row mismatch");
    }
    if (int64_t(train_idx.size() + test_idx.size()) != codes.rows()) {
      throw CorruptDataset("dataset: split does not cover all rows");
    }
    std::vector<char> seen(size_t(codes.rows()), 0);
    for (int64_t i : train_idx) {
      if (i < 0 || i >= codes.rows() || seen[size_t(i)]) {
        throw CorruptDataset("dataset: invalid train index");
      }
      seen[size_t(i)] = 1;
    }
    for (int64_t i : test_idx) {
      if (i < 0 || i >= codes.rows() || seen[size_t(i)]) {
        throw CorruptDataset("dataset: train/test overlap");
      }
      seen[size_t(i)] = 1;
    }
  }
};

template <class T>
LatentDataset<T> build_dataset(const Generator<T>& gen,
                               const AttributeClassifier<T>& cls,
                               int64_t n_total, double split_fraction,
                               Rng& rng, uint64_t seed_meta = 0) {
  if (n_total < 2) throw InvalidArgument("build_dataset: n_total must be >= 2");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw InvalidArgument("build_dataset: split_fraction must be in (0,1)");
  }

  const auto [L, C] = gen.latent_shape();
  const int m = cls.num_attributes();
  LatentDataset<T> ds;
  ds.L = L;
  ds.C = C;
  ds.m = m;
  ds.codes.resize(n_total, Eigen::Index(L) * C);
  ds.labels.resize(n_total, m);
  ds.generator_name = gen.name();
  ds.generator_digest = gen.param_digest();
  ds.classifier_name = cls.name();
  ds.seed = seed_meta;

  for (int64_t i = 0; i < n_total; ++i) {
    const LatentCode<T> w = gen.sample_latent(rng);
    ds.codes.row(i) = w.flat().transpose();
    const AttributeVector<T> d0 = cls.classify(gen.generate(w));
    ds.labels.row(i) = d0.values.transpose();
  }

  // Fisher-Yates shuffle, then first round(f*N) rows train, rest test
  std::vector<int64_t> perm(static_cast<size_t>(n_total));
  for (int64_t i = 0; i < n_total; ++i) perm[size_t(i)] = i;
  for (int64_t i = n_total - 1; i > 0; --i) {
    const int64_t j = int64_t(rng.uniform_index(uint64_t(i + 1)));
    std::swap(perm[size_t(i)], perm[size_t(j)]);
  }
  int64_t n_train = int64_t(std::llround(split_fraction * double(n_total)));
  n_train = std::clamp<int64_t>(n_train, 1, n_total - 1);
  ds.train_idx.assign(perm.begin(), perm.begin() + n_train);
  ds.test_idx.assign(perm.begin() + n_train, perm.end());
  ds.check();
  return ds;
}

template <class T>
void save_dataset(const LatentDataset<T>& ds,
                  const std::filesystem::path& dir) {
  ds.check();
  std::filesystem::create_directories(dir);
  const std::string codes_sha = save_f32_matrix(dir / "codes.f32", ds.codes);
  const std::string labels_sha =
      save_f32_matrix(dir / "labels.f32", ds.labels);

  nlohmann::json manifest = {
      {"schema_version", kSchemaVersion},
      {"n", ds.codes.rows()},
      {"L", ds.L},
      {"C", ds.C},
      {"m", ds.m},
      {"seed", ds.seed},
      {"generator", {{"name", ds.generator_name}, {"digest", ds.generator_digest}}},
      {"classifier", {{"name", ds.classifier_name}}},
      {"split", {{"train", ds.train_idx}, {"test", ds.test_idx}}},
      {"files",
       {{"codes", {{"path", "codes.f32"}, {"sha256", codes_sha}}},
        {"labels", {{"path", "labels.f32"}, {"sha256", labels_sha}}}}}};

  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  os << manifest.dump(2) << "\n";
  os.flush();
  if (!os) {
    throw std::runtime_error("write failed: " +
                             (dir / "manifest.json").string());
  }
}

template <class T>
LatentDataset<T> load_dataset(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw CorruptDataset("missing manifest: " + dir.string());
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptDataset(std::string("bad manifest: ") + e.what());
  }

  LatentDataset<T> ds;
  try {
    const int64_t n = manifest.at("n").get<int64_t>();
    ds.L = manifest.at("L").get<int>();
    ds.C = manifest.at("C").get<int>();
    ds.m = manifest.at("m").get<int>();
    ds.seed = manifest.at("seed").get<uint64_t>();
    ds.generator_name = manifest.at("generator").at("name").get<std::string>();
    ds.generator_digest =
        manifest.at("generator").at("digest").get<std::string>();
    ds.classifier_name =
        manifest.at("classifier").at("name").get<std::string>();
    ds.train_idx =
        manifest.at("split").at("train").get<std::vector<int64_t>>();
    ds.test_idx = manifest.at("split").at("test").get<std::vector<int64_t>>();

    const auto& files = manifest.at("files");
    ds.codes = load_f32_matrix<T>(
        dir / files.at("codes").at("path").get<std::string>(), n,
        Eigen::Index(ds.L) * ds.C,
        files.at("codes").at("sha256").get<std::string>());
    ds.labels = load_f32_matrix<T>(
        dir / files.at("labels").at("path").get<std::string>(), n, ds.m,
        files.at("labels").at("sha256").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw CorruptDataset(std::string("manifest field error: ") + e.what());
  }
  ds.check();
  return ds;
}

}  // namespace isf
