#include <catch2/catch_amalgamated.hpp>

#include "isf/isf_net.hpp"
#include "isf/sha256.hpp"

using namespace isf;

namespace {

template <class T>
std::string params_digest(IsfParams<T>& p) {
  std::vector<TensorRef<T>> refs;
  collect_tensors(p, refs);
  Sha256 h;
  for (const auto& r : refs) {
    h.update(r.data, size_t(r.size()) * sizeof(T));
  }
  auto d = h.digest();
  return Sha256::hex(d);
}

IsfDims tiny_dims() {
  IsfDims d;
  d.L = 2;
  d.C = 4;
  d.m = 2;
  d.n = 3;
  d.hidden = 8;
  d.depth = 2;
  return d;
}

}  // namespace

TEST_CASE("adaln reproduces the hand-computed example", "[isf_net]") {
  Mat<double> w(1, 2);
  w << 1, 3;  // mu = 2, population sigma = 1
  Vec<double> gamma = Vec<double>::Constant(2, 2.0);
  Vec<double> beta = Vec<double>::Constant(2, 1.0);
  const Mat<double> out = adaln(w, gamma, beta, 0.0);
  REQUIRE(out(0, 0) == -1.0);
  REQUIRE(out(0, 1) == 3.0);
}

TEST_CASE("adaln is the identity on standardized codes", "[isf_net]") {
  // entries with mean 0 and population std exactly 1
  Mat<double> w(2, 2);
  w << 1, -1, 1, -1;
  const Vec<double> gamma = Vec<double>::Ones(4);
  const Vec<double> beta = Vec<double>::Zero(4);
  const Mat<double> out = adaln(w, gamma, beta, 0.0);
  REQUIRE((out - w).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("adaln on a constant code returns beta", "[isf_net]") {
  Mat<double> w = Mat<double>::Constant(2, 3, 5.0);
  Vec<double> gamma = Vec<double>::Constant(6, 2.0);
  Vec<double> beta(6);
  beta << 1, 2, 3, 4, 5, 6;
  const Mat<double> out = adaln(w, gamma, beta, 1e-5);
  for (Eigen::Index i = 0; i < 6; ++i) {
    REQUIRE(out(i / 3, i % 3) == beta[i]);
    REQUIRE(std::isfinite(out(i / 3, i % 3)));
  }
}

TEST_CASE("adaln length mismatch is rejected", "[isf_net]") {
  Mat<double> w(2, 2);
  w.setRandom();
  const Vec<double> g3 = Vec<double>::Ones(3);
  const Vec<double> b4 = Vec<double>::Zero(4);
  REQUIRE_THROWS_AS(adaln(w, g3, b4, 1e-8), InvalidArgument);
}

TEST_CASE("layer vs per-row normalization contrast", "[isf_net]") {
  const Vec<double> gamma = Vec<double>::Ones(8);
  const Vec<double> beta = Vec<double>::Zero(8);

  // rows are permutations of one multiset: per-row stats equal global stats
  Mat<double> same(2, 4);
  same << 1, 2, 3, 4, 4, 3, 2, 1;
  const Mat<double> full = adaln(same, gamma, beta, 0.0, NormMode::layer);
  const Mat<double> rows = adaln(same, gamma, beta, 0.0, NormMode::per_row);
  REQUIRE((full - rows).cwiseAbs().maxCoeff() <= 1e-12);

  // distinct row statistics: the two must differ
  Mat<double> mixed(2, 4);
  mixed << 1, 2, 3, 4, 10, 20, 30, 40;
  const Mat<double> full2 = adaln(mixed, gamma, beta, 0.0, NormMode::layer);
  const Mat<double> rows2 = adaln(mixed, gamma, beta, 0.0, NormMode::per_row);
  REQUIRE((full2 - rows2).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("normalized tensor has zero mean and unit std", "[isf_net]") {
  Rng rng(11);
  Mat<double> w(4, 16);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 3 * rng.normal();
  AdalnCache<double> cache;
  const Vec<double> ones = Vec<double>::Ones(64);
  const Vec<double> zeros = Vec<double>::Zero(64);
  adaln(w, ones, zeros, 1e-8, NormMode::layer, &cache);
  const double mean = cache.x_hat.mean();
  const double var = (cache.x_hat.array() - mean).square().mean();
  REQUIRE(std::abs(mean) <= 1e-6);
  REQUIRE(std::abs(std::sqrt(var) - 1.0) <= 1e-4);
}

TEST_CASE("zero-initialized affine yields identity scaling", "[isf_net]") {
  Rng rng(3);
  auto p = init_isf_params<double>(tiny_dims(), rng);
  Vec<double> h(8);
  for (Eigen::Index i = 0; i < 8; ++i) h[i] = rng.normal();
  const auto [gamma, beta] = style_affine(h, p);
  REQUIRE(gamma.size() == 8);
  REQUIRE(beta.size() == 8);
  REQUIRE((gamma.array() == 1.0).all());
  REQUIRE((beta.array() == 0.0).all());
}

TEST_CASE("style_affine with zero input is the bias", "[isf_net]") {
  Rng rng(5);
  auto p = init_isf_params<double>(tiny_dims(), rng);
  for (Eigen::Index i = 0; i < p.affine.b.size(); ++i) {
    p.affine.b[i] = rng.normal();
  }
  const Vec<double> h = Vec<double>::Zero(8);
  const auto [gamma, beta] = style_affine(h, p);
  const Eigen::Index lc = p.dims.code_size();
  for (Eigen::Index i = 0; i < lc; ++i) {
    REQUIRE(gamma[i] == 1.0 + p.affine.b[i]);
    REQUIRE(beta[i] == p.affine.b[lc + i]);
  }
  const Vec<double> short_h = Vec<double>::Zero(5);
  REQUIRE_THROWS_AS(style_affine(short_h, p), InvalidArgument);
}

TEST_CASE("affine output lengths follow the code size", "[isf_net]") {
  IsfDims d;
  d.L = 4;
  d.C = 16;
  Rng rng(1);
  auto p = init_isf_params<double>(d, rng);
  Vec<double> h = Vec<double>::Zero(d.hidden);
  const auto [gamma, beta] = style_affine(h, p);
  REQUIRE(gamma.size() == 64);
  REQUIRE(beta.size() == 64);
}

TEST_CASE("forward keeps the latent shape and is deterministic", "[isf_net]") {
  IsfDims d;  // L=4, C=16, m=4, n=32 defaults
  Rng rng(7);
  const auto p = init_isf_params<double>(d, rng);
  LatentCode<double> w(4, 16);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.flat()[i] = rng.normal();
  const auto z = sample_noise<double>(32, rng);
  AttributeVector<double> attrs(
      (Vec<double>(4) << 1, 0, 1, 0).finished());

  const auto a = isf_forward(w, z, attrs, p);
  const auto b = isf_forward(w, z, attrs, p);
  REQUIRE(a.rows() == 4);
  REQUIRE(a.cols() == 16);
  REQUIRE(a.data == b.data);
}

TEST_CASE("distinct noise produces distinct edits", "[isf_net]") {
  IsfDims d;
  Rng rng(13);
  auto p = init_isf_params<double>(d, rng);
  // randomize the zero-initialized layers so noise actually reaches w*
  for (Eigen::Index i = 0; i < p.affine.W.size(); ++i) {
    p.affine.W.data()[i] = 0.1 * rng.normal();
  }
  auto& last = p.f2.layers.back();
  for (Eigen::Index i = 0; i < last.W.size(); ++i) {
    last.W.data()[i] = 0.1 * rng.normal();
  }

  LatentCode<double> w(4, 16);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.flat()[i] = rng.normal();
  AttributeVector<double> attrs(
      (Vec<double>(4) << 0, 1, 0, 1).finished());

  int distinct = 0;
  for (int t = 0; t < 100; ++t) {
    const auto z1 = sample_noise<double>(32, rng);
    const auto z2 = sample_noise<double>(32, rng);
    const auto o1 = isf_forward(w, z1, attrs, p);
    const auto o2 = isf_forward(w, z2, attrs, p);
    if ((o1.data - o2.data).cwiseAbs().maxCoeff() > 0.0) ++distinct;
  }
  REQUIRE(distinct >= 99);
}

TEST_CASE("fresh parameters act as layer normalization", "[isf_net]") {
  IsfDims d;
  Rng rng(17);
  const auto p = init_isf_params<double>(d, rng);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    LatentCode<double> w(4, 16);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.flat()[i] = rng.normal();
    const auto z = sample_noise<double>(32, rng);
    AttributeVector<double> attrs((Vec<double>(4) << 1, 1, 0, 0).finished());
    const auto out = isf_forward(w, z, attrs, p);
    const Mat<double> normed =
        adaln(w.data, Vec<double>(Vec<double>::Ones(64)),
              Vec<double>(Vec<double>::Zero(64)), p.eps);
    worst = std::max(worst,
                     (out.data - normed).norm() / std::max(normed.norm(), 1e-12));
  }
  REQUIRE(worst <= 1e-6);
}

TEST_CASE("identical seeds give identical parameter digests", "[isf_net]") {
  IsfDims d;
  Rng a(23), b(23), c(24);
  auto pa = init_isf_params<float>(d, a);
  auto pb = init_isf_params<float>(d, b);
  auto pc = init_isf_params<float>(d, c);
  REQUIRE(params_digest(pa) == params_digest(pb));
  REQUIRE(params_digest(pa) != params_digest(pc));
}

TEST_CASE("parameter count matches the pinned closed form", "[isf_net]") {
  IsfDims d;  // L=4 C=16 m=4 n=32 hidden=256 depth=2
  // f1: 36*256+256 + 256*256+256 = 75264
  // affine: 256*128+128 = 32896
  // f2: 64*256+256 + 256*256+256 + 256*64+64 = 98880
  REQUIRE(isf_param_count(d) == 207040);

  Rng rng(1);
  auto p = init_isf_params<double>(d, rng);
  std::vector<TensorRef<double>> refs;
  collect_tensors(p, refs);
  REQUIRE(total_size(refs) == 207040);
}

TEST_CASE("forward rejects inconsistent shapes", "[isf_net]") {
  IsfDims d;
  Rng rng(2);
  const auto p = init_isf_params<double>(d, rng);
  LatentCode<double> w(4, 16);
  const auto z = sample_noise<double>(32, rng);
  AttributeVector<double> attrs((Vec<double>(4) << 0, 0, 1, 1).finished());

  LatentCode<double> bad_w(4, 8);
  REQUIRE_THROWS_AS(isf_forward(bad_w, z, attrs, p), InvalidArgument);
  const auto bad_z = sample_noise<double>(16, rng);
  REQUIRE_THROWS_AS(isf_forward(w, bad_z, attrs, p), InvalidArgument);
  AttributeVector<double> bad_d((Vec<double>(2) << 0, 1).finished());
  REQUIRE_THROWS_AS(isf_forward(w, z, bad_d, p), InvalidArgument);
}
