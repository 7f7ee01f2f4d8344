#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include "isf/editing.hpp"
#include "isf/evaluation.hpp"
#include "isf/toy.hpp"

using namespace isf;

namespace {

std::shared_ptr<const ToyStack> shared_stack() {
  static auto stack = std::make_shared<const ToyStack>(ToyStack::Config{});
  return stack;
}

template <class T>
LatentCode<T> code_from_coords(const ToyStack& stack, const Vecd& attr,
                               const Vecd& content) {
  const Vecd wf = stack.attr_rows().transpose() * attr +
                  stack.content_rows().transpose() * content;
  LatentCode<T> w(stack.config().L, stack.config().C);
  w.flat() = wf.cast<T>();
  return w;
}

// classifier emitting seeded coin flips, for the chance-level baseline
class CoinClassifier final : public AttributeClassifier<double> {
 public:
  explicit CoinClassifier(int m) : m_(m), rng_(991) {}
  std::string name() const override { return "coin"; }
  int num_attributes() const override { return m_; }
  AttributeVector<double> classify(const ImageTensor<double>&) const override {
    Vec<double> p(m_);
    for (int j = 0; j < m_; ++j) p[j] = rng_.coin() ? 0.9 : 0.1;
    return AttributeVector<double>(std::move(p));
  }

 private:
  int m_;
  mutable Rng rng_;
};

}  // namespace

TEST_CASE("frs self-similarity and antipodal embeddings", "[metrics]") {
  const auto stack = shared_stack();
  ToyGenerator<double> gen(stack);
  ToyIdentityEmbedder<double> emb(stack);
  const auto w = code_from_coords<double>(
      *stack, Vecd::Zero(4),
      (Vecd(8) << 1, -1, .5, .2, -.3, .7, -.6, .4).finished());
  const auto x = gen.generate(w);
  REQUIRE(std::abs(frs(x, x, emb) - 1.0) <= 1e-6);

  // negated content flips every basis projection
  const auto w_neg = code_from_coords<double>(
      *stack, Vecd::Zero(4),
      (Vecd(8) << -1, 1, -.5, -.2, .3, -.7, .6, -.4).finished());
  const auto x_neg = gen.generate(w_neg);
  REQUIRE(frs(x, x_neg, emb) <= -0.99);

  const ImageTensor<double> zero(32, 32);
  REQUIRE_THROWS_AS(frs(x, zero, emb), UndefinedSimilarity);
}

TEST_CASE("frs separates shared from independent content", "[metrics]") {
  const auto stack = shared_stack();
  ToyGenerator<double> gen(stack);
  ToyIdentityEmbedder<double> emb(stack);
  Rng rng(7);

  // attribute-only edits keep identity
  for (int t = 0; t < 50; ++t) {
    Vecd attr1(4), attr2(4), content(8);
    for (int i = 0; i < 4; ++i) attr1[i] = 0.8 * rng.uniform() - 0.4;
    for (int i = 0; i < 4; ++i) attr2[i] = 0.8 * rng.uniform() - 0.4;
    do {
      for (int i = 0; i < 8; ++i) content[i] = 0.35 * (2 * rng.uniform() - 1);
    } while (content.norm() < 0.25);
    const auto a =
        gen.generate(code_from_coords<double>(*stack, attr1, content));
    const auto b =
        gen.generate(code_from_coords<double>(*stack, attr2, content));
    REQUIRE(frs(a, b, emb) >= 0.99);
  }

  // Independent content decorrelates. Small coordinates keep tanh in its
  // linear regime so the embedding directions are uniform; the population
  // mean of |cos| in 8 dimensions is 0.291, close under the 0.3 bound, so
  // the rng seed matters.
  Rng cross_rng(9);
  std::vector<double> cross;
  for (int t = 0; t < 200; ++t) {
    Vecd c1(8), c2(8);
    for (int i = 0; i < 8; ++i) {
      c1[i] = 0.4 * cross_rng.normal();
      c2[i] = 0.4 * cross_rng.normal();
    }
    const auto a =
        gen.generate(code_from_coords<double>(*stack, Vecd::Zero(4), c1));
    const auto b =
        gen.generate(code_from_coords<double>(*stack, Vecd::Zero(4), c2));
    cross.push_back(std::abs(frs(a, b, emb)));
  }
  REQUIRE(pairwise_mean(std::span<const double>(cross)) <= 0.3);
}

TEST_CASE("ppl vanishes on constant paths", "[metrics]") {
  IdentityGenerator<double> gen(4, 12);
  PixelEmbedder<double> emb;
  Rng rng(11);
  const auto s = gen.sample_latent(rng);
  std::vector<std::pair<LatentCode<double>, LatentCode<double>>> pairs{{s, s}};
  REQUIRE(ppl(std::span<const std::pair<LatentCode<double>, LatentCode<double>>>(
                  pairs),
              gen, emb, 1e-4, rng) == 0.0);
}

TEST_CASE("ppl closed form under the identity pipeline", "[metrics]") {
  // with image == code and features == pixels the squared feature step is
  // epsilon^2 ||s* - s||^2 for every t and epsilon
  IdentityGenerator<double> gen(4, 12);
  PixelEmbedder<double> emb;
  Rng rng(13);
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    LatentCode<double> s(4, 12), t(4, 12);
    for (Eigen::Index i = 0; i < 48; ++i) {
      s.flat()[i] = 0.4 * rng.normal();
      t.flat()[i] = 0.4 * rng.normal();
    }
    std::vector<std::pair<LatentCode<double>, LatentCode<double>>> pairs{
        {s, t}};
    const double expected = (t.data - s.data).squaredNorm();
    const double got =
        ppl(std::span<const std::pair<LatentCode<double>, LatentCode<double>>>(
                pairs),
            gen, emb, eps, rng);
    REQUIRE(std::abs(got - expected) <= 1e-10 * std::max(1.0, expected));
  }
  REQUIRE_THROWS_AS(
      ppl(std::span<const std::pair<LatentCode<double>, LatentCode<double>>>(),
          gen, emb, 1e-4, rng),
      InvalidArgument);
  std::vector<std::pair<LatentCode<double>, LatentCode<double>>> one{
      {gen.sample_latent(rng), gen.sample_latent(rng)}};
  REQUIRE_THROWS_AS(
      ppl(std::span<const std::pair<LatentCode<double>, LatentCode<double>>>(
              one),
          gen, emb, 0.0, rng),
      InvalidArgument);
}

TEST_CASE("ppl is stable under halving epsilon on the toy stack",
          "[metrics]") {
  const auto stack = shared_stack();
  ToyGenerator<double> gen(stack);
  ToyPerceptualEmbedder<double> emb(19, 32, 32);
  Rng rng(17);

  std::vector<std::pair<LatentCode<double>, LatentCode<double>>> pairs;
  for (int i = 0; i < 24; ++i) {
    LatentCode<double> s(4, 16), t(4, 16);
    for (Eigen::Index j = 0; j < 64; ++j) {
      s.flat()[j] = 0.3 * rng.normal();
      t.flat()[j] = 0.3 * rng.normal();
    }
    pairs.emplace_back(s, t);
  }
  const std::span<const std::pair<LatentCode<double>, LatentCode<double>>> sp(
      pairs);
  Rng r1(99), r2(99);  // identical t draws for both epsilons
  const double full = ppl(sp, gen, emb, 1e-4, r1);
  const double half = ppl(sp, gen, emb, 5e-5, r2);
  REQUIRE(std::abs(half - full) / full <= 0.05);
}

TEST_CASE("pir on synthetic distance tables", "[metrics]") {
  const std::vector<double> flat{0.2, 0.2, 0.2, 0.2};
  REQUIRE(pir_from_distances(std::span<const double>(flat), 0.5, 0.0) == 0.0);

  const std::vector<double> phis{0.1, 0.3, 0.2};
  REQUIRE(pir_from_distances(std::span<const double>(phis), 0.5, 0.0) ==
          Catch::Approx(0.4).epsilon(1e-12));

  // homogeneity: scaling all distances by k > 0 leaves PIR unchanged
  for (double k : {0.5, 3.0}) {
    std::vector<double> scaled;
    for (double p : phis) scaled.push_back(k * p);
    REQUIRE(pir_from_distances(std::span<const double>(scaled), k * 0.5, 0.0) ==
            Catch::Approx(0.4).epsilon(1e-12));
  }

  const std::vector<double> single{0.1};
  REQUIRE_THROWS_AS(pir_from_distances(std::span<const double>(single), 1, 0),
                    InvalidArgument);
}

TEST_CASE("pir over generated paths is finite and non-negative", "[metrics]") {
  const auto stack = shared_stack();
  ToyGenerator<double> gen(stack);
  ToyPerceptualEmbedder<double> emb(23, 32, 32);
  Rng rng(19);
  for (int t = 0; t < 5; ++t) {
    LatentCode<double> a(4, 16), b(4, 16);
    for (Eigen::Index j = 0; j < 64; ++j) {
      a.flat()[j] = 0.4 * rng.normal();
      b.flat()[j] = 0.4 * rng.normal();
    }
    const auto path = build_path(a, b, 10);
    const double v = pir(path, gen, emb, 1e-6);
    REQUIRE(v >= 0.0);
    REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("diversity is zero for a noise-blind mapper", "[metrics]") {
  // freshly initialized parameters ignore z entirely
  const auto stack = shared_stack();
  ToyGenerator<double> gen(stack);
  ToyPerceptualEmbedder<double> emb(29, 32, 32);
  IsfDims dims;
  Rng rng(23);
  const auto mapper = init_isf_params<double>(dims, rng);

  std::vector<std::pair<LatentCode<double>, AttributeVector<double>>> inputs;
  for (int i = 0; i < 3; ++i) {
    inputs.emplace_back(
        gen.sample_latent(rng),
        AttributeVector<double>((Vec<double>(4) << 1, 0, 0, 1).finished()));
  }
  const double score = diversity_score(
      std::span<const std::pair<LatentCode<double>, AttributeVector<double>>>(
          inputs),
      gen, mapper, emb, 4, rng);
  REQUIRE(score == 0.0);
}

TEST_CASE("diversity equals the brute-force reference", "[metrics]") {
  const auto stack = shared_stack();
  ToyGenerator<double> gen(stack);
  ToyPerceptualEmbedder<double> emb(31, 32, 32);
  IsfDims dims;
  Rng rng(29);
  auto mapper = init_isf_params<double>(dims, rng);
  // make the mapper noise-sensitive
  std::vector<TensorRef<double>> refs;
  collect_tensors(mapper, refs);
  for (auto& r : refs) {
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data[i] += 0.1 * rng.normal();
  }

  std::vector<std::pair<LatentCode<double>, AttributeVector<double>>> inputs;
  for (int i = 0; i < 3; ++i) {
    inputs.emplace_back(
        gen.sample_latent(rng),
        AttributeVector<double>((Vec<double>(4) << 0, 1, 1, 0).finished()));
  }

  const int n_samples = 4;
  Rng score_rng(777), ref_rng(777);
  const double score = diversity_score(
      std::span<const std::pair<LatentCode<double>, AttributeVector<double>>>(
          inputs),
      gen, mapper, emb, n_samples, score_rng);

  // independent double loop, replaying the identical noise stream
  double total = 0.0;
  for (const auto& [w, d] : inputs) {
    std::vector<ImageTensor<double>> edits;
    for (int k = 0; k < n_samples; ++k) {
      const auto z = sample_noise<double>(mapper.dims.n, ref_rng);
      edits.push_back(gen.generate(isf_forward(w, z, d, mapper)));
    }
    double acc = 0.0;
    int count = 0;
    for (int i = 0; i < n_samples; ++i) {
      for (int j = i + 1; j < n_samples; ++j) {
        acc += content_loss(edits[size_t(i)], edits[size_t(j)], emb);
        ++count;
      }
    }
    total += acc / count;
  }
  total /= double(inputs.size());
  REQUIRE(std::abs(score - total) <= 1e-7);

  // two-sample reduction: the score is the single pairwise distance
  std::vector<std::pair<LatentCode<double>, AttributeVector<double>>> one{
      inputs[0]};
  Rng r_a(55), r_b(55);
  const double two_sample = diversity_score(
      std::span<const std::pair<LatentCode<double>, AttributeVector<double>>>(
          one),
      gen, mapper, emb, 2, r_a);
  const auto za = sample_noise<double>(mapper.dims.n, r_b);
  const auto zb = sample_noise<double>(mapper.dims.n, r_b);
  const auto ia =
      gen.generate(isf_forward(one[0].first, za, one[0].second, mapper));
  const auto ib =
      gen.generate(isf_forward(one[0].first, zb, one[0].second, mapper));
  REQUIRE(std::abs(two_sample - content_loss(ia, ib, emb)) <= 1e-12);

  REQUIRE_THROWS_AS(
      diversity_score(
          std::span<
              const std::pair<LatentCode<double>, AttributeVector<double>>>(
              one),
          gen, mapper, emb, 1, r_a),
      InvalidArgument);
}

TEST_CASE("frechet distance closed form and symmetry", "[metrics]") {
  Rng rng(37);

  Matd a(64, 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  REQUIRE(frechet_distance(a, a) <= 1e-8);

  // 1-D Gaussians with means 0 and 2, unit variance: FD = 4
  const int n = 10000;
  Matd s1(n, 1), s2(n, 1);
  for (int i = 0; i < n; ++i) {
    s1(i, 0) = rng.normal();
    s2(i, 0) = 2.0 + rng.normal();
  }
  const double fd = frechet_distance(s1, s2);
  REQUIRE(std::abs(fd - 4.0) <= 0.2);
  REQUIRE(std::abs(frechet_distance(s1, s2) - frechet_distance(s2, s1)) <=
          1e-9);
  REQUIRE(fd >= 0.0);

  Matd wrong(8, 2);
  wrong.setZero();
  REQUIRE_THROWS_AS(frechet_distance(s1, wrong), InvalidArgument);
  Matd single(1, 1);
  single.setZero();
  REQUIRE_THROWS_AS(frechet_distance(single, s1), InvalidArgument);
}

TEST_CASE("attribute accuracy against the oracle classifier", "[metrics]") {
  const auto stack = shared_stack();
  ToyGenerator<double> gen(stack);
  ToyClassifier<double> cls(stack);
  Rng rng(41);

  // perfect edits constructed directly in attribute space
  std::vector<EditEval<double>> edits;
  for (int t = 0; t < 40; ++t) {
    Vecd attr(4), content = Vecd::Zero(8);
    Vec<double> target(4);
    for (int j = 0; j < 4; ++j) {
      const bool on = rng.coin();
      attr[j] = on ? 3.0 : -3.0;
      target[j] = on ? 1.0 : 0.0;
    }
    edits.push_back(
        {gen.generate(code_from_coords<double>(*stack, attr, content)),
         AttributeVector<double>(target),
         {true, true, true, true}});
  }
  const auto report =
      attribute_accuracy(std::span<const EditEval<double>>(edits), cls);
  REQUIRE(report.mean_accuracy == 1.0);
  for (int j = 0; j < 4; ++j) REQUIRE(report.per_attribute[j] == 1.0);
}

TEST_CASE("attribute accuracy sits at chance for coin flips", "[metrics]") {
  CoinClassifier coin(1);
  std::vector<EditEval<double>> edits;
  for (int t = 0; t < 1000; ++t) {
    Vec<double> target(1);
    target[0] = (t % 2 == 0) ? 1.0 : 0.0;  // balanced targets
    edits.push_back(
        {ImageTensor<double>(2, 2), AttributeVector<double>(target), {true}});
  }
  const auto report =
      attribute_accuracy(std::span<const EditEval<double>>(edits), coin);
  REQUIRE(std::abs(report.mean_accuracy - 0.5) <= 0.05);
}

TEST_CASE("misaligned accuracy records are rejected", "[metrics]") {
  const auto stack = shared_stack();
  ToyClassifier<double> cls(stack);
  std::vector<EditEval<double>> edits;
  edits.push_back({ImageTensor<double>(32, 32),
                   AttributeVector<double>((Vec<double>(2) << 1, 0).finished()),
                   {true, false}});
  REQUIRE_THROWS_AS(
      attribute_accuracy(std::span<const EditEval<double>>(edits), cls),
      InvalidArgument);
}

TEST_CASE("frs is symmetric and bounded", "[metrics]") {
  const auto stack = shared_stack();
  ToyGenerator<double> gen(stack);
  ToyIdentityEmbedder<double> emb(stack);
  Rng rng(47);
  for (int t = 0; t < 30; ++t) {
    Vecd c1(8), c2(8);
    for (int i = 0; i < 8; ++i) {
      c1[i] = 0.5 * rng.normal();
      c2[i] = 0.5 * rng.normal();
    }
    const auto a =
        gen.generate(code_from_coords<double>(*stack, Vecd::Zero(4), c1));
    const auto b =
        gen.generate(code_from_coords<double>(*stack, Vecd::Zero(4), c2));
    const double ab = frs(a, b, emb);
    REQUIRE(ab == frs(b, a, emb));
    REQUIRE(ab >= -1.0);
    REQUIRE(ab <= 1.0);
  }
}
