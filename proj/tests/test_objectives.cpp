#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include "isf/isf_net.hpp"
#include "isf/objectives.hpp"
#include "isf/toy.hpp"

using namespace isf;

namespace {

constexpr double kLn2 = 0.6931471805599453;

std::shared_ptr<const ToyStack> shared_stack() {
  static auto stack = std::make_shared<const ToyStack>(ToyStack::Config{});
  return stack;
}

ImageTensor<double> random_image(int res, Rng& rng, double scale = 1.0) {
  ImageTensor<double> img(res, res);
  for (auto& p : img.pixels) p = scale * (2.0 * rng.uniform() - 1.0);
  return img;
}

}  // namespace

TEST_CASE("critic adversarial loss at zero logits is 2 ln 2", "[objectives]") {
  Rng rng(1);
  const auto critic =
      init_critic_params<double>(default_critic_config(8, 2, 4), rng);
  const std::vector<double> zeros{0.0, 0.0};
  // no images -> no R1 term
  const double loss = adv_loss_critic<double>(
      std::span<const double>(zeros), std::span<const double>(zeros), {},
      critic, 1.0);
  REQUIRE(loss == Catch::Approx(2.0 * kLn2).epsilon(1e-12));
}

TEST_CASE("zero-weight critic has zero R1 penalty", "[objectives]") {
  Rng rng(2);
  auto critic = init_critic_params<double>(default_critic_config(8, 2, 4), rng);
  std::vector<TensorRef<double>> refs;
  collect_tensors(critic, refs);
  for (auto& r : refs) {
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data[i] = 0.0;
  }
  const std::vector<double> logits{0.0};
  std::vector<ImageTensor<double>> imgs{random_image(8, rng)};
  const double with_r1 = adv_loss_critic<double>(
      std::span<const double>(logits), std::span<const double>(logits),
      std::span<const ImageTensor<double>>(imgs), critic, 1.0);
  REQUIRE(with_r1 == Catch::Approx(2.0 * kLn2).epsilon(1e-12));
}

TEST_CASE("R1 value matches a finite-difference gradient norm",
          "[objectives]") {
  Rng rng(3);
  const auto critic =
      init_critic_params<double>(default_critic_config(8, 2, 8), rng);
  auto x = random_image(8, rng);

  // analytic value through the loss
  const std::vector<double> logits{0.0};
  std::vector<ImageTensor<double>> imgs{x};
  const double base = adv_loss_critic<double>(
      std::span<const double>(logits), std::span<const double>(logits), {},
      critic, 0.0);
  const double with_r1 = adv_loss_critic<double>(
      std::span<const double>(logits), std::span<const double>(logits),
      std::span<const ImageTensor<double>>(imgs), critic, 1.0);
  const double analytic_r1 = with_r1 - base;

  // brute-force gradient of the rf logit, pixel by pixel
  const double h = 1e-5;
  double sq = 0.0;
  for (size_t i = 0; i < x.pixels.size(); ++i) {
    const double saved = x.pixels[i];
    x.pixels[i] = saved + h;
    const double up = discriminate(x, critic);
    x.pixels[i] = saved - h;
    const double dn = discriminate(x, critic);
    x.pixels[i] = saved;
    const double g = (up - dn) / (2 * h);
    sq += g * g;
  }
  const double fd_r1 = 0.5 * sq;
  REQUIRE(std::abs(analytic_r1 - fd_r1) / std::abs(fd_r1) <= 1e-3);
}

TEST_CASE("mapper adversarial loss values", "[objectives]") {
  const std::vector<double> zero{0.0};
  REQUIRE(adv_loss_mapper<double>(std::span<const double>(zero)) ==
          Catch::Approx(kLn2).epsilon(1e-12));

  const std::vector<double> confident{20.0};
  REQUIRE(adv_loss_mapper<double>(std::span<const double>(confident)) <= 1e-8);

  // d/dl softplus(-l) at 0 is -1/2
  const double h = 1e-6;
  const std::vector<double> up{h}, dn{-h};
  const double fd = (adv_loss_mapper<double>(std::span<const double>(up)) -
                     adv_loss_mapper<double>(std::span<const double>(dn))) /
                    (2 * h);
  REQUIRE(fd == Catch::Approx(-0.5).margin(1e-9));
}

TEST_CASE("classification loss against hard and soft targets",
          "[objectives]") {
  const Vec<double> zeros = Vec<double>::Zero(4);
  AttributeVector<double> d0((Vec<double>(4) << 1, 0, 1, 0).finished());
  REQUIRE(cls_loss_critic(zeros, d0) == Catch::Approx(kLn2).epsilon(1e-12));

  Vec<double> confident(4);
  confident << 20, -20, 20, -20;
  REQUIRE(cls_loss_critic(confident, d0) <= 1e-8);

  // independent reference implementation over random cases
  Rng rng(5);
  double max_diff = 0.0;
  for (int t = 0; t < 100; ++t) {
    Vec<double> logits(4), targets(4);
    for (int i = 0; i < 4; ++i) {
      logits[i] = 4.0 * rng.normal();
      targets[i] = rng.uniform();
    }
    const double ours =
        cls_loss_mapper(logits, AttributeVector<double>(targets));
    double ref = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-logits[i]));
      ref += -targets[i] * std::log(p) - (1 - targets[i]) * std::log(1 - p);
    }
    ref /= 4.0;
    max_diff = std::max(max_diff, std::abs(ours - ref));
  }
  REQUIRE(max_diff <= 1e-6);

  Vec<double> bad(4);
  bad << 0.5, 1.5, 0.5, 0.5;
  REQUIRE_THROWS_AS(multilabel_bce(zeros, bad), InvalidArgument);
}

TEST_CASE("content loss: identity, symmetry, closed form", "[objectives]") {
  ToyPerceptualEmbedder<double> emb(11, 32, 32);
  Rng rng(7);

  const auto x = random_image(32, rng);
  REQUIRE(content_loss(x, x, emb) == 0.0);

  double max_asym = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto a = random_image(32, rng);
    const auto b = random_image(32, rng);
    max_asym = std::max(
        max_asym, std::abs(content_loss(a, b, emb) - content_loss(b, a, emb)));
  }
  REQUIRE(max_asym <= 1e-7);

  // closed form from the raw projection matrix
  const Matd& P = emb.projection();
  for (int t = 0; t < 10; ++t) {
    const auto a = random_image(32, rng);
    const auto b = random_image(32, rng);
    const Vecd fa = P * flatten(a);
    const Vecd fb = P * flatten(b);
    const Vecd ua = fa / fa.norm();
    const Vecd ub = fb / fb.norm();
    const double expected = (ua - ub).squaredNorm() / double(fa.size());
    const double got = content_loss(a, b, emb);
    REQUIRE(std::abs(got - expected) <=
            1e-6 * std::max(expected, 1e-12));
  }
}

TEST_CASE("neighbour loss is the unsquared code distance", "[objectives]") {
  LatentCode<double> w(4, 16);
  REQUIRE(neighbour_loss(w, w) == 0.0);

  LatentCode<double> w2 = w;
  w2.flat()[0] = 3.0;
  w2.flat()[1] = 4.0;
  REQUIRE(neighbour_loss(w, w2) == 5.0);

  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    LatentCode<double> a(2, 4), b(2, 4), c(2, 4);
    for (Eigen::Index i = 0; i < 8; ++i) {
      a.flat()[i] = rng.normal();
      b.flat()[i] = rng.normal();
      c.flat()[i] = rng.normal();
    }
    REQUIRE(neighbour_loss(a, c) <=
            neighbour_loss(a, b) + neighbour_loss(b, c) + 1e-12);
  }

  LatentCode<double> bad(2, 16);
  REQUIRE_THROWS_AS(neighbour_loss(w, bad), InvalidArgument);
}

TEST_CASE("cycle and diversity losses are mean absolute error",
          "[objectives]") {
  Rng rng(13);
  const auto x = random_image(32, rng);
  REQUIRE(cycle_loss(x, x) == 0.0);
  REQUIRE(diversity_loss(x, x) == 0.0);

  auto shifted = x;
  for (auto& p : shifted.pixels) p += 0.5;
  REQUIRE(cycle_loss(x, shifted) == Catch::Approx(0.5).epsilon(1e-12));

  for (int t = 0; t < 50; ++t) {
    const auto a = random_image(32, rng);
    const auto b = random_image(32, rng);
    double ref = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
      ref += std::abs(a.pixels[i] - b.pixels[i]);
    }
    ref /= double(a.pixels.size());
    REQUIRE(std::abs(cycle_loss(a, b) - ref) <= 1e-7);
    // same functional form
    REQUIRE(std::abs(diversity_loss(a, b) - cycle_loss(a, b)) <= 1e-7);
    REQUIRE(diversity_loss(a, b) >= 0.0);
    REQUIRE(std::abs(diversity_loss(a, b) - diversity_loss(b, a)) <= 1e-7);
  }

  REQUIRE_THROWS_AS(cycle_loss(x, random_image(16, rng)), InvalidArgument);
}

TEST_CASE("diversity weight decays linearly to zero", "[objectives]") {
  REQUIRE(ds_weight<double>(0, 40000, 2.0) == 2.0);
  REQUIRE(ds_weight<double>(40000, 40000, 2.0) == 0.0);
  REQUIRE(ds_weight<double>(20000, 40000, 2.0) == Catch::Approx(1.0));
  REQUIRE_THROWS_AS(ds_weight<double>(1, 0, 2.0), InvalidArgument);
}

TEST_CASE("combined mapper objective uses the decayed diversity weight",
          "[objectives]") {
  LossReport<double> terms;
  terms.rf_mapper = terms.cls_mapper = terms.cont = terms.nb = terms.cyc =
      terms.ds = 1.0;
  LossWeights<double> w;  // paper defaults: 1, 1, 1, 0.1, 1, 2
  const double total = total_mapper_objective(terms, w, 0, 40000);
  REQUIRE(total == Catch::Approx(2.1).epsilon(1e-12));

  LossWeights<double> zero;
  zero.rf = zero.cls = zero.cont = zero.nb = zero.cyc = zero.ds = 0.0;
  REQUIRE(total_mapper_objective(terms, zero, 0, 40000) == 0.0);

  LossWeights<double> bad;
  bad.nb = -0.1;
  REQUIRE_THROWS_AS(total_mapper_objective(terms, bad, 0, 100),
                    InvalidArgument);
}

TEST_CASE("loss terms are non-negative", "[objectives]") {
  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    const double logit = 10.0 * rng.normal();
    const std::vector<double> one{logit};
    REQUIRE(adv_loss_mapper<double>(std::span<const double>(one)) >= 0.0);

    Vec<double> logits(3), targets(3);
    for (int i = 0; i < 3; ++i) {
      logits[i] = 10.0 * rng.normal();
      targets[i] = rng.uniform();
    }
    REQUIRE(multilabel_bce(logits, targets) >= 0.0);
  }

  // critic adversarial terms are softplus sums, also non-negative
  Rng rng2(18);
  const auto critic =
      init_critic_params<double>(default_critic_config(8, 2, 4), rng2);
  const std::vector<double> logits{3.0, -2.0};
  REQUIRE(adv_loss_critic<double>(std::span<const double>(logits),
                                  std::span<const double>(logits), {}, critic,
                                  1.0) >= 0.0);
}

TEST_CASE("neighbour loss at initialization matches the residual start",
          "[objectives]") {
  IsfDims dims;
  Rng rng(21);
  const auto params = init_isf_params<double>(dims, rng);
  for (int t = 0; t < 20; ++t) {
    LatentCode<double> w(4, 16);
    for (Eigen::Index i = 0; i < 64; ++i) w.flat()[i] = rng.normal();
    const auto z = sample_noise<double>(32, rng);
    AttributeVector<double> d((Vec<double>(4) << 1, 0, 0, 1).finished());
    const auto w_star = isf_forward(w, z, d, params);

    const Mat<double> normed = adaln(
        w.data, Vec<double>(Vec<double>::Ones(64)),
        Vec<double>(Vec<double>::Zero(64)), params.eps);
    const double bound = (w.data - normed).norm() + 1e-5;
    REQUIRE(neighbour_loss(w, w_star) <= bound);
  }
}
