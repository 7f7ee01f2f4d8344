#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "isf/handles.hpp"
#include "isf/sha256.hpp"

namespace isf {

// Analytic generator/classifier/embedder family used for desk-scale
// verification. A seeded orthonormal matrix Q splits the flattened latent
// code into m attribute coordinates and k content coordinates:
//
//   a = sigmoid(Q_attr · w_flat)   -> per-region base intensity 2a-1
//   c = tanh(Q_cont · w_flat)      -> coefficients of k sinusoid textures
//
// Every texture has zero mean over every region, so region means identify
// attributes exactly and texture projections identify content exactly, which
// is what makes closed-form oracles possible.
class ToyStack {
 public:
  static constexpr int kResolution = 32;

  struct Config {
    uint64_t seed = 7;
    int m = 4;  // attribute count
    int k = 8;  // content dims
    int L = 4;
    int C = 16;
    double texture_amp = 0.2;
    double sharpness = 20.0;
  };

  explicit ToyStack(const Config& cfg) : cfg_(cfg) {
    const int n = cfg_.L * cfg_.C;
    if (cfg_.m < 1 || cfg_.k < 0 || cfg_.L < 1 || cfg_.C < 1) {
      throw InvalidArgument("ToyStack: dimensions must be positive");
    }
    if (cfg_.m + cfg_.k > n) {
      throw InvalidArgument("ToyStack: m+k exceeds latent size");
    }
    if (cfg_.m != 4 && kResolution % cfg_.m != 0) {
      throw InvalidArgument("ToyStack: m must be 4 or divide the resolution");
    }

    Rng rng(cfg_.seed);

    // random Gaussian matrix -> thin QR -> orthonormal rows
    Matd g(n, cfg_.m + cfg_.k);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.normal();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd thin_q =
        qr.householderQ() * Eigen::MatrixXd::Identity(n, cfg_.m + cfg_.k);
    q_rows_ = thin_q.transpose();

    build_textures(rng);
    digest_ = compute_digest();
  }

  const Config& config() const { return cfg_; }
  int latent_size() const { return cfg_.L * cfg_.C; }

  // rows are the attribute / content directions in flattened latent space
  Matd attr_rows() const { return q_rows_.topRows(cfg_.m); }
  Matd content_rows() const { return q_rows_.bottomRows(cfg_.k); }
  const Matd& q_rows() const { return q_rows_; }

  const Matd& basis_image(int j) const { return basis_[size_t(j)]; }
  double basis_sq_norm() const { return basis_sq_norm_; }
  const std::string& digest() const { return digest_; }

  int region_of(int y, int x) const {
    if (cfg_.m == 4) {
      return (y >= kResolution / 2 ? 2 : 0) + (x >= kResolution / 2 ? 1 : 0);
    }
    return y / (kResolution / cfg_.m);
  }

  Vecd attr_coords(const Vecd& w_flat) const {
    return q_rows_.topRows(cfg_.m) * w_flat;
  }
  Vecd content_coords(const Vecd& w_flat) const {
    return q_rows_.bottomRows(cfg_.k) * w_flat;
  }

  // deterministic 32x32x3 image; all channels carry the same signal
  void generate_double(const Vecd& w_flat, Matd& pre_clamp) const {
    const int R = kResolution;
    Vecd a = attr_coords(w_flat);
    for (int q = 0; q < cfg_.m; ++q) a[q] = sigmoid(a[q]);
    Vecd c = content_coords(w_flat);
    for (int j = 0; j < cfg_.k; ++j) c[j] = std::tanh(c[j]);

    pre_clamp.setZero(R, R);
    for (int j = 0; j < cfg_.k; ++j) {
      pre_clamp += (cfg_.texture_amp * c[j]) * basis_[size_t(j)];
    }
    for (int y = 0; y < R; ++y) {
      for (int x = 0; x < R; ++x) {
        pre_clamp(y, x) += 2.0 * a[region_of(y, x)] - 1.0;
      }
    }
  }

 private:
  void build_textures(Rng& rng) {
    // Effective frequency (u,v) = (f*p, f*q) mod 32. Requiring u even in
    // [2,14] makes every 16-aligned and full-width row sum vanish, so each
    // sinusoid has zero mean over every quadrant and strip, and keeps the
    // chosen frequency pairs orthogonal on the pixel grid.
    const int R = kResolution;
    std::vector<std::pair<int, int>> used;
    int attempts = 0;
    while (int(basis_.size()) < cfg_.k) {
      if (++attempts > 100000) {
        throw InvalidArgument("ToyStack: cannot find enough texture bases");
      }
      const int f = 1 + int(rng.uniform_index(15));
      const int p = 1 + int(rng.uniform_index(3));
      const int q = int(rng.uniform_index(4));
      const double phi = rng.uniform() * 2.0 * std::numbers::pi;
      const int u = (f * p) % R;
      const int v = (f * q) % R;
      if (u % 2 != 0 || u < 2 || u > 14) continue;
      bool clash = false;
      for (auto [uu, vv] : used) {
        if (uu == u && vv == v) clash = true;
      }
      if (clash) continue;
      used.emplace_back(u, v);

      Matd b(R, R);
      for (int y = 0; y < R; ++y) {
        for (int x = 0; x < R; ++x) {
          b(y, x) = std::sin(2.0 * std::numbers::pi * (u * x + v * y) / R + phi);
        }
      }
      basis_.push_back(std::move(b));
      freqs_.push_back({u, v, phi});
    }
    basis_sq_norm_ = basis_.empty() ? 0.0 : basis_[0].squaredNorm();
  }

  std::string compute_digest() const {
    Sha256 h;
    auto add = [&h](const void* p, size_t len) { h.update(p, len); };
    const int64_t dims[4] = {cfg_.m, cfg_.k, cfg_.L, cfg_.C};
    add(dims, sizeof(dims));
    add(&cfg_.texture_amp, sizeof(double));
    add(&cfg_.sharpness, sizeof(double));
    add(q_rows_.data(), size_t(q_rows_.size()) * sizeof(double));
    for (const auto& f : freqs_) {
      add(&f.u, sizeof(int));
      add(&f.v, sizeof(int));
      add(&f.phi, sizeof(double));
    }
    auto d = h.digest();
    return Sha256::hex(d);
  }

  struct Freq {
    int u, v;
    double phi;
  };

  Config cfg_;
  Matd q_rows_;  // (m+k) x (L*C)
  std::vector<Matd> basis_;
  std::vector<Freq> freqs_;
  double basis_sq_norm_ = 0.0;
  std::string digest_;
};

template <class T>
class ToyGenerator final : public Generator<T> {
 public:
  explicit ToyGenerator(std::shared_ptr<const ToyStack> stack)
      : stack_(std::move(stack)) {}

  std::string name() const override { return "toy"; }
  std::pair<int, int> latent_shape() const override {
    return {stack_->config().L, stack_->config().C};
  }
  std::pair<int, int> resolution() const override {
    return {ToyStack::kResolution, ToyStack::kResolution};
  }

  ImageTensor<T> generate(const LatentCode<T>& w) const override {
    this->check_latent(w);
    const Vecd wf = w.flat().template cast<double>();
    Matd pre;
    stack_->generate_double(wf, pre);
    const int R = ToyStack::kResolution;
    ImageTensor<T> img(R, R);
    for (int y = 0; y < R; ++y) {
      for (int x = 0; x < R; ++x) {
        const double v = std::clamp(pre(y, x), -1.0, 1.0);
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = T(v);
      }
    }
    return img;
  }

  LatentCode<T> generate_vjp(const LatentCode<T>& w,
                             const ImageTensor<T>& dimage) const override {
    this->check_latent(w);
    const int R = ToyStack::kResolution;
    if (dimage.height != R || dimage.width != R) {
      throw InvalidArgument("toy generator: cotangent resolution mismatch");
    }
    const auto& cfg = stack_->config();
    const Vecd wf = w.flat().template cast<double>();
    Matd pre;
    stack_->generate_double(wf, pre);

    // per-pixel upstream gradient summed over channels, clamp pass-through
    Matd dpix(R, R);
    for (int y = 0; y < R; ++y) {
      for (int x = 0; x < R; ++x) {
        double g = 0.0;
        for (int c = 0; c < 3; ++c) g += double(dimage.at(y, x, c));
        dpix(y, x) = (std::abs(pre(y, x)) < 1.0) ? g : 0.0;
      }
    }

    const Vecd sa = stack_->attr_coords(wf);
    const Vecd sc = stack_->content_coords(wf);

    Vecd da = Vecd::Zero(cfg.m);
    for (int y = 0; y < R; ++y) {
      for (int x = 0; x < R; ++x) {
        da[stack_->region_of(y, x)] += 2.0 * dpix(y, x);
      }
    }
    for (int q = 0; q < cfg.m; ++q) {
      const double s = sigmoid(sa[q]);
      da[q] *= s * (1.0 - s);
    }

    Vecd dc(cfg.k);
    for (int j = 0; j < cfg.k; ++j) {
      const double th = std::tanh(sc[j]);
      dc[j] = cfg.texture_amp * (1.0 - th * th) *
              stack_->basis_image(j).cwiseProduct(dpix).sum();
    }

    const Vecd dwf = stack_->attr_rows().transpose() * da +
                     stack_->content_rows().transpose() * dc;
    LatentCode<T> out(cfg.L, cfg.C);
    out.flat() = dwf.cast<T>();
    return out;
  }

  LatentCode<T> sample_latent(Rng& rng) const override {
    const auto& cfg = stack_->config();
    LatentCode<T> w(cfg.L, cfg.C);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.flat()[i] = T(rng.normal());
    return w;
  }

  std::string param_digest() const override { return stack_->digest(); }

 private:
  std::shared_ptr<const ToyStack> stack_;
};

template <class T>
class ToyClassifier final : public AttributeClassifier<T> {
 public:
  explicit ToyClassifier(std::shared_ptr<const ToyStack> stack)
      : stack_(std::move(stack)) {}

  std::string name() const override { return "toy"; }
  int num_attributes() const override { return stack_->config().m; }

  AttributeVector<T> classify(const ImageTensor<T>& x) const override {
    const int R = ToyStack::kResolution;
    if (x.height != R || x.width != R) {
      throw InvalidArgument("toy classifier: resolution mismatch");
    }
    const auto& cfg = stack_->config();
    Vecd sums = Vecd::Zero(cfg.m);
    Vecd counts = Vecd::Zero(cfg.m);
    for (int y = 0; y < R; ++y) {
      for (int x2 = 0; x2 < R; ++x2) {
        const int q = stack_->region_of(y, x2);
        for (int c = 0; c < 3; ++c) sums[q] += double(x.at(y, x2, c));
        counts[q] += 3.0;
      }
    }
    Vec<T> probs(cfg.m);
    for (int q = 0; q < cfg.m; ++q) {
      probs[q] = T(sigmoid(cfg.sharpness * sums[q] / counts[q]));
    }
    return AttributeVector<T>(std::move(probs));
  }

 private:
  std::shared_ptr<const ToyStack> stack_;
};

// Projects an image onto the k sinusoid basis images (inner product divided
// by basis squared norm and texture amplitude), recovering the content
// coordinates c exactly when no pixel clamps.
template <class T>
class ToyIdentityEmbedder final : public Embedder<T> {
 public:
  explicit ToyIdentityEmbedder(std::shared_ptr<const ToyStack> stack)
      : stack_(std::move(stack)) {}

  std::string name() const override { return "toy-identity"; }
  EmbedderRole role() const override { return EmbedderRole::identity; }

  Vec<T> embed(const ImageTensor<T>& x) const override {
    const int R = ToyStack::kResolution;
    if (x.height != R || x.width != R) {
      throw InvalidArgument("toy identity embedder: resolution mismatch");
    }
    const auto& cfg = stack_->config();
    Matd mono = Matd::Zero(R, R);
    for (int y = 0; y < R; ++y) {
      for (int x2 = 0; x2 < R; ++x2) {
        for (int c = 0; c < 3; ++c) mono(y, x2) += double(x.at(y, x2, c));
      }
    }
    const double denom = 3.0 * stack_->basis_sq_norm() * cfg.texture_amp;
    Vec<T> out(cfg.k);
    for (int j = 0; j < cfg.k; ++j) {
      out[j] = T(stack_->basis_image(j).cwiseProduct(mono).sum() / denom);
    }
    return out;
  }

 private:
  std::shared_ptr<const ToyStack> stack_;
};

// Seeded random linear map on pixels, the stand-in for a pretrained
// perceptual network. Linear, so content losses admit closed-form oracles.
template <class T>
class ToyPerceptualEmbedder final : public Embedder<T> {
 public:
  ToyPerceptualEmbedder(uint64_t seed, int height, int width, int out_dim = 64)
      : height_(height), width_(width) {
    const int in_dim = height * width * 3;
    Rng rng(seed);
    proj_.resize(out_dim, in_dim);
    const double scale = 1.0 / std::sqrt(double(in_dim));
    for (Eigen::Index i = 0; i < proj_.rows(); ++i) {
      for (Eigen::Index j = 0; j < proj_.cols(); ++j) {
        proj_(i, j) = scale * rng.normal();
      }
    }
  }

  std::string name() const override { return "toy-perceptual"; }
  EmbedderRole role() const override { return EmbedderRole::perceptual; }
  bool differentiable() const override { return true; }

  const Matd& projection() const { return proj_; }

  Vec<T> embed(const ImageTensor<T>& x) const override {
    check(x);
    const Vecd f = proj_ * flatten(x).template cast<double>();
    return f.cast<T>();
  }

  ImageTensor<T> embed_vjp(const ImageTensor<T>& x,
                           const Vec<T>& dfeatures) const override {
    check(x);
    if (dfeatures.size() != proj_.rows()) {
      throw InvalidArgument("toy perceptual embedder: cotangent size");
    }
    const Vecd dx = proj_.transpose() * dfeatures.template cast<double>();
    ImageTensor<T> out(height_, width_);
    for (size_t i = 0; i < out.pixels.size(); ++i) {
      out.pixels[i] = T(dx[Eigen::Index(i)]);
    }
    return out;
  }

 private:
  void check(const ImageTensor<T>& x) const {
    if (x.height != height_ || x.width != width_) {
      throw InvalidArgument("toy perceptual embedder: resolution mismatch");
    }
  }

  int height_, width_;
  Matd proj_;
};

// Copies latent entries straight into pixels (L*C must equal H*W*3). Exists
// for metric verification: with this generator and the pixel embedder, path
// metrics have closed forms.
template <class T>
class IdentityGenerator final : public Generator<T> {
 public:
  IdentityGenerator(int L, int C) : L_(L), C_(C) {
    const int n = L * C;
    if (n % 3 != 0) {
      throw InvalidArgument("identity generator: L*C must be divisible by 3");
    }
    const int hw = n / 3;
    const int side = int(std::lround(std::sqrt(double(hw))));
    if (side * side != hw) {
      throw InvalidArgument("identity generator: L*C/3 must be a square");
    }
    side_ = side;
  }

  std::string name() const override { return "identity"; }
  std::pair<int, int> latent_shape() const override { return {L_, C_}; }
  std::pair<int, int> resolution() const override { return {side_, side_}; }

  ImageTensor<T> generate(const LatentCode<T>& w) const override {
    this->check_latent(w);
    ImageTensor<T> img(side_, side_);
    auto f = w.flat();
    for (Eigen::Index i = 0; i < f.size(); ++i) img.pixels[size_t(i)] = f[i];
    return img;
  }

  LatentCode<T> generate_vjp(const LatentCode<T>& w,
                             const ImageTensor<T>& dimage) const override {
    this->check_latent(w);
    LatentCode<T> out(L_, C_);
    auto f = out.flat();
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = dimage.pixels[size_t(i)];
    return out;
  }

  LatentCode<T> sample_latent(Rng& rng) const override {
    LatentCode<T> w(L_, C_);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.flat()[i] = T(rng.normal());
    return w;
  }

  std::string param_digest() const override {
    const std::string tag =
        "identity:" + std::to_string(L_) + "x" + std::to_string(C_);
    return sha256_hex(tag);
  }

 private:
  int L_, C_;
  int side_ = 0;
};

// Returns the raw pixels as features; role is perceptual so it can stand in
// wherever a feature distance is needed in closed-form checks.
template <class T>
class PixelEmbedder final : public Embedder<T> {
 public:
  std::string name() const override { return "pixel"; }
  EmbedderRole role() const override { return EmbedderRole::perceptual; }
  bool differentiable() const override { return true; }

  Vec<T> embed(const ImageTensor<T>& x) const override { return flatten(x); }

  ImageTensor<T> embed_vjp(const ImageTensor<T>& x,
                           const Vec<T>& dfeatures) const override {
    if (Eigen::Index(x.pixels.size()) != dfeatures.size()) {
      throw InvalidArgument("pixel embedder: cotangent size");
    }
    ImageTensor<T> out(x.height, x.width);
    for (size_t i = 0; i < out.pixels.size(); ++i) {
      out.pixels[i] = dfeatures[Eigen::Index(i)];
    }
    return out;
  }
};

}  // namespace isf
