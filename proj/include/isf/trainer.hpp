#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>

#include <json.hpp>

#include "isf/adam.hpp"
#include "isf/critic.hpp"
#include "isf/dataset.hpp"
#include "isf/isf_net.hpp"
#include "isf/objectives.hpp"
#include "isf/params_io.hpp"

namespace isf {

// Defaults are the desk-scale values; full-scale runs override through the
// experiment config (40K iterations, batch 4, learning rates 1e-5).
template <class T>
struct TrainConfig {
  int64_t total_iterations = 3000;
  int batch_size = 16;
  T lr_mapper = T(7e-4);
  T lr_critic = T(2e-3);
  AdamConfig<T> adam;  // beta1=0, beta2=0.99, eps=1e-8
  T r1_gamma = T(1);
  LossWeights<T> weights;
  uint64_t seed = 7;
  int64_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  int64_t log_every = 1;

  IsfDims dims;
  CriticConfig critic = default_critic_config(32, 4);
  NormMode norm_mode = NormMode::layer;
  std::string config_digest;  // digest of the experiment config, if any

  void validate() const {
    if (total_iterations < 0) {
      throw InvalidArgument("train: total_iterations must be >= 0");
    }
    if (batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
    if (lr_mapper < T(0) || lr_critic < T(0)) {
      throw InvalidArgument("train: learning rates must be >= 0");
    }
    if (r1_gamma < T(0)) throw InvalidArgument("train: r1_gamma must be >= 0");
    if (checkpoint_every < 0 || log_every < 1) {
      throw InvalidArgument("train: bad checkpoint/log cadence");
    }
    adam.validate();
    weights.validate();
    critic.validate();
    if (critic.m != dims.m) {
      throw InvalidArgument("train: critic attribute count differs from dims");
    }
  }
};

// Flip each attribute of the binarized source label independently with
// probability 1/2; redraw until at least one attribute actually flips.
template <class T>
AttributeVector<T> sample_flip_targets(const AttributeVector<T>& d0,
                                       Rng& rng) {
  const Eigen::Index m = d0.size();
  Vec<T> bits(m);
  while (true) {
    bool any = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      const T base = d0.values[i] > T(0.5) ? T(1) : T(0);
      const bool flip = rng.coin();
      bits[i] = flip ? T(1) - base : base;
      any = any || flip;
    }
    if (any) break;
  }
  return AttributeVector<T>(std::move(bits));
}

// ---- critic objective ------------------------------------------------------

template <class T>
struct CriticBatch {
  std::vector<ImageTensor<T>> x_real;
  std::vector<AttributeVector<T>> d0;
  std::vector<ImageTensor<T>> x_fake;
};

template <class T>
struct CriticEval {
  T adv = T(0);  // non-saturating terms plus R1, the Eq-for-D value
  T cls = T(0);
  T total = T(0);
};

template <class T>
CriticEval<T> critic_objective(const CriticParams<T>& critic,
                               const CriticBatch<T>& batch, T r1_gamma,
                               T lambda_cls, CriticGrads<T>* grads = nullptr) {
  const size_t br = batch.x_real.size();
  const size_t bf = batch.x_fake.size();
  if (br == 0 || bf == 0 || batch.d0.size() != br) {
    throw InvalidArgument("critic_objective: empty or misaligned batch");
  }
  const T inv_br = T(1) / T(br);
  const T inv_bf = T(1) / T(bf);
  const Eigen::Index m = critic.cls_head.W.rows();

  std::vector<T> adv_real, adv_fake, r1_terms, cls_terms;
  for (size_t b = 0; b < br; ++b) {
    const CriticCache<T> cache = critic_forward(critic, batch.x_real[b]);
    adv_real.push_back(softplus(-cache.rf_logit));
    cls_terms.push_back(multilabel_bce(cache.cls_logits, batch.d0[b].values));

    if (grads) {
      const T drf = -sigmoid(-cache.rf_logit) * inv_br;
      Vec<T> dcls(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        dcls[j] = lambda_cls *
                  (sigmoid(cache.cls_logits[j]) - batch.d0[b].values[j]) /
                  (T(m) * T(br));
      }
      critic_backward(critic, cache, drf, dcls, grads, false);
    }

    if (r1_gamma > T(0)) {
      const ImageTensor<T> g = critic_input_grad(critic, cache);
      T sq = T(0);
      for (T v : g.pixels) sq += v * v;
      r1_terms.push_back(sq);
      if (grads) {
        const R1TangentCache<T> tc = r1_tangent_forward(critic, cache, g);
        r1_tangent_backward(critic, cache, tc, r1_gamma * inv_br, *grads);
      }
    }
  }

  for (size_t b = 0; b < bf; ++b) {
    const CriticCache<T> cache = critic_forward(critic, batch.x_fake[b]);
    adv_fake.push_back(softplus(cache.rf_logit));
    if (grads) {
      const T drf = sigmoid(cache.rf_logit) * inv_bf;
      critic_backward(critic, cache, drf, Vec<T>(), grads, false);
    }
  }

  CriticEval<T> eval;
  eval.adv = pairwise_mean(std::span<const T>(adv_real)) +
             pairwise_mean(std::span<const T>(adv_fake));
  if (!r1_terms.empty()) {
    eval.adv += (r1_gamma / T(2)) * pairwise_mean(std::span<const T>(r1_terms));
  }
  eval.cls = pairwise_mean(std::span<const T>(cls_terms));
  eval.total = eval.adv + lambda_cls * eval.cls;
  return eval;
}

// ---- mapper objective ------------------------------------------------------

template <class T>
struct MapperBatch {
  std::vector<LatentCode<T>> w;
  std::vector<AttributeVector<T>> d0;  // source labels (continuous)
  std::vector<AttributeVector<T>> d;   // flip targets (binary)
  std::vector<NoiseVector<T>> z;       // main edit noise
  std::vector<NoiseVector<T>> z2;      // diversity partner
  std::vector<NoiseVector<T>> z3;      // backward-cycle noise
};

template <class T>
struct MapperEval {
  T rf = T(0), cls = T(0), cont = T(0), nb = T(0), cyc = T(0), ds = T(0);
  T ds_w = T(0);
  T total = T(0);
};

namespace detail {

template <class T>
ImageTensor<T> zero_like(const ImageTensor<T>& x) {
  return ImageTensor<T>(x.height, x.width);
}

template <class T>
void add_scaled(ImageTensor<T>& acc, const ImageTensor<T>& x, T s) {
  for (size_t i = 0; i < acc.pixels.size(); ++i) acc.pixels[i] += s * x.pixels[i];
}

// d/dx of mean|x - y|, scaled
template <class T>
void add_mad_grad(ImageTensor<T>& acc, const ImageTensor<T>& x,
                  const ImageTensor<T>& y, T s) {
  const T inv_n = T(1) / T(x.pixels.size());
  for (size_t i = 0; i < x.pixels.size(); ++i) {
    const T d = x.pixels[i] - y.pixels[i];
    const T sign = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
    acc.pixels[i] += s * sign * inv_n;
  }
}

}  // namespace detail

// Full weighted objective of the style function on one batch, with optional
// analytic gradients. All sampling happens outside; given a fixed batch this
// is a deterministic function of the parameters, which is what the
// finite-difference suite checks.
template <class T>
MapperEval<T> mapper_objective(const IsfParams<T>& mapper,
                               const CriticParams<T>& critic,
                               const Generator<T>& gen,
                               const Embedder<T>& perceptual,
                               const MapperBatch<T>& batch,
                               const LossWeights<T>& weights, int64_t iteration,
                               int64_t total_iterations,
                               IsfGrads<T>* grads = nullptr) {
  const size_t B = batch.w.size();
  if (B == 0 || batch.d0.size() != B || batch.d.size() != B ||
      batch.z.size() != B || batch.z2.size() != B || batch.z3.size() != B) {
    throw InvalidArgument("mapper_objective: empty or misaligned batch");
  }
  const T inv_b = T(1) / T(B);
  const T wd = ds_weight(iteration, total_iterations, weights.ds);
  const Eigen::Index m = critic.cls_head.W.rows();

  std::vector<T> rf_terms, cls_terms, cont_terms, nb_terms, cyc_terms, ds_terms;

  for (size_t b = 0; b < B; ++b) {
    const LatentCode<T>& w = batch.w[b];
    const ImageTensor<T> x_src = gen.generate(w);

    IsfCache<T> cache_main, cache_div, cache_cyc;
    const LatentCode<T> w_star = isf_forward(w, batch.z[b], batch.d[b], mapper,
                                             grads ? &cache_main : nullptr);
    const ImageTensor<T> x_star = gen.generate(w_star);

    const LatentCode<T> w_div = isf_forward(w, batch.z2[b], batch.d[b], mapper,
                                            grads ? &cache_div : nullptr);
    const ImageTensor<T> x_div = gen.generate(w_div);

    const LatentCode<T> w_cyc = isf_forward(w_star, batch.z3[b], batch.d0[b],
                                            mapper, grads ? &cache_cyc : nullptr);
    const ImageTensor<T> x_cyc = gen.generate(w_cyc);

    const CriticCache<T> dcache = critic_forward(critic, x_star);

    rf_terms.push_back(softplus(-dcache.rf_logit));
    cls_terms.push_back(multilabel_bce(dcache.cls_logits, batch.d[b].values));

    ImageTensor<T> dx_star = detail::zero_like(x_star);
    if (grads) {
      // adversarial + classification pulled through the critic in one pass
      const T drf = -weights.rf * sigmoid(-dcache.rf_logit) * inv_b;
      Vec<T> dcls(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        dcls[j] = weights.cls *
                  (sigmoid(dcache.cls_logits[j]) - batch.d[b].values[j]) /
                  (T(m) * T(B));
      }
      dx_star = critic_backward(critic, dcache, drf, dcls,
                                static_cast<CriticGrads<T>*>(nullptr), true);
    }

    // content preservation
    ImageTensor<T> dx_star_cont;
    cont_terms.push_back(content_loss<T>(x_src, x_star, perceptual, nullptr,
                                         grads ? &dx_star_cont : nullptr));
    if (grads) detail::add_scaled(dx_star, dx_star_cont, weights.cont * inv_b);

    // neighbouring constraint (unsquared norm)
    const T nb_val = neighbour_loss(w, w_star);
    nb_terms.push_back(nb_val);

    // cycle consistency and diversity in pixel space
    cyc_terms.push_back(cycle_loss(x_src, x_cyc));
    ds_terms.push_back(diversity_loss(x_star, x_div));

    if (grads) {
      // diversity enters the objective negatively (maximized)
      detail::add_mad_grad(dx_star, x_star, x_div, -wd * inv_b);
      ImageTensor<T> dx_div = detail::zero_like(x_div);
      detail::add_mad_grad(dx_div, x_div, x_star, -wd * inv_b);

      ImageTensor<T> dx_cyc = detail::zero_like(x_cyc);
      detail::add_mad_grad(dx_cyc, x_cyc, x_src, weights.cyc * inv_b);

      // cycle branch: back through G and the second mapper application
      const LatentCode<T> dw_cyc = gen.generate_vjp(w_cyc, dx_cyc);
      const Mat<T> dw_star_cycle =
          isf_backward(mapper, cache_cyc, dw_cyc.data, *grads);

      // main branch: image-space pulls plus the neighbouring pull
      Mat<T> dw_star = gen.generate_vjp(w_star, dx_star).data;
      dw_star += dw_star_cycle;
      if (nb_val > T(0)) {
        dw_star += (weights.nb * inv_b / nb_val) * (w_star.data - w.data);
      }
      isf_backward(mapper, cache_main, dw_star, *grads);

      // diversity branch
      const LatentCode<T> dw_div = gen.generate_vjp(w_div, dx_div);
      isf_backward(mapper, cache_div, dw_div.data, *grads);
    }
  }

  MapperEval<T> eval;
  eval.rf = pairwise_mean(std::span<const T>(rf_terms));
  eval.cls = pairwise_mean(std::span<const T>(cls_terms));
  eval.cont = pairwise_mean(std::span<const T>(cont_terms));
  eval.nb = pairwise_mean(std::span<const T>(nb_terms));
  eval.cyc = pairwise_mean(std::span<const T>(cyc_terms));
  eval.ds = pairwise_mean(std::span<const T>(ds_terms));
  eval.ds_w = wd;
  eval.total = weights.rf * eval.rf + weights.cls * eval.cls +
               weights.cont * eval.cont + weights.nb * eval.nb +
               weights.cyc * eval.cyc - wd * eval.ds;
  return eval;
}

// ---- training state and step ----------------------------------------------

template <class T>
struct TrainState {
  IsfParams<T> mapper;
  CriticParams<T> critic;
  AdamState<T> opt_mapper, opt_critic;
  Rng rng;
  int64_t iteration = 0;
  std::string config_digest;
  std::string generator_digest;
};

template <class T>
TrainState<T> init_train_state(const TrainConfig<T>& cfg,
                               const Generator<T>& gen) {
  cfg.validate();
  TrainState<T> st;
  st.rng = Rng(cfg.seed);
  st.mapper = init_isf_params<T>(cfg.dims, st.rng, cfg.norm_mode);
  st.critic = init_critic_params<T>(cfg.critic, st.rng);
  {
    std::vector<TensorRef<T>> refs;
    collect_tensors(st.mapper, refs);
    st.opt_mapper.init(total_size(refs));
  }
  {
    std::vector<TensorRef<T>> refs;
    collect_tensors(st.critic, refs);
    st.opt_critic.init(total_size(refs));
  }
  st.config_digest = cfg.config_digest;
  st.generator_digest = gen.param_digest();
  return st;
}

template <class T>
void check_finite_term(T value, const char* term, int64_t iteration) {
  if (!std::isfinite(value)) {
    throw TrainingAbort(term, iteration,
                        std::string("non-finite loss term '") + term +
                            "' at iteration " + std::to_string(iteration));
  }
}

// One alternating update: critic first on detached edits, then the mapper
// against the refreshed critic. Generator parameters are never touched.
template <class T>
LossReport<T> train_step(TrainState<T>& st,
                         const std::vector<std::pair<LatentCode<T>, AttributeVector<T>>>& batch,
                         const TrainConfig<T>& cfg, const Generator<T>& gen,
                         const Embedder<T>& perceptual) {
  const size_t B = batch.size();
  if (B == 0) throw InvalidArgument("train_step: empty batch");

  MapperBatch<T> mb;
  mb.w.reserve(B);
  mb.d0.reserve(B);
  for (const auto& [w, d0] : batch) {
    gen.check_latent(w);
    mb.w.push_back(w);
    mb.d0.push_back(d0);
  }
  for (size_t b = 0; b < B; ++b) {
    mb.d.push_back(sample_flip_targets(mb.d0[b], st.rng));
  }
  for (size_t b = 0; b < B; ++b) {
    mb.z.push_back(sample_noise<T>(cfg.dims.n, st.rng));
  }
  for (size_t b = 0; b < B; ++b) {
    mb.z2.push_back(sample_noise<T>(cfg.dims.n, st.rng));
  }
  for (size_t b = 0; b < B; ++b) {
    mb.z3.push_back(sample_noise<T>(cfg.dims.n, st.rng));
  }

  // critic update; edits are detached (no mapper gradients here)
  CriticBatch<T> cb;
  for (size_t b = 0; b < B; ++b) {
    cb.x_real.push_back(gen.generate(mb.w[b]));
    cb.d0.push_back(mb.d0[b]);
    const LatentCode<T> w_star = isf_forward(mb.w[b], mb.z[b], mb.d[b], st.mapper);
    cb.x_fake.push_back(gen.generate(w_star));
  }
  CriticGrads<T> cgrads = zero_critic_grads(st.critic);
  const CriticEval<T> ce =
      critic_objective(st.critic, cb, cfg.r1_gamma, cfg.weights.cls, &cgrads);
  check_finite_term(ce.adv, "adv_critic", st.iteration);
  check_finite_term(ce.cls, "cls_critic", st.iteration);
  {
    std::vector<TensorRef<T>> params, grads;
    collect_tensors(st.critic, params);
    collect_tensors(cgrads, grads);
    adam_step(params, grads, st.opt_critic, cfg.lr_critic, cfg.adam);
  }

  // mapper update against the refreshed critic, same z, fresh z2/z3
  IsfGrads<T> mgrads = zero_isf_grads(st.mapper);
  const MapperEval<T> me = mapper_objective(
      st.mapper, st.critic, gen, perceptual, mb, cfg.weights, st.iteration,
      cfg.total_iterations, &mgrads);
  check_finite_term(me.rf, "adv_mapper", st.iteration);
  check_finite_term(me.cls, "cls_mapper", st.iteration);
  check_finite_term(me.cont, "content", st.iteration);
  check_finite_term(me.nb, "neighbour", st.iteration);
  check_finite_term(me.cyc, "cycle", st.iteration);
  check_finite_term(me.ds, "diversity", st.iteration);
  check_finite_term(me.total, "total_mapper", st.iteration);
  {
    std::vector<TensorRef<T>> params, grads;
    collect_tensors(st.mapper, params);
    collect_tensors(mgrads, grads);
    adam_step(params, grads, st.opt_mapper, cfg.lr_mapper, cfg.adam);
  }

  LossReport<T> report;
  report.iteration = st.iteration;
  report.rf_critic = ce.adv;
  report.cls_critic = ce.cls;
  report.total_critic = ce.total;
  report.rf_mapper = me.rf;
  report.cls_mapper = me.cls;
  report.cont = me.cont;
  report.nb = me.nb;
  report.cyc = me.cyc;
  report.ds = me.ds;
  report.ds_weight = me.ds_w;
  report.total_mapper = me.total;

  st.iteration += 1;
  return report;
}

// ---- checkpoints ------------------------------------------------------------

template <class T>
nlohmann::json loss_report_to_json(const LossReport<T>& r) {
  return {{"iter", r.iteration},
          {"L_rf_D", double(r.rf_critic)},
          {"L_rf_M", double(r.rf_mapper)},
          {"L_cls_D", double(r.cls_critic)},
          {"L_cls_M", double(r.cls_mapper)},
          {"L_cont", double(r.cont)},
          {"L_nb", double(r.nb)},
          {"L_cyc", double(r.cyc)},
          {"L_ds", double(r.ds)},
          {"total_M", double(r.total_mapper)},
          {"total_D", double(r.total_critic)},
          {"ds_weight", double(r.ds_weight)}};
}

template <class T>
void save_checkpoint(const TrainState<T>& st, const TrainConfig<T>& cfg,
                     const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path tmp = dir.string() + ".tmp";
  try {
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    TrainState<T>& mut = const_cast<TrainState<T>&>(st);
    std::vector<TensorRef<T>> mapper_refs, critic_refs;
    collect_tensors(mut.mapper, mapper_refs);
    collect_tensors(mut.critic, critic_refs);
    save_tensors(tmp / "mapper", mapper_refs);
    save_tensors(tmp / "critic", critic_refs);

    auto opt_refs = [](AdamState<T>& o) {
      std::vector<TensorRef<T>> refs;
      refs.push_back({"m", o.m.data(), o.m.size(), 1});
      refs.push_back({"v", o.v.data(), o.v.size(), 1});
      return refs;
    };
    save_tensors(tmp / "opt_mapper", opt_refs(mut.opt_mapper));
    save_tensors(tmp / "opt_critic", opt_refs(mut.opt_critic));

    const auto rs = st.rng.state();
    nlohmann::json manifest = {
        {"schema_version", kSchemaVersion},
        {"iteration", st.iteration},
        {"config_digest", st.config_digest},
        {"generator_digest", st.generator_digest},
        {"rng_state", {rs[0], rs[1], rs[2], rs[3]}},
        {"opt_mapper_step", st.opt_mapper.step},
        {"opt_critic_step", st.opt_critic.step},
        {"mapper",
         {{"L", cfg.dims.L},
          {"C", cfg.dims.C},
          {"m", cfg.dims.m},
          {"n", cfg.dims.n},
          {"hidden", cfg.dims.hidden},
          {"depth", cfg.dims.depth},
          {"norm_mode", to_string(cfg.norm_mode)},
          {"eps", double(st.mapper.eps)}}},
        {"critic",
         {{"resolution", cfg.critic.resolution},
          {"m", cfg.critic.m},
          {"channels", cfg.critic.channels}}}};
    std::ofstream os(tmp / "manifest.json", std::ios::trunc);
    os << manifest.dump(2) << "\n";
    os.flush();
    if (!os) throw std::runtime_error("manifest write failed");

    fs::remove_all(dir);
    fs::rename(tmp, dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
}

template <class T>
std::pair<TrainState<T>, TrainConfig<T>> load_checkpoint(
    const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw InvalidCheckpoint("missing manifest: " + dir.string());
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidCheckpoint(std::string("bad checkpoint manifest: ") + e.what());
  }

  TrainState<T> st;
  TrainConfig<T> cfg;
  try {
    st.iteration = manifest.at("iteration").get<int64_t>();
    st.config_digest = manifest.at("config_digest").get<std::string>();
    st.generator_digest = manifest.at("generator_digest").get<std::string>();
    const auto rs = manifest.at("rng_state").get<std::array<uint64_t, 4>>();
    st.rng.set_state(rs);

    const auto& mj = manifest.at("mapper");
    cfg.dims.L = mj.at("L").get<int>();
    cfg.dims.C = mj.at("C").get<int>();
    cfg.dims.m = mj.at("m").get<int>();
    cfg.dims.n = mj.at("n").get<int>();
    cfg.dims.hidden = mj.at("hidden").get<int>();
    cfg.dims.depth = mj.at("depth").get<int>();
    cfg.norm_mode = norm_mode_from_string(mj.at("norm_mode").get<std::string>());

    const auto& cj = manifest.at("critic");
    cfg.critic.resolution = cj.at("resolution").get<int>();
    cfg.critic.m = cj.at("m").get<int>();
    cfg.critic.channels = cj.at("channels").get<std::vector<int>>();

    Rng dummy(0);
    st.mapper = init_isf_params<T>(cfg.dims, dummy, cfg.norm_mode);
    st.mapper.eps = T(mj.at("eps").get<double>());
    st.critic = init_critic_params<T>(cfg.critic, dummy);

    std::vector<TensorRef<T>> mapper_refs, critic_refs;
    collect_tensors(st.mapper, mapper_refs);
    collect_tensors(st.critic, critic_refs);
    load_tensors(dir / "mapper", mapper_refs);
    load_tensors(dir / "critic", critic_refs);

    st.opt_mapper.init(total_size(mapper_refs));
    st.opt_critic.init(total_size(critic_refs));
    st.opt_mapper.step = manifest.at("opt_mapper_step").get<int64_t>();
    st.opt_critic.step = manifest.at("opt_critic_step").get<int64_t>();
    auto opt_refs = [](AdamState<T>& o) {
      std::vector<TensorRef<T>> refs;
      refs.push_back({"m", o.m.data(), o.m.size(), 1});
      refs.push_back({"v", o.v.data(), o.v.size(), 1});
      return refs;
    };
    load_tensors(dir / "opt_mapper", opt_refs(st.opt_mapper));
    load_tensors(dir / "opt_critic", opt_refs(st.opt_critic));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidCheckpoint(std::string("checkpoint field error: ") + e.what());
  }
  return {std::move(st), std::move(cfg)};
}

// true iff both checkpoints trained against the identical frozen generator
inline bool verify_frozen(const std::string& digest_a,
                          const std::string& digest_b) {
  if (digest_a.empty() || digest_b.empty()) {
    throw InvalidCheckpoint("verify_frozen: missing generator digest");
  }
  return digest_a == digest_b;
}

// ---- full run ---------------------------------------------------------------

template <class T>
struct RunHooks {
  std::function<void(const LossReport<T>&)> on_log;
  std::filesystem::path out_dir;  // when set: logs.jsonl + checkpoints
};

template <class T>
TrainState<T> run_training(const TrainConfig<T>& cfg,
                           const LatentDataset<T>& ds, const Generator<T>& gen,
                           const Embedder<T>& perceptual,
                           const RunHooks<T>& hooks = {},
                           std::optional<TrainState<T>> resume = {}) {
  cfg.validate();
  if (ds.train_idx.empty()) {
    throw InvalidArgument("run_training: dataset has no training rows");
  }

  TrainState<T> st = resume ? std::move(*resume)
                            : init_train_state<T>(cfg, gen);
  if (resume && st.generator_digest != gen.param_digest()) {
    throw InvalidCheckpoint("resume: generator digest differs from checkpoint");
  }

  const bool to_disk = !hooks.out_dir.empty();
  std::ofstream log_stream;
  if (to_disk) {
    std::filesystem::create_directories(hooks.out_dir);
    log_stream.open(hooks.out_dir / "logs.jsonl",
                    st.iteration == 0 ? std::ios::trunc : std::ios::app);
    if (!log_stream) {
      throw std::runtime_error("cannot open training log for writing");
    }
  }

  while (st.iteration < cfg.total_iterations) {
    std::vector<std::pair<LatentCode<T>, AttributeVector<T>>> batch;
    batch.reserve(size_t(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int64_t row = ds.train_idx[size_t(
          st.rng.uniform_index(uint64_t(ds.train_idx.size())))];
      batch.emplace_back(ds.code(row), ds.label(row));
    }
    const LossReport<T> report = train_step(st, batch, cfg, gen, perceptual);

    if ((report.iteration % cfg.log_every) == 0) {
      if (hooks.on_log) hooks.on_log(report);
      if (to_disk) {
        log_stream << loss_report_to_json(report).dump() << "\n";
        log_stream.flush();
        if (!log_stream) throw std::runtime_error("training log write failed");
      }
    }
    if (to_disk && cfg.checkpoint_every > 0 &&
        (st.iteration % cfg.checkpoint_every) == 0 &&
        st.iteration < cfg.total_iterations) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_%08lld",
                    static_cast<long long>(st.iteration));
      save_checkpoint(st, cfg, hooks.out_dir / name);
    }
  }

  if (to_disk) {
    save_checkpoint(st, cfg, hooks.out_dir / "ckpt_final");
  }
  return st;
}

}  // namespace isf
