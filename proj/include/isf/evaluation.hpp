#pragma once

#include "isf/dataset.hpp"
#include "isf/editing.hpp"
#include "isf/metrics.hpp"

namespace isf {

struct MetricsProtocol {
  int n_eval = 200;        // evaluated edits (frs, accuracy, frechet, pir, ppl)
  int n_div_inputs = 100;  // inputs for the diversity protocol
  int n_div_samples = 10;  // edits per input for the diversity protocol
  int path_steps = 10;     // T for interpolation paths
  double ppl_epsilon = 1e-4;
  double pir_eps_stab = 1e-6;
  uint64_t seed = 1234;

  void validate() const {
    if (n_eval < 2 || n_div_inputs < 1 || n_div_samples < 2 || path_steps < 2) {
      throw InvalidArgument("metrics protocol: counts out of range");
    }
    if (!(ppl_epsilon > 0.0) || pir_eps_stab < 0.0) {
      throw InvalidArgument("metrics protocol: bad epsilon");
    }
  }
};

// Full evaluation pass over held-out codes: round-robin single-attribute
// flips, one edit per code, every metric computed on the same edit set.
// Deterministic given the protocol seed.
template <class T>
MetricsReport<T> run_metrics_protocol(const LatentDataset<T>& ds,
                                      const IsfParams<T>& mapper,
                                      const Generator<T>& gen,
                                      const AttributeClassifier<T>& classifier,
                                      const Embedder<T>& perceptual,
                                      const Embedder<T>& identity,
                                      const MetricsProtocol& proto,
                                      std::vector<double>* per_path_pir = nullptr) {
  proto.validate();
  if (ds.test_idx.empty()) {
    throw InvalidArgument("metrics protocol: dataset has no test split");
  }
  const int m = classifier.num_attributes();
  Rng rng(proto.seed);

  std::vector<double> frs_vals, pir_vals;
  std::vector<EditEval<T>> edit_evals;
  std::vector<Vec<T>> real_feats, edit_feats;
  std::vector<std::pair<LatentCode<T>, LatentCode<T>>> ppl_pairs;
  std::vector<std::pair<LatentCode<T>, AttributeVector<T>>> div_inputs;

  for (int i = 0; i < proto.n_eval; ++i) {
    const int64_t row = ds.test_idx[size_t(i) % ds.test_idx.size()];
    const LatentCode<T> w = ds.code(row);
    const int attr = i % m;

    AttributeVector<T> d = ds.label(row).binarized();
    d.values[attr] = T(1) - d.values[attr];

    const auto z = sample_noise<T>(mapper.dims.n, rng);
    const LatentCode<T> w_star = isf_forward(w, z, d, mapper);
    const ImageTensor<T> x = gen.generate(w);
    const ImageTensor<T> x_star = gen.generate(w_star);

    frs_vals.push_back(frs(x, x_star, identity));

    std::vector<bool> requested(size_t(m), false);
    requested[size_t(attr)] = true;
    edit_evals.push_back({x_star, d, std::move(requested)});

    real_feats.push_back(perceptual.embed(x));
    edit_feats.push_back(perceptual.embed(x_star));
    ppl_pairs.emplace_back(w, w_star);
    pir_vals.push_back(
        pir(build_path(w, w_star, proto.path_steps, attr), gen, perceptual,
            proto.pir_eps_stab));
    if (int(div_inputs.size()) < proto.n_div_inputs) {
      div_inputs.emplace_back(w, d);
    }
  }

  if (per_path_pir) *per_path_pir = pir_vals;

  MetricsReport<T> report;
  report.values["frs"] = pairwise_mean(std::span<const double>(frs_vals));
  report.values["pir"] = pairwise_mean(std::span<const double>(pir_vals));
  report.values["ppl"] =
      ppl(std::span<const std::pair<LatentCode<T>, LatentCode<T>>>(ppl_pairs),
          gen, perceptual, proto.ppl_epsilon, rng);
  report.values["diversity"] = diversity_score(
      std::span<const std::pair<LatentCode<T>, AttributeVector<T>>>(div_inputs),
      gen, mapper, perceptual, proto.n_div_samples, rng);
  report.values["frechet"] =
      frechet_distance(stack_features(real_feats), stack_features(edit_feats));

  const AccuracyReport acc = attribute_accuracy(
      std::span<const EditEval<T>>(edit_evals), classifier);
  report.values["mAcc"] = acc.mean_accuracy;
  for (int j = 0; j < m; ++j) {
    report.values["acc_" + std::to_string(j)] = acc.per_attribute[j];
  }

  report.metadata = {{"schema_version", kSchemaVersion},
                     {"n_eval", proto.n_eval},
                     {"n_div_inputs", int(div_inputs.size())},
                     {"n_div_samples", proto.n_div_samples},
                     {"path_steps", proto.path_steps},
                     {"ppl_epsilon", proto.ppl_epsilon},
                     {"pir_eps_stab", proto.pir_eps_stab},
                     {"seed", proto.seed},
                     {"generator", gen.name()},
                     {"generator_digest", gen.param_digest()},
                     {"classifier", classifier.name()},
                     {"perceptual_embedder", perceptual.name()},
                     {"identity_embedder", identity.name()}};
  return report;
}

}  // namespace isf
