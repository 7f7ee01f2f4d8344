#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "isf/evaluation.hpp"
#include "isf/registry.hpp"
#include "isf/trainer.hpp"

namespace isf {

// Parsed experiment configuration. validate_config_json mirrors the JSON
// schema shipped in schema/experiment_config.schema.json; both change
// together.
template <class T>
struct ExperimentConfig {
  nlohmann::json raw;
  uint64_t seed = 7;
  std::filesystem::path output_dir;
  int64_t dataset_n = 512;
  double split_fraction = 0.8;
  TrainConfig<T> train;
  MetricsProtocol metrics;
  std::string digest;  // sha256 of the canonical config dump
};

namespace config_detail {

inline void expect(std::vector<std::string>& errors, bool ok,
                   const std::string& msg) {
  if (!ok) errors.push_back(msg);
}

inline bool is_uint(const nlohmann::json& j) {
  return j.is_number_unsigned() || (j.is_number_integer() && j.get<int64_t>() >= 0);
}

}  // namespace config_detail

// Structural validation before any work starts; returns human-readable
// problems, empty when the document is valid.
inline std::vector<std::string> validate_config_json(const nlohmann::json& c) {
  using config_detail::expect;
  using config_detail::is_uint;
  std::vector<std::string> errors;

  if (!c.is_object()) {
    errors.push_back("config: top level must be an object");
    return errors;
  }

  for (const char* key : {"generator", "classifier", "embedders"}) {
    expect(errors, c.contains(key) && c.at(key).is_object(),
           std::string("config: missing object '") + key + "'");
  }
  if (c.contains("generator") && c.at("generator").is_object()) {
    expect(errors, c.at("generator").contains("kind"),
           "config: generator.kind is required");
  }
  if (c.contains("classifier") && c.at("classifier").is_object()) {
    expect(errors, c.at("classifier").contains("kind"),
           "config: classifier.kind is required");
  }
  if (c.contains("embedders") && c.at("embedders").is_object()) {
    for (const char* role : {"perceptual", "identity"}) {
      expect(errors,
             c.at("embedders").contains(role) &&
                 c.at("embedders").at(role).is_object() &&
                 c.at("embedders").at(role).contains("kind"),
             std::string("config: embedders.") + role + ".kind is required");
    }
  }
  expect(errors, c.contains("output_dir") && c.at("output_dir").is_string(),
         "config: output_dir (string) is required");
  expect(errors, !c.contains("seed") || is_uint(c.at("seed")),
         "config: seed must be a non-negative integer");

  if (c.contains("dataset")) {
    const auto& d = c.at("dataset");
    expect(errors, d.is_object(), "config: dataset must be an object");
    if (d.is_object()) {
      expect(errors,
             !d.contains("n_total") ||
                 (is_uint(d.at("n_total")) && d.at("n_total").get<int64_t>() >= 2),
             "config: dataset.n_total must be an integer >= 2");
      if (d.contains("split_fraction")) {
        const bool ok = d.at("split_fraction").is_number() &&
                        d.at("split_fraction").get<double>() > 0.0 &&
                        d.at("split_fraction").get<double>() < 1.0;
        expect(errors, ok, "config: dataset.split_fraction must be in (0,1)");
      }
    }
  }

  if (c.contains("train")) {
    const auto& t = c.at("train");
    expect(errors, t.is_object(), "config: train must be an object");
    if (t.is_object()) {
      auto nonneg_number = [&](const char* key) {
        if (!t.contains(key)) return;
        const bool ok = t.at(key).is_number() && t.at(key).get<double>() >= 0.0;
        expect(errors, ok,
               std::string("config: train.") + key + " must be a number >= 0");
      };
      nonneg_number("lr_mapper");
      nonneg_number("lr_critic");
      nonneg_number("r1_gamma");
      expect(errors,
             !t.contains("total_iterations") || is_uint(t.at("total_iterations")),
             "config: train.total_iterations must be a non-negative integer");
      expect(errors,
             !t.contains("batch_size") ||
                 (is_uint(t.at("batch_size")) &&
                  t.at("batch_size").get<int64_t>() >= 1),
             "config: train.batch_size must be an integer >= 1");
      if (t.contains("weights")) {
        expect(errors, t.at("weights").is_object(),
               "config: train.weights must be an object");
        if (t.at("weights").is_object()) {
          for (auto& [k, v] : t.at("weights").items()) {
            expect(errors, v.is_number() && v.get<double>() >= 0.0,
                   "config: train.weights." + k + " must be a number >= 0");
          }
        }
      }
      if (t.contains("mapper") && t.at("mapper").contains("norm_mode")) {
        const auto mode = t.at("mapper").at("norm_mode");
        const bool ok = mode.is_string() &&
                        (mode == "layer" || mode == "per_row" ||
                         mode == "per_channel");
        expect(errors, ok,
               "config: train.mapper.norm_mode must be layer|per_row|per_channel");
      }
    }
  }

  if (c.contains("metrics")) {
    const auto& m = c.at("metrics");
    expect(errors, m.is_object(), "config: metrics must be an object");
    if (m.is_object() && m.contains("ppl_epsilon")) {
      expect(errors,
             m.at("ppl_epsilon").is_number() &&
                 m.at("ppl_epsilon").get<double>() > 0.0,
             "config: metrics.ppl_epsilon must be > 0");
    }
  }
  return errors;
}

template <class T>
ExperimentConfig<T> parse_experiment_config(const nlohmann::json& c) {
  const auto errors = validate_config_json(c);
  if (!errors.empty()) {
    std::string joined;
    for (const auto& e : errors) joined += e + "; ";
    throw InvalidArgument("invalid config: " + joined);
  }

  ExperimentConfig<T> cfg;
  cfg.raw = c;
  cfg.seed = c.value("seed", uint64_t(7));
  cfg.output_dir = c.at("output_dir").get<std::string>();
  if (const char* root = std::getenv("ISF_OUTPUT_ROOT")) {
    cfg.output_dir = std::filesystem::path(root);
  }

  if (c.contains("dataset")) {
    const auto& d = c.at("dataset");
    cfg.dataset_n = d.value("n_total", cfg.dataset_n);
    cfg.split_fraction = d.value("split_fraction", cfg.split_fraction);
  }

  auto& t = cfg.train;
  t.seed = cfg.seed;
  if (c.contains("train")) {
    const auto& j = c.at("train");
    t.total_iterations = j.value("total_iterations", t.total_iterations);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.lr_mapper = T(j.value("lr_mapper", double(t.lr_mapper)));
    t.lr_critic = T(j.value("lr_critic", double(t.lr_critic)));
    t.r1_gamma = T(j.value("r1_gamma", double(t.r1_gamma)));
    t.checkpoint_every = j.value("checkpoint_every", t.checkpoint_every);
    t.log_every = j.value("log_every", t.log_every);
    t.seed = j.value("seed", t.seed);
    if (j.contains("adam")) {
      const auto& a = j.at("adam");
      t.adam.beta1 = T(a.value("beta1", double(t.adam.beta1)));
      t.adam.beta2 = T(a.value("beta2", double(t.adam.beta2)));
      t.adam.eps = T(a.value("eps", double(t.adam.eps)));
    }
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      t.weights.rf = T(w.value("rf", double(t.weights.rf)));
      t.weights.cls = T(w.value("cls", double(t.weights.cls)));
      t.weights.cont = T(w.value("cont", double(t.weights.cont)));
      t.weights.nb = T(w.value("nb", double(t.weights.nb)));
      t.weights.cyc = T(w.value("cyc", double(t.weights.cyc)));
      t.weights.ds = T(w.value("ds", double(t.weights.ds)));
    }
    if (j.contains("mapper")) {
      const auto& mj = j.at("mapper");
      t.dims.n = mj.value("n", t.dims.n);
      t.dims.hidden = mj.value("hidden", t.dims.hidden);
      t.dims.depth = mj.value("depth", t.dims.depth);
      t.norm_mode =
          norm_mode_from_string(mj.value("norm_mode", std::string("layer")));
    }
  }

  cfg.metrics.seed = cfg.seed + 0x9e3779b9u;
  if (c.contains("metrics")) {
    const auto& m = c.at("metrics");
    cfg.metrics.n_eval = m.value("n_eval", cfg.metrics.n_eval);
    cfg.metrics.n_div_inputs = m.value("n_div_inputs", cfg.metrics.n_div_inputs);
    cfg.metrics.n_div_samples =
        m.value("n_div_samples", cfg.metrics.n_div_samples);
    cfg.metrics.path_steps = m.value("path_steps", cfg.metrics.path_steps);
    cfg.metrics.ppl_epsilon = m.value("ppl_epsilon", cfg.metrics.ppl_epsilon);
    cfg.metrics.pir_eps_stab = m.value("pir_eps_stab", cfg.metrics.pir_eps_stab);
    cfg.metrics.seed = m.value("seed", cfg.metrics.seed);
  }

  cfg.digest = sha256_hex(c.dump());
  return cfg;
}

// Latent/attribute dimensions and the critic resolution come from the
// instantiated handles; the config may narrow the critic.
template <class T>
void bind_handle_dims(ExperimentConfig<T>& cfg, const HandleSet<T>& handles) {
  const auto [L, C] = handles.generator->latent_shape();
  const auto [H, W] = handles.generator->resolution();
  cfg.train.dims.L = L;
  cfg.train.dims.C = C;
  cfg.train.dims.m = handles.classifier->num_attributes();

  int resolution = H;
  int base = 32;
  if (cfg.raw.contains("train") && cfg.raw.at("train").contains("critic")) {
    const auto& cj = cfg.raw.at("train").at("critic");
    resolution = cj.value("resolution", resolution);
    base = cj.value("base_channels", base);
  }
  cfg.train.critic =
      default_critic_config(resolution, cfg.train.dims.m, base);
  cfg.train.validate();
  cfg.metrics.validate();
}

template <class T>
ExperimentConfig<T> load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open config: " + path.string());
  nlohmann::json c;
  try {
    is >> c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_experiment_config<T>(c);
}

}  // namespace isf
