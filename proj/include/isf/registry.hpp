#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "isf/toy.hpp"

namespace isf {

// Generator/classifier/embedder plugins register by name and are selected
// through the experiment config. Toy components share one ToyStack built
// from the generator spec; the stack pointer is threaded through factories
// so classifier and identity embedder bind to the same frozen parameters.
template <class T>
struct HandleSet {
  std::shared_ptr<const ToyStack> stack;  // non-null when any toy component
  std::unique_ptr<Generator<T>> generator;
  std::unique_ptr<AttributeClassifier<T>> classifier;
  std::unique_ptr<Embedder<T>> perceptual;
  std::unique_ptr<Embedder<T>> identity;
};

template <class T>
struct PluginRegistry {
  using StackPtr = std::shared_ptr<const ToyStack>;
  std::map<std::string,
           std::function<std::unique_ptr<Generator<T>>(const nlohmann::json&,
                                                       const StackPtr&)>>
      generators;
  std::map<std::string, std::function<std::unique_ptr<AttributeClassifier<T>>(
                            const nlohmann::json&, const StackPtr&)>>
      classifiers;
  std::map<std::string,
           std::function<std::unique_ptr<Embedder<T>>(const nlohmann::json&,
                                                      const StackPtr&)>>
      embedders;
};

inline ToyStack::Config toy_config_from_json(const nlohmann::json& spec) {
  ToyStack::Config cfg;
  cfg.seed = spec.value("seed", cfg.seed);
  cfg.m = spec.value("m", cfg.m);
  cfg.k = spec.value("k", cfg.k);
  cfg.L = spec.value("L", cfg.L);
  cfg.C = spec.value("C", cfg.C);
  cfg.texture_amp = spec.value("texture_amp", cfg.texture_amp);
  cfg.sharpness = spec.value("sharpness", cfg.sharpness);
  return cfg;
}

template <class T>
PluginRegistry<T>& plugin_registry() {
  static PluginRegistry<T> reg = [] {
    PluginRegistry<T> r;
    using StackPtr = std::shared_ptr<const ToyStack>;

    r.generators["toy"] = [](const nlohmann::json&, const StackPtr& stack) {
      if (!stack) throw InvalidArgument("toy generator needs a toy stack");
      return std::make_unique<ToyGenerator<T>>(stack);
    };
    r.generators["identity"] = [](const nlohmann::json& spec, const StackPtr&) {
      return std::make_unique<IdentityGenerator<T>>(spec.value("L", 4),
                                                    spec.value("C", 12));
    };

    r.classifiers["toy"] = [](const nlohmann::json&, const StackPtr& stack) {
      if (!stack) throw InvalidArgument("toy classifier needs a toy stack");
      return std::make_unique<ToyClassifier<T>>(stack);
    };

    r.embedders["toy-perceptual"] = [](const nlohmann::json& spec,
                                       const StackPtr&) {
      return std::make_unique<ToyPerceptualEmbedder<T>>(
          spec.value("seed", uint64_t(1001)), spec.value("height", 32),
          spec.value("width", 32), spec.value("out_dim", 64));
    };
    r.embedders["toy-identity"] = [](const nlohmann::json&,
                                     const StackPtr& stack) {
      if (!stack) throw InvalidArgument("toy identity embedder needs a toy stack");
      return std::make_unique<ToyIdentityEmbedder<T>>(stack);
    };
    r.embedders["pixel"] = [](const nlohmann::json&, const StackPtr&) {
      return std::make_unique<PixelEmbedder<T>>();
    };
    return r;
  }();
  return reg;
}

template <class T>
HandleSet<T> make_handles(const nlohmann::json& config) {
  auto& reg = plugin_registry<T>();
  HandleSet<T> handles;

  const auto& gen_spec = config.at("generator");
  const auto& cls_spec = config.at("classifier");
  const auto& emb_specs = config.at("embedders");
  const auto& percep_spec = emb_specs.at("perceptual");
  const auto& ident_spec = emb_specs.at("identity");

  auto kind_of = [](const nlohmann::json& spec) {
    return spec.at("kind").template get<std::string>();
  };

  // one shared stack whenever any component is toy; the generator spec wins
  const bool any_toy =
      kind_of(gen_spec) == "toy" || kind_of(cls_spec) == "toy" ||
      kind_of(percep_spec) == "toy-identity" ||
      kind_of(ident_spec) == "toy-identity";
  if (any_toy) {
    const nlohmann::json& stack_spec =
        kind_of(gen_spec) == "toy" ? gen_spec : cls_spec;
    handles.stack =
        std::make_shared<const ToyStack>(toy_config_from_json(stack_spec));
  }

  auto lookup = [](const auto& table, const std::string& kind,
                   const char* what) -> const auto& {
    const auto it = table.find(kind);
    if (it == table.end()) {
      throw InvalidArgument(std::string("unknown ") + what + " kind: " + kind);
    }
    return it->second;
  };

  handles.generator =
      lookup(reg.generators, kind_of(gen_spec), "generator")(gen_spec,
                                                             handles.stack);
  handles.classifier =
      lookup(reg.classifiers, kind_of(cls_spec), "classifier")(cls_spec,
                                                               handles.stack);
  handles.perceptual = lookup(reg.embedders, kind_of(percep_spec),
                              "embedder")(percep_spec, handles.stack);
  handles.identity = lookup(reg.embedders, kind_of(ident_spec),
                            "embedder")(ident_spec, handles.stack);
  return handles;
}

}  // namespace isf
