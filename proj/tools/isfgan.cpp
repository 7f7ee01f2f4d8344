// Command-line front end: dataset building, training, editing,
// interpolation, evaluation, and the ablation harness, all driven by one
// JSON experiment config. Exit codes: 0 success, 2 config/spec violation,
// 3 runtime failure; failures emit one machine-readable JSON line.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "isf.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using Scalar = float;

namespace {

struct CliError : std::runtime_error {
  int exit_code;
  CliError(int code, const std::string& msg)
      : std::runtime_error(msg), exit_code(code) {}
};

void emit_error(const std::string& type, const std::string& message,
                const std::string& term = "") {
  json err = {{"error", {{"type", type}, {"message", message}}}};
  if (!term.empty()) err["error"]["term"] = term;
  std::cout << err.dump() << "\n";
}

struct Workspace {
  isf::ExperimentConfig<Scalar> config;
  isf::HandleSet<Scalar> handles;
  fs::path root;
};

Workspace open_workspace(const std::string& config_path) {
  Workspace ws;
  ws.config = isf::load_experiment_config<Scalar>(config_path);
  ws.handles = isf::make_handles<Scalar>(ws.config.raw);
  isf::bind_handle_dims(ws.config, ws.handles);
  ws.config.train.config_digest = ws.config.digest;
  ws.root = ws.config.output_dir;
  return ws;
}

fs::path dataset_dir(const Workspace& ws) { return ws.root / "dataset"; }
fs::path train_dir(const Workspace& ws) { return ws.root / "train"; }

isf::LatentDataset<Scalar> build_and_save_dataset(const Workspace& ws) {
  isf::Rng rng(ws.config.seed);
  auto ds = isf::build_dataset(*ws.handles.generator, *ws.handles.classifier,
                               ws.config.dataset_n, ws.config.split_fraction,
                               rng, ws.config.seed);
  isf::save_dataset(ds, dataset_dir(ws));
  return ds;
}

isf::LatentDataset<Scalar> ensure_dataset(const Workspace& ws) {
  if (fs::exists(dataset_dir(ws) / "manifest.json")) {
    return isf::load_dataset<Scalar>(dataset_dir(ws));
  }
  return build_and_save_dataset(ws);
}

isf::TrainState<Scalar> load_mapper_checkpoint(const Workspace& ws,
                                               const std::string& override_dir) {
  const fs::path dir = override_dir.empty()
                           ? train_dir(ws) / "ckpt_final"
                           : fs::path(override_dir);
  if (!fs::exists(dir / "manifest.json")) {
    throw CliError(2, "checkpoint not found: " + dir.string());
  }
  auto [state, cfg] = isf::load_checkpoint<Scalar>(dir);
  if (!state.config_digest.empty() && state.config_digest != ws.config.digest) {
    throw CliError(3, "checkpoint was trained under a different config");
  }
  return std::move(state);
}

// "train:IDX" or "test:IDX"
int64_t resolve_code_ref(const isf::LatentDataset<Scalar>& ds,
                         const std::string& ref) {
  const auto colon = ref.find(':');
  if (colon == std::string::npos) {
    throw CliError(2, "code ref must look like train:3 or test:0, got " + ref);
  }
  const std::string split = ref.substr(0, colon);
  int64_t idx = -1;
  try {
    idx = std::stoll(ref.substr(colon + 1));
  } catch (const std::exception&) {
    throw CliError(2, "bad code index in ref: " + ref);
  }
  const auto& pool = split == "train" ? ds.train_idx
                     : split == "test" ? ds.test_idx
                                       : throw CliError(2, "bad split in ref: " + ref);
  if (idx < 0 || idx >= int64_t(pool.size())) {
    throw CliError(2, "code index out of range: " + ref);
  }
  return pool[size_t(idx)];
}

isf::AttributeVector<Scalar> apply_targets(
    const isf::AttributeVector<Scalar>& d0, const std::vector<int>& flips,
    const std::vector<std::pair<int, int>>& sets) {
  isf::AttributeVector<Scalar> d = d0.binarized();
  for (int attr : flips) {
    if (attr < 0 || attr >= int(d.size())) {
      throw CliError(2, "flip attribute out of range: " + std::to_string(attr));
    }
    d.values[attr] = Scalar(1) - d.values[attr];
  }
  for (const auto& [attr, value] : sets) {
    if (attr < 0 || attr >= int(d.size()) || (value != 0 && value != 1)) {
      throw CliError(2, "bad --set entry");
    }
    d.values[attr] = Scalar(value);
  }
  return d;
}

std::vector<std::pair<int, int>> parse_sets(const std::vector<std::string>& raw) {
  std::vector<std::pair<int, int>> sets;
  for (const auto& s : raw) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw CliError(2, "--set expects ATTR=BIT");
    try {
      sets.emplace_back(std::stoi(s.substr(0, eq)), std::stoi(s.substr(eq + 1)));
    } catch (const std::exception&) {
      throw CliError(2, "--set expects integers: " + s);
    }
  }
  return sets;
}

json code_to_json(const isf::LatentCode<Scalar>& w) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < w.cols(); ++j) row.push_back(w.data(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vec_to_json(const isf::Vec<Scalar>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  os << j.dump(2) << "\n";
  os.flush();
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

// ---- verbs -----------------------------------------------------------------

int cmd_build_dataset(const std::string& config_path) {
  const Workspace ws = open_workspace(config_path);
  build_and_save_dataset(ws);
  std::cout << json{{"dataset", dataset_dir(ws).string()}}.dump() << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& resume_dir) {
  const Workspace ws = open_workspace(config_path);
  const auto ds = ensure_dataset(ws);

  std::optional<isf::TrainState<Scalar>> resume;
  if (!resume_dir.empty()) {
    resume = load_mapper_checkpoint(ws, resume_dir);
  }

  isf::RunHooks<Scalar> hooks;
  hooks.out_dir = train_dir(ws);
  const auto state =
      isf::run_training(ws.config.train, ds, *ws.handles.generator,
                        *ws.handles.perceptual, hooks, std::move(resume));
  std::cout << json{{"checkpoint", (train_dir(ws) / "ckpt_final").string()},
                    {"iterations", state.iteration},
                    {"generator_digest", state.generator_digest}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_edit(const std::string& config_path, const std::string& ckpt_dir,
             const std::string& code_ref, const std::vector<int>& flips,
             const std::vector<std::string>& raw_sets, int count,
             uint64_t z_seed, const std::string& tag) {
  if (count < 1) throw CliError(2, "--count must be >= 1");
  const Workspace ws = open_workspace(config_path);
  const auto ds = ensure_dataset(ws);
  const auto state = load_mapper_checkpoint(ws, ckpt_dir);

  const int64_t row = resolve_code_ref(ds, code_ref);
  const auto w = ds.code(row);
  const auto d0 = ds.label(row);
  const auto d = apply_targets(d0, flips, parse_sets(raw_sets));

  isf::Rng rng(z_seed);
  const auto edits = isf::sample_modes(w, d, count, state.mapper, rng);

  std::vector<isf::ImageTensor<Scalar>> tiles;
  tiles.push_back(ws.handles.generator->generate(w));
  json sidecar_edits = json::array();
  for (const auto& e : edits) {
    tiles.push_back(ws.handles.generator->generate(e.code));
    sidecar_edits.push_back(
        {{"z", vec_to_json(e.z.values)}, {"code", code_to_json(e.code)}});
  }

  const fs::path out = ws.root / "edits";
  fs::create_directories(out);
  const std::string name = tag.empty() ? "edit" : tag;
  isf::write_png_strip(out / (name + ".png"),
                       std::span<const isf::ImageTensor<Scalar>>(tiles));
  write_json(out / (name + ".json"),
             {{"schema_version", isf::kSchemaVersion},
              {"code_ref", code_ref},
              {"source_code", code_to_json(w)},
              {"source_label", vec_to_json(d0.values)},
              {"target", vec_to_json(d.values)},
              {"z_seed", z_seed},
              {"layout", "source then edits, left to right"},
              {"edits", sidecar_edits}});
  std::cout << json{{"grid", (out / (name + ".png")).string()},
                    {"sidecar", (out / (name + ".json")).string()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_interpolate(const std::string& config_path, const std::string& ckpt_dir,
                    const std::string& src_ref, const std::string& dst_ref,
                    const std::vector<int>& flips, int steps, uint64_t z_seed,
                    const std::string& tag) {
  if (steps < 2) throw CliError(2, "--steps must be >= 2");
  if (dst_ref.empty() && flips.empty()) {
    throw CliError(2, "need either --dst or --flip to define the far endpoint");
  }
  const Workspace ws = open_workspace(config_path);
  const auto ds = ensure_dataset(ws);
  const auto state = load_mapper_checkpoint(ws, ckpt_dir);

  const auto w_src = ds.code(resolve_code_ref(ds, src_ref));
  isf::LatentCode<Scalar> w_dst;
  json endpoint_meta;
  int attr_tag = -1;
  if (!dst_ref.empty()) {
    w_dst = ds.code(resolve_code_ref(ds, dst_ref));
    endpoint_meta = {{"dst_ref", dst_ref}};
  } else {
    const auto d0 = ds.label(resolve_code_ref(ds, src_ref));
    const auto d = apply_targets(d0, flips, {});
    isf::Rng rng(z_seed);
    const auto edit =
        isf::manipulate<Scalar>(w_src, d, std::nullopt, state.mapper, &rng);
    w_dst = edit.code;
    attr_tag = flips.front();
    endpoint_meta = {{"flips", flips},
                     {"target", vec_to_json(d.values)},
                     {"z", vec_to_json(edit.z.values)}};
  }

  const auto path = isf::build_path(w_src, w_dst, steps, attr_tag);
  std::vector<isf::ImageTensor<Scalar>> tiles;
  json codes = json::array();
  for (const auto& c : path.codes) {
    tiles.push_back(ws.handles.generator->generate(c));
    codes.push_back(code_to_json(c));
  }

  const fs::path out = ws.root / "interp";
  fs::create_directories(out);
  const std::string name = tag.empty() ? "path" : tag;
  isf::write_png_strip(out / (name + ".png"),
                       std::span<const isf::ImageTensor<Scalar>>(tiles));
  write_json(out / (name + ".json"),
             {{"schema_version", isf::kSchemaVersion},
              {"src_ref", src_ref},
              {"endpoint", endpoint_meta},
              {"steps", steps},
              {"codes", codes}});
  std::cout << json{{"strip", (out / (name + ".png")).string()},
                    {"sidecar", (out / (name + ".json")).string()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& ckpt_dir,
                 const std::string& out_override) {
  const Workspace ws = open_workspace(config_path);
  const auto ds = ensure_dataset(ws);
  const auto state = load_mapper_checkpoint(ws, ckpt_dir);

  std::vector<double> per_path;
  const auto report = isf::run_metrics_protocol(
      ds, state.mapper, *ws.handles.generator, *ws.handles.classifier,
      *ws.handles.perceptual, *ws.handles.identity, ws.config.metrics,
      &per_path);

  const fs::path out_dir = ws.root / "eval";
  fs::create_directories(out_dir);
  const fs::path report_path =
      out_override.empty() ? out_dir / "report.json" : fs::path(out_override);
  write_json(report_path, report.to_json());

  std::ofstream csv(out_dir / "pir_paths.csv", std::ios::trunc);
  csv << "path_index,pir\n";
  for (size_t i = 0; i < per_path.size(); ++i) {
    csv << i << "," << per_path[i] << "\n";
  }

  std::cout << report.to_json().dump() << "\n";
  return 0;
}

struct AblationVariant {
  std::string name;
  std::string ablation;  // none|no_nb|no_cont|adain|per_row
  std::optional<double> lambda_ds;
};

int cmd_ablate(const std::string& config_path, const std::string& spec_path) {
  std::ifstream is(spec_path);
  if (!is) throw CliError(2, "cannot open ablation spec: " + spec_path);
  json spec;
  try {
    is >> spec;
  } catch (const json::exception& e) {
    throw CliError(2, std::string("ablation spec is not valid JSON: ") + e.what());
  }
  if (!spec.contains("variants") || !spec.at("variants").is_array() ||
      spec.at("variants").empty()) {
    throw CliError(2, "ablation spec needs a non-empty 'variants' array");
  }

  std::vector<AblationVariant> variants;
  for (const auto& v : spec.at("variants")) {
    AblationVariant var;
    var.name = v.value("name", "variant_" + std::to_string(variants.size()));
    var.ablation = v.value("ablation", "none");
    if (var.ablation != "none" && var.ablation != "no_nb" &&
        var.ablation != "no_cont" && var.ablation != "adain" &&
        var.ablation != "per_row") {
      throw CliError(2, "unknown ablation key: " + var.ablation);
    }
    if (v.contains("lambda_ds")) {
      var.lambda_ds = v.at("lambda_ds").get<double>();
    }
    variants.push_back(std::move(var));
  }

  const Workspace ws = open_workspace(config_path);
  const auto ds = ensure_dataset(ws);

  const fs::path out = ws.root / "ablate";
  fs::create_directories(out);
  std::ofstream csv(out / "table.csv", std::ios::trunc);
  csv << "variant,frechet,diversity,frs,pir\n";

  for (const auto& var : variants) {
    isf::TrainConfig<Scalar> cfg = ws.config.train;  // shared seed
    if (var.ablation == "no_nb") cfg.weights.nb = 0;
    if (var.ablation == "no_cont") cfg.weights.cont = 0;
    if (var.ablation == "adain") cfg.norm_mode = isf::NormMode::per_channel;
    if (var.ablation == "per_row") cfg.norm_mode = isf::NormMode::per_row;
    if (var.lambda_ds) cfg.weights.ds = Scalar(*var.lambda_ds);

    isf::RunHooks<Scalar> hooks;
    hooks.out_dir = out / var.name / "train";
    const auto state = isf::run_training(
        cfg, ds, *ws.handles.generator, *ws.handles.perceptual, hooks);

    const auto report = isf::run_metrics_protocol(
        ds, state.mapper, *ws.handles.generator, *ws.handles.classifier,
        *ws.handles.perceptual, *ws.handles.identity, ws.config.metrics);
    write_json(out / var.name / "report.json", report.to_json());

    csv << var.name << "," << report.values.at("frechet") << ","
        << report.values.at("diversity") << "," << report.values.at("frs")
        << "," << report.values.at("pir") << "\n";
    csv.flush();
  }

  std::cout << json{{"table", (out / "table.csv").string()}}.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent-code style editing over a frozen generator"};
  app.require_subcommand(1);

  std::string config_path, resume_dir, ckpt_dir, code_ref, src_ref, dst_ref;
  std::string out_override, spec_path, tag;
  std::vector<int> flips;
  std::vector<std::string> sets;
  int count = 3, steps = 10;
  uint64_t z_seed = 7;

  auto* build = app.add_subcommand("build-dataset", "sample and label codes");
  build->add_option("--config", config_path)->required();

  auto* train = app.add_subcommand("train", "train the style function");
  train->add_option("--config", config_path)->required();
  train->add_option("--resume", resume_dir, "checkpoint dir to resume from");

  auto* edit = app.add_subcommand("edit", "apply attribute edits to one code");
  edit->add_option("--config", config_path)->required();
  edit->add_option("--checkpoint", ckpt_dir);
  edit->add_option("--code", code_ref, "train:IDX or test:IDX")->required();
  edit->add_option("--flip", flips, "attribute indices to toggle");
  edit->add_option("--set", sets, "ATTR=BIT overrides");
  edit->add_option("--count", count, "number of modes to sample");
  edit->add_option("--z-seed", z_seed);
  edit->add_option("--tag", tag, "output file stem");

  auto* interp = app.add_subcommand("interpolate", "latent path strip");
  interp->add_option("--config", config_path)->required();
  interp->add_option("--checkpoint", ckpt_dir);
  interp->add_option("--src", src_ref)->required();
  interp->add_option("--dst", dst_ref);
  interp->add_option("--flip", flips, "edit the source to define the endpoint");
  interp->add_option("--steps", steps);
  interp->add_option("--z-seed", z_seed);
  interp->add_option("--tag", tag);

  auto* eval = app.add_subcommand("evaluate", "metric report on a checkpoint");
  eval->add_option("--config", config_path)->required();
  eval->add_option("--checkpoint", ckpt_dir);
  eval->add_option("--out", out_override);

  auto* ablate = app.add_subcommand("ablate", "loss/normalization ablations");
  ablate->add_option("--config", config_path)->required();
  ablate->add_option("--spec", spec_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    emit_error("usage", e.what());
    return 2;
  }

  try {
    if (build->parsed()) return cmd_build_dataset(config_path);
    if (train->parsed()) return cmd_train(config_path, resume_dir);
    if (edit->parsed()) {
      return cmd_edit(config_path, ckpt_dir, code_ref, flips, sets, count,
                      z_seed, tag);
    }
    if (interp->parsed()) {
      return cmd_interpolate(config_path, ckpt_dir, src_ref, dst_ref, flips,
                             steps, z_seed, tag);
    }
    if (eval->parsed()) return cmd_evaluate(config_path, ckpt_dir, out_override);
    if (ablate->parsed()) return cmd_ablate(config_path, spec_path);
  } catch (const CliError& e) {
    emit_error(e.exit_code == 2 ? "config" : "runtime", e.what());
    return e.exit_code;
  } catch (const isf::TrainingAbort& e) {
    emit_error("runtime", e.what(), e.term);
    return 3;
  } catch (const isf::InvalidArgument& e) {
    emit_error("config", e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return 3;
  }
  return 0;
}
