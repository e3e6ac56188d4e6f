#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "panoptix/compositor.hpp"
#include "panoptix/eval.hpp"
#include "panoptix/image.hpp"
#include "panoptix/plan.hpp"
#include "panoptix/registry.hpp"
#include "panoptix/sra.hpp"
#include "panoptix/toyset.hpp"
#include "panoptix/tra.hpp"

namespace fs = std::filesystem;

namespace panoptix {

namespace {

void print_log_entry(const char* tag, const TrainLogEntry& entry) {
  std::printf("[%s] step %lld", tag, static_cast<long long>(entry.step));
  for (const auto& [name, value] : entry.components) std::printf(" %s=%.6f", name.c_str(), value);
  std::printf("\n");
  std::fflush(stdout);
}

/// Reads one scene's masks from a directory of inst_<k>_<label>.png and
/// stuff_<label>.png files.
MaskSet load_masks_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("masks dir not found: " + dir);
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".png") names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());

  MaskSet masks;
  std::vector<std::pair<int, BinaryMask>> instances;
  for (const std::string& name : names) {
    const std::string stem = name.substr(0, name.size() - 4);
    if (stem.rfind("inst_", 0) == 0) {
      const std::string rest = stem.substr(5);
      const size_t sep = rest.find('_');
      if (sep == std::string::npos || sep == 0 || sep + 1 >= rest.size()) {
        throw std::runtime_error("instance mask file '" + name +
                                 "' must be named inst_<k>_<label>.png");
      }
      int k;
      try {
        k = std::stoi(rest.substr(0, sep));
      } catch (const std::exception&) {
        throw std::runtime_error("instance mask file '" + name + "' has a non-numeric index");
      }
      const std::string label = rest.substr(sep + 1);
      instances.emplace_back(k, load_mask_png((fs::path(dir) / name).string(), label));
    } else if (stem.rfind("stuff_", 0) == 0) {
      const std::string label = stem.substr(6);
      if (label.empty()) throw std::runtime_error("stuff mask file '" + name + "' missing label");
      masks.stuff.emplace(label, load_mask_png((fs::path(dir) / name).string(), label));
    }
  }
  std::sort(instances.begin(), instances.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [k, mask] : instances) masks.instances.push_back(std::move(mask));
  return masks;
}

std::string default_registry() {
  const char* env = std::getenv("PANOPTIX_REGISTRY");
  return env ? env : "";
}

int run(int argc, const char* const* argv) {
  CLI::App app{"panoptix: panoptic-level image-to-image translation at desk scale"};
  app.require_subcommand(1);

  // gen-toyset
  auto* gen = app.add_subcommand("gen-toyset", "Generate a procedural toy dataset");
  std::string gen_out, gen_domain;
  int gen_count = 1, gen_size = 64;
  uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--domain", gen_domain, "Domain id (A or B)")
      ->required()
      ->check(CLI::IsMember({"A", "B"}));
  gen->add_option("--count", gen_count, "Number of scenes")->required()->check(CLI::PositiveNumber);
  gen->add_option("--size", gen_size, "Image side length (32, 64 or 128)")
      ->default_val(64)
      ->check(CLI::IsMember({32, 64, 128}));
  gen->add_option("--seed", gen_seed, "Base seed; scene k uses seed + k")->default_val(0);

  // train-tra
  auto* ttra = app.add_subcommand("train-tra", "Train a thing transfiguration bundle");
  std::string ttra_source, ttra_target, ttra_source_label, ttra_target_label, ttra_out;
  int ttra_epochs = 45;
  uint64_t ttra_seed = 0;
  ttra->add_option("--source", ttra_source, "Source-domain dataset directory")->required();
  ttra->add_option("--target", ttra_target, "Target-domain dataset directory")->required();
  ttra->add_option("--source-label", ttra_source_label, "Instance label to translate")->required();
  ttra->add_option("--target-label", ttra_target_label, "Instance label to generate")->required();
  ttra->add_option("--epochs", ttra_epochs, "Training epochs")->default_val(45)->check(CLI::PositiveNumber);
  ttra->add_option("--seed", ttra_seed, "Training seed")->default_val(0);
  ttra->add_option("--out", ttra_out, "Checkpoint directory")->required();

  // train-sra
  auto* tsra = app.add_subcommand("train-sra", "Train a stuff style-translation bundle");
  std::string tsra_source, tsra_target, tsra_out;
  int tsra_iters = 2000;
  double lambda_x = 10.0, lambda_c = 1.0, lambda_s = 1.0;
  uint64_t tsra_seed = 0;
  tsra->add_option("--source", tsra_source, "Domain-i dataset directory")->required();
  tsra->add_option("--target", tsra_target, "Domain-r dataset directory")->required();
  tsra->add_option("--iters", tsra_iters, "Training iterations")
      ->default_val(2000)
      ->check(CLI::PositiveNumber);
  tsra->add_option("--lambda-x", lambda_x, "Image reconstruction weight")->default_val(10.0);
  tsra->add_option("--lambda-c", lambda_c, "Content reconstruction weight")->default_val(1.0);
  tsra->add_option("--lambda-s", lambda_s, "Style reconstruction weight")->default_val(1.0);
  tsra->add_option("--seed", tsra_seed, "Training seed")->default_val(0);
  tsra->add_option("--out", tsra_out, "Checkpoint directory")->required();

  // translate
  auto* tr = app.add_subcommand("translate", "Run a translation plan on one image");
  std::string tr_input, tr_masks, tr_plan, tr_registry = default_registry(), tr_out, tr_panel;
  uint64_t tr_style_seed = 0;
  tr->add_option("--input", tr_input, "Input image (8-bit RGB PNG)")->required();
  tr->add_option("--masks-dir", tr_masks,
                 "Directory of inst_<k>_<label>.png and stuff_<label>.png masks")
      ->required();
  tr->add_option("--plan", tr_plan, "Translation plan (plan.json)")->required();
  auto* tr_reg_opt =
      tr->add_option("--registry", tr_registry, "Bundle registry root (default $PANOPTIX_REGISTRY)");
  tr->add_option("--style-seed", tr_style_seed, "Style seed mixed into random style sources")
      ->default_val(0);
  tr->add_option("--out", tr_out, "Output image path")->required();
  tr->add_option("--panel", tr_panel, "Optional comparison strip output path");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a plan over a test manifest");
  std::string ev_manifest, ev_plan, ev_registry = default_registry(), ev_out = "report.json";
  int ev_styles = 10;
  uint64_t ev_seed = 0;
  ev->add_option("--manifest", ev_manifest, "Test dataset manifest (or dataset root)")->required();
  ev->add_option("--plan", ev_plan, "Translation plan (plan.json)")->required();
  auto* ev_reg_opt =
      ev->add_option("--registry", ev_registry, "Bundle registry root (default $PANOPTIX_REGISTRY)");
  ev->add_option("--n-styles", ev_styles, "Random styles per scene")
      ->default_val(10)
      ->check(CLI::PositiveNumber);
  ev->add_option("--seed", ev_seed, "Evaluation seed")->default_val(0);
  ev->add_option("--out", ev_out, "Report output path")->default_val("report.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, returns 0
  } catch (const CLI::ParseError& e) {
    (void)app.exit(e);
    return 1;
  }

  if (gen->parsed()) {
    DatasetManifest manifest = generate_dataset(gen_domain, gen_count, gen_size, gen_seed, gen_out);
    std::printf("wrote %zu scenes to %s\n", manifest.records.size(), gen_out.c_str());
    return 0;
  }

  if (ttra->parsed()) {
    auto ds_i = load_manifest(ttra_source);
    auto ds_r = load_manifest(ttra_target);
    nn::TrainConfig config;
    config.epochs = ttra_epochs;
    config.seed = ttra_seed;
    TraBundle bundle = train_tra(ds_i, ds_r, ttra_source_label, ttra_target_label, config, {}, {},
                                 [](const TrainLogEntry& e) { print_log_entry("train-tra", e); });
    save_tra_bundle(bundle, config, ttra_out);
    std::printf("saved TRA bundle (%s -> %s) to %s\n", ttra_source_label.c_str(),
                ttra_target_label.c_str(), ttra_out.c_str());
    return 0;
  }

  if (tsra->parsed()) {
    auto ds_i = load_manifest(tsra_source);
    auto ds_r = load_manifest(tsra_target);
    nn::TrainConfig config;
    config.iterations = tsra_iters;
    config.seed = tsra_seed;
    SraLambdas lambdas{lambda_x, lambda_c, lambda_s};
    SraBundle bundle = train_sra(ds_i, ds_r, config, lambdas, {},
                                 [](const TrainLogEntry& e) { print_log_entry("train-sra", e); });
    save_sra_bundle(bundle, config, tsra_out);
    std::printf("saved SRA bundle (%s <-> %s) to %s\n", bundle.domain_i.c_str(),
                bundle.domain_r.c_str(), tsra_out.c_str());
    return 0;
  }

  if (tr->parsed()) {
    if (tr_registry.empty() && tr_reg_opt->count() == 0) {
      throw std::runtime_error("no registry given: pass --registry or set PANOPTIX_REGISTRY");
    }
    Image input = load_image_png(tr_input);
    MaskSet masks = load_masks_dir(tr_masks);
    TranslationPlan plan = load_plan(tr_plan);
    Registry registry(tr_registry);
    Image out = plan_compose(input, masks, plan, registry, tr_style_seed);
    save_image_png(out, tr_out);
    std::printf("wrote %s\n", tr_out.c_str());
    if (!tr_panel.empty()) {
      Image panel = render_panel(input, masks, plan, registry, tr_style_seed);
      save_image_png(panel, tr_panel);
      std::printf("wrote %s\n", tr_panel.c_str());
    }
    return 0;
  }

  if (ev->parsed()) {
    if (ev_registry.empty() && ev_reg_opt->count() == 0) {
      throw std::runtime_error("no registry given: pass --registry or set PANOPTIX_REGISTRY");
    }
    auto scenes = load_manifest(ev_manifest);
    TranslationPlan plan = load_plan(ev_plan);
    Registry registry(ev_registry);
    EvalReport report = run_eval(scenes, plan, registry, ev_styles, ev_seed);
    report.config["manifest"] = ev_manifest;
    report.config["plan"] = ev_plan;
    report.config["registry"] = ev_registry;
    write_report_json(report, ev_out);
    std::printf("wrote %s (%zu scenes)\n", ev_out.c_str(), report.scenes.size());
    return 0;
  }

  return 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace panoptix
