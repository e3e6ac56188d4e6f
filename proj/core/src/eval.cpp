#include "panoptix/eval.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "panoptix/compositor.hpp"
#include "panoptix/metrics.hpp"
#include "panoptix/rng.hpp"
#include "panoptix/sra.hpp"
#include "panoptix/tra.hpp"

using nlohmann::json;

namespace panoptix {

namespace {

double mean_abs_delta_in_region(const Image& a, const Image& b, const BinaryMask& region) {
  const int64_t n = region.count();
  if (n == 0) return 0.0;
  double sum = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (!region.at(y, x)) continue;
      for (int c = 0; c < 3; ++c) sum += std::abs(a.at(y, x, c) - b.at(y, x, c));
    }
  }
  return sum / static_cast<double>(n * 3);
}

}  // namespace

EvalReport run_eval(const std::vector<SceneRecord>& scenes, const TranslationPlan& plan,
                    Registry& registry, int n_styles, uint64_t seed) {
  if (scenes.empty()) throw std::runtime_error("no scenes");
  if (n_styles < 1) throw std::invalid_argument("n_styles must be >= 1");
  plan.validate();

  EvalReport report;
  report.config["n_styles"] = std::to_string(n_styles);
  report.config["seed"] = std::to_string(seed);
  report.config["scene_count"] = std::to_string(scenes.size());
  report.config["plan_things"] = std::to_string(plan.k_count());
  report.config["plan_stuff"] = std::to_string(plan.l_count());

  for (size_t i = 0; i < scenes.size(); ++i) {
    try {
      const SceneRecord& scene = scenes[i];
      SceneMetrics m;
      m.index = static_cast<int>(i);

      auto [x_thing, masks_after] =
          apply_tra_chain(scene.image, scene.masks, plan.thing_steps, registry);

      // Thing region: union of instance masks before and after the chain.
      std::vector<BinaryMask> thing_masks;
      for (const auto& mask : scene.masks.instances) thing_masks.push_back(mask);
      for (const auto& mask : masks_after.instances) thing_masks.push_back(mask);
      if (plan.k_count() == 0 || thing_masks.empty()) {
        m.thing_region_empty = true;
      } else {
        ContextPreservation cp =
            context_preservation(scene.image, x_thing, mask_union(thing_masks));
        m.context_preservation_in = cp.inside;
        m.context_preservation_out = cp.outside;
        m.thing_region_empty = cp.inside_empty;
      }

      // Stuff region: union of the plan's source stuff masks.
      std::vector<BinaryMask> stuff_masks;
      std::set<std::string> seen;
      for (const auto& step : plan.stuff_steps) {
        if (!seen.insert(step.source_label).second) continue;
        auto it = scene.masks.stuff.find(step.source_label);
        if (it == scene.masks.stuff.end()) {
          throw std::runtime_error("no stuff mask labeled '" + step.source_label + "'");
        }
        stuff_masks.push_back(it->second);
      }
      BinaryMask stuff_region = stuff_masks.empty()
                                    ? BinaryMask::zeros(scene.image.height, scene.image.width, "stuff")
                                    : mask_union(stuff_masks);
      m.stuff_region_empty = stuff_region.count() == 0;

      std::vector<Image> finals;
      for (int k = 0; k < n_styles; ++k) {
        const uint64_t style_seed = mix_seed(seed, static_cast<uint64_t>(k), 0xE);
        auto translations = stuff_translations(x_thing, masks_after, plan, registry, style_seed);
        finals.push_back(composite_stuff(x_thing, translations));
      }

      if (!m.stuff_region_empty) {
        double delta = 0;
        for (const auto& f : finals) delta += mean_abs_delta_in_region(f, x_thing, stuff_region);
        m.stuff_region_delta = delta / static_cast<double>(finals.size());
        if (finals.size() >= 2) m.diversity = diversity_score(finals, stuff_region);
      }

      if (plan.l_count() > 0) {
        auto bundle = registry.sra(plan.stuff_steps.front().sra_bundle_id);
        std::string domain = scene.domain_id;
        if (domain != bundle->domain_i && domain != bundle->domain_r) domain = bundle->domain_i;
        Image rec = reconstruct(scene.image, *bundle, domain);
        BinaryMask everywhere = BinaryMask::zeros(scene.image.height, scene.image.width, "all");
        for (auto& bit : everywhere.bits) bit = 1;
        m.recon_l1 = mean_abs_delta_in_region(scene.image, rec, everywhere);
      }

      report.scenes.push_back(m);
    } catch (const std::exception& e) {
      throw std::runtime_error("scene " + std::to_string(i) + ": " + e.what());
    }
  }

  auto mean_of = [&](auto getter) {
    double s = 0;
    for (const auto& m : report.scenes) s += getter(m);
    return s / static_cast<double>(report.scenes.size());
  };
  report.aggregate["context_preservation_in"] =
      mean_of([](const SceneMetrics& m) { return m.context_preservation_in; });
  report.aggregate["context_preservation_out"] =
      mean_of([](const SceneMetrics& m) { return m.context_preservation_out; });
  report.aggregate["stuff_region_delta"] =
      mean_of([](const SceneMetrics& m) { return m.stuff_region_delta; });
  report.aggregate["diversity"] = mean_of([](const SceneMetrics& m) { return m.diversity; });
  report.aggregate["recon_l1"] = mean_of([](const SceneMetrics& m) { return m.recon_l1; });
  return report;
}

std::string EvalReport::to_json_text() const {
  json j;
  j["version"] = version;
  j["config"] = config;
  json scenes_json = json::array();
  for (const auto& m : scenes) {
    scenes_json.push_back({{"index", m.index},
                           {"context_preservation_in", m.context_preservation_in},
                           {"context_preservation_out", m.context_preservation_out},
                           {"stuff_region_delta", m.stuff_region_delta},
                           {"diversity", m.diversity},
                           {"recon_l1", m.recon_l1},
                           {"thing_region_empty", m.thing_region_empty},
                           {"stuff_region_empty", m.stuff_region_empty}});
  }
  j["scenes"] = std::move(scenes_json);
  j["aggregate"] = aggregate;
  return j.dump(2) + "\n";
}

void write_report_json(const EvalReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write report: " + path);
  f << report.to_json_text();
}

void validate_report_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed report JSON: ") + e.what());
  }
  const char* scene_fields[] = {"index",     "context_preservation_in", "context_preservation_out",
                                "stuff_region_delta", "diversity",       "recon_l1",
                                "thing_region_empty", "stuff_region_empty"};
  const char* aggregate_fields[] = {"context_preservation_in", "context_preservation_out",
                                    "stuff_region_delta", "diversity", "recon_l1"};
  try {
    if (j.at("version").get<int>() != 1) throw std::runtime_error("unsupported report version");
    (void)j.at("config");
    for (const auto& scene : j.at("scenes")) {
      for (const char* f : scene_fields) {
        if (!scene.contains(f)) throw std::runtime_error(std::string("scene missing field ") + f);
      }
      for (const char* f : aggregate_fields) {
        const double v = scene.at(f).get<double>();
        if (!std::isfinite(v) || v < 0) {
          throw std::runtime_error(std::string("scene field not finite/non-negative: ") + f);
        }
      }
    }
    for (const char* f : aggregate_fields) {
      const double v = j.at("aggregate").at(f).get<double>();
      if (!std::isfinite(v) || v < 0) {
        throw std::runtime_error(std::string("aggregate field not finite/non-negative: ") + f);
      }
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("report schema violation: ") + e.what());
  }
}

}  // namespace panoptix
