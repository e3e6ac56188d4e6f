#include "panoptix/compositor.hpp"

#include <algorithm>
#include <stdexcept>

#include "panoptix/nets.hpp"
#include "panoptix/rng.hpp"
#include "panoptix/tra.hpp"

namespace panoptix {

Image composite_single(const Image& x_i, const Image& x_hat_r, const BinaryMask& b) {
  if (!x_i.same_shape(x_hat_r) || b.height != x_i.height || b.width != x_i.width) {
    throw std::invalid_argument("composite_single: shape mismatch");
  }
  Image out = x_i;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      if (b.at(y, x)) {
        out.at(y, x, 0) = x_hat_r.at(y, x, 0);
        out.at(y, x, 1) = x_hat_r.at(y, x, 1);
        out.at(y, x, 2) = x_hat_r.at(y, x, 2);
      }
    }
  }
  return out;
}

Image composite_stuff(const Image& x_thing, const std::vector<StuffTranslation>& translations) {
  for (const auto& t : translations) {
    if (!t.translated.same_shape(x_thing) || t.mask.height != x_thing.height ||
        t.mask.width != x_thing.width) {
      throw std::invalid_argument("composite_stuff: shape mismatch at order_index " +
                                  std::to_string(t.order_index));
    }
  }
  std::vector<const StuffTranslation*> ordered;
  for (const auto& t : translations) ordered.push_back(&t);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const StuffTranslation* a, const StuffTranslation* b) {
                     return a->order_index < b->order_index;
                   });
  Image out = x_thing;
  for (const StuffTranslation* t : ordered) out = composite_single(out, t->translated, t->mask);
  return out;
}

std::vector<StuffTranslation> stuff_translations(const Image& x_thing, const MaskSet& masks,
                                                 const TranslationPlan& plan, Registry& registry,
                                                 uint64_t style_seed) {
  std::vector<StuffTranslation> out;
  for (size_t l = 0; l < plan.stuff_steps.size(); ++l) {
    const StuffStep& step = plan.stuff_steps[l];
    const std::string where = "SRA step " + std::to_string(l + 1);
    try {
      auto bundle = registry.sra(step.sra_bundle_id);
      SraDirection dir;
      bool target_is_r;
      if (step.target_domain_id == bundle->domain_r) {
        dir = SraDirection::IToR;
        target_is_r = true;
      } else if (step.target_domain_id == bundle->domain_i) {
        dir = SraDirection::RToI;
        target_is_r = false;
      } else {
        throw std::runtime_error("bundle '" + step.sra_bundle_id + "' covers domains " +
                                 bundle->domain_i + "/" + bundle->domain_r +
                                 ", not target domain " + step.target_domain_id);
      }

      nn::Tensor style;
      if (step.style_source.kind == StyleSource::Kind::Random) {
        style = nn::sample_style(
            mix_seed(step.style_source.seed, style_seed, static_cast<uint64_t>(l)),
            bundle->arch.style_dim);
      } else {
        Image ref = load_image_png(step.style_source.reference_path);
        style = bundle->style_encoder(!target_is_r).forward(bundle->params, ref);
      }

      auto mask_it = masks.stuff.find(step.source_label);
      if (mask_it == masks.stuff.end()) {
        throw std::runtime_error("no stuff mask labeled '" + step.source_label + "'");
      }

      StuffTranslation t;
      t.translated = translate_style(x_thing, style, *bundle, dir);
      t.mask = mask_it->second;
      t.order_index = static_cast<int>(l + 1);
      out.push_back(std::move(t));
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  return out;
}

ComposeTrace plan_compose_trace(const Image& x, const MaskSet& masks, const TranslationPlan& plan,
                                Registry& registry, uint64_t style_seed) {
  plan.validate();
  ComposeTrace trace;
  try {
    auto [x_thing, masks_after] = apply_tra_chain(x, masks, plan.thing_steps, registry);
    trace.x_thing = std::move(x_thing);
    trace.masks_after = std::move(masks_after);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("TRA ") + e.what());
  }
  // Stuff masks come from the original scene annotation; the thing chain
  // only rewrites instance masks.
  trace.stuff = stuff_translations(trace.x_thing, trace.masks_after, plan, registry, style_seed);
  try {
    trace.final_image = composite_stuff(trace.x_thing, trace.stuff);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("composite: ") + e.what());
  }
  return trace;
}

Image plan_compose(const Image& x, const MaskSet& masks, const TranslationPlan& plan,
                   Registry& registry, uint64_t style_seed) {
  return plan_compose_trace(x, masks, plan, registry, style_seed).final_image;
}

namespace {

/// Sketch of the stuff masks referenced by the plan: each step's mask in a
/// distinct flat tone on black.
Image stuff_mask_sketch(const Image& ref, const MaskSet& masks, const TranslationPlan& plan) {
  Image out = Image::zeros(ref.height, ref.width);
  for (auto& v : out.pixels) v = -1.0;
  const double tones[3][3] = {{1.0, 1.0, -1.0}, {-1.0, 1.0, 1.0}, {1.0, -1.0, 1.0}};
  for (size_t l = 0; l < plan.stuff_steps.size(); ++l) {
    auto it = masks.stuff.find(plan.stuff_steps[l].source_label);
    if (it == masks.stuff.end()) continue;
    const double* tone = tones[l % 3];
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        if (it->second.at(y, x)) {
          out.at(y, x, 0) = tone[0];
          out.at(y, x, 1) = tone[1];
          out.at(y, x, 2) = tone[2];
        }
      }
    }
  }
  return out;
}

}  // namespace

Image render_panel(const Image& input, const MaskSet& masks, const TranslationPlan& plan,
                   Registry& registry, uint64_t style_seed) {
  ComposeTrace trace = plan_compose_trace(input, masks, plan, registry, style_seed);
  std::vector<Image> cells;
  cells.push_back(stuff_mask_sketch(input, masks, plan));
  cells.push_back(input);
  cells.push_back(trace.x_thing);
  cells.push_back(trace.final_image);
  for (uint64_t extra = 1; extra <= 2; ++extra) {
    cells.push_back(plan_compose(input, masks, plan, registry, style_seed + extra));
  }

  const int gutter = 2;
  const int h = input.height;
  const int w = input.width;
  const int total_w =
      static_cast<int>(cells.size()) * w + (static_cast<int>(cells.size()) - 1) * gutter;
  Image panel = Image::zeros(h, total_w);
  for (auto& v : panel.pixels) v = 1.0;  // white gutters
  for (size_t k = 0; k < cells.size(); ++k) {
    const int x0 = static_cast<int>(k) * (w + gutter);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        panel.at(y, x0 + x, 0) = cells[k].at(y, x, 0);
        panel.at(y, x0 + x, 1) = cells[k].at(y, x, 1);
        panel.at(y, x0 + x, 2) = cells[k].at(y, x, 2);
      }
    }
  }
  return panel;
}

}  // namespace panoptix
