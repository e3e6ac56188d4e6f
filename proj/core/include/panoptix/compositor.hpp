#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "panoptix/image.hpp"
#include "panoptix/plan.hpp"
#include "panoptix/registry.hpp"

namespace panoptix {

/// One stuff-step result awaiting compositing.
struct StuffTranslation {
  Image translated;
  BinaryMask mask;
  int order_index = 0;  // 1..L
};

/// Strict per-pixel selection: output(p) = x_i(p) where B(p) = 0, else
/// x_hat(p). No blending.
Image composite_single(const Image& x_i, const Image& x_hat_r, const BinaryMask& b);

/// Left fold of composite_single in ascending order_index. L = 0 is the
/// identity; overlapping masks resolve last-write-wins.
Image composite_stuff(const Image& x_thing, const std::vector<StuffTranslation>& translations);

/// Builds the L stuff translations for a thing-translated image. Random
/// style sources mix their plan seed with `style_seed` and the step index;
/// reference sources encode the reference image with the target domain's
/// style encoder. Masks come from the scene's stuff masks.
std::vector<StuffTranslation> stuff_translations(const Image& x_thing, const MaskSet& masks,
                                                 const TranslationPlan& plan, Registry& registry,
                                                 uint64_t style_seed);

struct ComposeTrace {
  Image x_thing;
  MaskSet masks_after;
  std::vector<StuffTranslation> stuff;
  Image final_image;
};

/// Full plan execution: thing chain first, then per-stuff style translation
/// of the thing-translated image, then the compositing fold. Errors are
/// annotated with their stage ("TRA step k" / "SRA step l" / "composite").
ComposeTrace plan_compose_trace(const Image& x, const MaskSet& masks, const TranslationPlan& plan,
                                Registry& registry, uint64_t style_seed);
Image plan_compose(const Image& x, const MaskSet& masks, const TranslationPlan& plan,
                   Registry& registry, uint64_t style_seed);

/// Comparison strip: stuff-mask sketch, input, thing-translated image, and
/// the final composites for three consecutive style seeds.
Image render_panel(const Image& input, const MaskSet& masks, const TranslationPlan& plan,
                   Registry& registry, uint64_t style_seed);

}  // namespace panoptix
