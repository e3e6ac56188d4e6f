#pragma once

#include <vector>

#include "panoptix/image.hpp"

namespace panoptix {

/// Mean absolute per-pixel difference split by a region mask. An empty
/// region (or empty complement) reports 0 for that side with its flag set.
struct ContextPreservation {
  double inside = 0.0;
  double outside = 0.0;
  bool inside_empty = false;
  bool outside_empty = false;
};

ContextPreservation context_preservation(const Image& x, const Image& x_prime,
                                         const BinaryMask& region);

/// Mean over all unordered output pairs of the mean absolute difference
/// restricted to the region. Requires >= 2 outputs; an empty region gives 0.
double diversity_score(const std::vector<Image>& outputs, const BinaryMask& region);

/// Circular mean hue in [0, 1) over the region (whole image when null).
/// Pixels are mapped from [-1, 1] to RGB in [0, 1] first.
double mean_hue(const Image& image, const BinaryMask* region = nullptr);

/// Circular distance between hues, in [0, 0.5].
double hue_distance(double a, double b);

}  // namespace panoptix
