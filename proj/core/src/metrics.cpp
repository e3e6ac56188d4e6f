#include "panoptix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace panoptix {

ContextPreservation context_preservation(const Image& x, const Image& x_prime,
                                         const BinaryMask& region) {
  if (!x.same_shape(x_prime) || region.height != x.height || region.width != x.width) {
    throw std::invalid_argument("context_preservation: shape mismatch");
  }
  double sum_in = 0, sum_out = 0;
  int64_t n_in = 0, n_out = 0;
  for (int y = 0; y < x.height; ++y) {
    for (int xx = 0; xx < x.width; ++xx) {
      double d = 0;
      for (int c = 0; c < 3; ++c) d += std::abs(x.at(y, xx, c) - x_prime.at(y, xx, c));
      if (region.at(y, xx)) {
        sum_in += d;
        n_in += 3;
      } else {
        sum_out += d;
        n_out += 3;
      }
    }
  }
  ContextPreservation out;
  out.inside_empty = n_in == 0;
  out.outside_empty = n_out == 0;
  out.inside = n_in ? sum_in / static_cast<double>(n_in) : 0.0;
  out.outside = n_out ? sum_out / static_cast<double>(n_out) : 0.0;
  return out;
}

double diversity_score(const std::vector<Image>& outputs, const BinaryMask& region) {
  if (outputs.size() < 2) throw std::invalid_argument("diversity_score: need >= 2 outputs");
  for (const auto& img : outputs) {
    if (img.height != region.height || img.width != region.width) {
      throw std::invalid_argument("diversity_score: shape mismatch");
    }
  }
  const int64_t n_region = region.count();
  if (n_region == 0) return 0.0;

  double sum = 0;
  int64_t pairs = 0;
  for (size_t a = 0; a < outputs.size(); ++a) {
    for (size_t b = a + 1; b < outputs.size(); ++b) {
      double acc = 0;
      for (int y = 0; y < region.height; ++y) {
        for (int x = 0; x < region.width; ++x) {
          if (!region.at(y, x)) continue;
          for (int c = 0; c < 3; ++c) {
            acc += std::abs(outputs[a].at(y, x, c) - outputs[b].at(y, x, c));
          }
        }
      }
      sum += acc / static_cast<double>(n_region * 3);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

namespace {

/// Standard RGB (in [0, 1]) to hue in [0, 1); gray maps to hue 0.
double pixel_hue(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  if (delta <= 1e-12) return 0.0;
  double h;
  if (mx == r) h = std::fmod((g - b) / delta, 6.0);
  else if (mx == g) h = (b - r) / delta + 2.0;
  else h = (r - g) / delta + 4.0;
  h /= 6.0;
  if (h < 0) h += 1.0;
  return h;
}

}  // namespace

double mean_hue(const Image& image, const BinaryMask* region) {
  if (region && (region->height != image.height || region->width != image.width)) {
    throw std::invalid_argument("mean_hue: region shape mismatch");
  }
  double sx = 0, sy = 0;
  int64_t n = 0;
  const double two_pi = 6.283185307179586476925286766559;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      if (region && !region->at(y, x)) continue;
      const double r = (image.at(y, x, 0) + 1.0) / 2.0;
      const double g = (image.at(y, x, 1) + 1.0) / 2.0;
      const double b = (image.at(y, x, 2) + 1.0) / 2.0;
      const double h = pixel_hue(r, g, b) * two_pi;
      sx += std::cos(h);
      sy += std::sin(h);
      ++n;
    }
  }
  if (n == 0) return 0.0;
  double angle = std::atan2(sy, sx);
  if (angle < 0) angle += two_pi;
  return angle / two_pi;
}

double hue_distance(double a, double b) {
  double d = std::abs(a - b);
  d = std::fmod(d, 1.0);
  return d > 0.5 ? 1.0 - d : d;
}

}  // namespace panoptix
