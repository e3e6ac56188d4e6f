#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "panoptix/params.hpp"

namespace panoptix::nn {

struct GradCheckOptions {
  double epsilon = 1e-3;
  int num_coords = 60;  // sampled parameter coordinates, >= 50 by contract
  uint64_t seed = 0;
  /// Optional: restrict sampling to parameters the loss is defined over
  /// (e.g. discriminator weights when the loss detaches its generator inputs).
  std::function<bool(const std::string&)> param_filter;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
  int coords_checked = 0;
};

/// Central finite differences on sampled parameter coordinates against the
/// analytic gradients produced by `loss_fn`. The callable must evaluate the
/// loss from the current store contents, accumulate gradients into the
/// store, and return the scalar loss; grad_check zeroes gradients around
/// each call. Relative error per coordinate is
/// |g_a - g_n| / max(|g_a|, |g_n|, 1e-8).
GradCheckReport grad_check(ParamStore& store, const std::function<double()>& loss_fn,
                           const GradCheckOptions& options = {});

}  // namespace panoptix::nn
