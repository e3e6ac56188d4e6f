#include "panoptix/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "panoptix/rng.hpp"

namespace panoptix::nn {

GradCheckReport grad_check(ParamStore& store, const std::function<double()>& loss_fn,
                           const GradCheckOptions& options) {
  if (options.epsilon <= 0) throw std::invalid_argument("grad_check: epsilon must be positive");

  store.zero_grads();
  (void)loss_fn();

  // Snapshot analytic gradients for the sampled subset.
  std::vector<std::string> names;
  for (const auto& name : store.names()) {
    if (!options.param_filter || options.param_filter(name)) names.push_back(name);
  }
  int64_t total = 0;
  for (const auto& name : names) total += store.get(name).size();
  if (total == 0) throw std::invalid_argument("grad_check: no parameters to sample");
  std::vector<Tensor> analytic;
  analytic.reserve(names.size());
  for (const auto& name : names) analytic.push_back(store.grad(name));

  panoptix::Rng rng(mix_seed(options.seed, 0x67726164));
  GradCheckReport report;
  const int coords = std::max(options.num_coords, 1);
  for (int k = 0; k < coords; ++k) {
    int64_t flat = rng.uniform_int(total);
    size_t which = 0;
    while (flat >= store.get(names[which]).size()) {
      flat -= store.get(names[which]).size();
      ++which;
    }
    Tensor& p = store.get(names[which]);
    const double original = p[flat];

    p[flat] = original + options.epsilon;
    store.zero_grads();
    const double loss_plus = loss_fn();
    p[flat] = original - options.epsilon;
    store.zero_grads();
    const double loss_minus = loss_fn();
    p[flat] = original;

    const double numeric = (loss_plus - loss_minus) / (2.0 * options.epsilon);
    const double exact = analytic[which][flat];
    const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
    const double rel = std::abs(exact - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = names[which];
      report.worst_index = flat;
    }
    ++report.coords_checked;
  }

  // Leave the store with the analytic gradients in place.
  store.zero_grads();
  for (size_t i = 0; i < names.size(); ++i) {
    Tensor& g = store.grad(names[i]);
    for (int64_t j = 0; j < g.size(); ++j) g[j] = analytic[i][j];
  }
  return report;
}

}  // namespace panoptix::nn
