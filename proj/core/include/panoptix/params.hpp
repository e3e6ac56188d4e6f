#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "panoptix/rng.hpp"
#include "panoptix/tensor.hpp"

namespace panoptix::nn {

/// Named map of learnable tensors plus their gradient accumulators.
/// Names are stable across save/load; checkpoint order is index order
/// (lexicographic by name).
class ParamStore {
 public:
  Tensor& create_zeros(const std::string& name, std::vector<int> shape);
  Tensor& create_normal(const std::string& name, std::vector<int> shape, panoptix::Rng& rng,
                        double stddev = 0.02);

  bool has(const std::string& name) const { return params_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  Tensor& grad(const std::string& name);

  void zero_grads();
  bool all_finite() const;
  size_t count() const { return params_.size(); }
  int64_t total_size() const;
  std::vector<std::string> names() const;  // sorted

 private:
  std::map<std::string, Tensor> params_;
  std::map<std::string, Tensor> grads_;
};

/// Optimizer and run-length settings shared by both trainers. Batch size is
/// fixed at 1 by contract.
struct TrainConfig {
  double learning_rate = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int batch_size = 1;
  int iterations = 0;  // SRA-style budget; 0 when epochs drives the run
  int epochs = 0;      // TRA-style budget
  uint64_t seed = 0;

  void validate() const;
};

/// Adam with bias correction. State carries first/second moments and the
/// step count. Throws "gradient blow-up" naming the parameter on a
/// non-finite gradient. An optional name filter restricts the update to a
/// parameter subset so alternating GAN phases keep disjoint moment state.
class AdamOptimizer {
 public:
  using NameFilter = std::function<bool(const std::string&)>;

  explicit AdamOptimizer(const TrainConfig& config, NameFilter filter = nullptr);
  void step(ParamStore& store);
  int64_t step_count() const { return step_count_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  NameFilter filter_;
  int64_t step_count_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

/// Checkpoint directory format: index.json maps each parameter name to
/// {shape, dtype:"f32", offset, file}; weights.bin holds the raw
/// little-endian f32 payload concatenated in index order.
void save_checkpoint(const ParamStore& store, const std::string& dir);

/// Loads into an empty or pre-built store. A pre-built store requires the
/// checkpoint to cover exactly the same names and shapes.
void load_checkpoint(ParamStore& store, const std::string& dir);

}  // namespace panoptix::nn
