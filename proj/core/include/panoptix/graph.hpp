#pragma once

#include <functional>
#include <string>
#include <vector>

#include "panoptix/params.hpp"
#include "panoptix/tensor.hpp"

namespace panoptix::nn {

struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

/// Reverse-mode tape over Tensor values. Nodes are appended in evaluation
/// order, so backward() is a single reverse sweep. One Graph instance
/// covers one loss evaluation; parameters bind through ParamStore so
/// gradients accumulate into their named slots.
///
/// Feature maps are (H, W, C); vectors (N); losses scalars. All kernels are
/// single-threaded and deterministic.
class Graph {
 public:
  // Leaves.
  Var input(Tensor value);
  Var param(ParamStore& store, const std::string& name);
  Var constant(Scalar v) { return input(Tensor::scalar(v)); }

  // Convolution and dense layers.
  Var conv2d(Var x, Var w, Var b, int stride, int pad);
  Var linear(Var x, Var w, Var b);

  // Activations.
  Var relu(Var x);
  Var leaky_relu(Var x, Scalar slope);
  Var tanh_act(Var x);
  Var sigmoid(Var x);
  Var abs_act(Var x);

  // Normalization and shape ops.
  Var instance_norm(Var x);                          // per-channel over spatial, eps 1e-5
  Var channel_affine(Var x, Var scale, Var shift);   // scale/shift are (C) vectors
  Var upsample2(Var x);                              // nearest x2
  Var global_avg_pool(Var x);                        // (H,W,C) -> (C)
  Var concat_channels(const std::vector<Var>& xs);
  Var slice_vec(Var x, int offset, int len);         // rank-1 slice

  // Pointwise arithmetic.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_scalar(Var x, Scalar v);
  Var mul_scalar(Var x, Scalar v);

  // Reductions.
  Var sum_all(Var x);
  Var mean_all(Var x);

  /// Cuts the tape: value passes through, gradient stops.
  Var detach(Var x);

  // Composites used by every loss.
  Var square(Var x) { return mul(x, x); }
  Var one_minus(Var x) { return add_scalar(mul_scalar(x, -1.0), 1.0); }
  Var l1_diff(Var a, Var b) { return mean_all(abs_act(sub(a, b))); }
  Var mse_to(Var x, Scalar target) { return mean_all(square(add_scalar(x, -target))); }
  Var add_all(const std::vector<Var>& xs);
  /// Smooth OR of soft masks: 1 - prod(1 - m_k). Equals bitwise OR on
  /// hard 0/1 masks.
  Var soft_union(const std::vector<Var>& masks);

  const Tensor& value(Var v) const;
  Scalar scalar_value(Var v) const;

  /// Reverse sweep from a scalar loss; accumulates parameter gradients
  /// into their stores.
  void backward(Var loss);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Tensor* grad_sink = nullptr;  // ParamStore gradient slot for param leaves
    std::function<void(Graph&, Node&)> backward_fn;
  };

  Var emit(Tensor value, bool requires_grad, std::function<void(Graph&, Node&)> backward_fn);
  Node& node(Var v);
  Tensor& grad_of(Var v);
  bool needs_grad(Var v) const;

  std::vector<Node> nodes_;
  friend struct GraphTestPeer;
};

}  // namespace panoptix::nn
