#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "panoptix/graph.hpp"
#include "panoptix/image.hpp"
#include "panoptix/params.hpp"

namespace panoptix::nn {

// Bridges between scene-model values and tensors.
Tensor image_to_tensor(const Image& image);
Image tensor_to_image(const Tensor& t);
Tensor mask_to_tensor(const BinaryMask& mask);                    // (H, W, 1)
BinaryMask binarize(const Tensor& soft, const std::string& label, double threshold = 0.5);

/// d_s independent standard normal draws, deterministic in the seed.
Tensor sample_style(uint64_t seed, int dim = 8);

/// Downsampling encoder: 7x7 stride-1 conv, two 4x4 stride-2 convs, two
/// residual blocks. Instance norm after every conv except the last
/// residual conv; rectifier nonlinearity. Output (H/4, W/4, out_channels).
struct ContentEncoder {
  std::string prefix;
  int in_channels = 3;
  int base = 16;
  int out_channels = 32;

  void register_params(ParamStore& store, panoptix::Rng& rng, double stddev = 0.02) const;
  Var build(Graph& g, ParamStore& store, Var image) const;
  Tensor forward(ParamStore& store, const Image& image) const;
};

/// Style branch: convs without normalization, global average pooling, and a
/// linear map to the style dimension.
struct StyleEncoder {
  std::string prefix;
  int in_channels = 3;
  int base = 16;
  int style_dim = 8;

  void register_params(ParamStore& store, panoptix::Rng& rng, double stddev = 0.02) const;
  Var build(Graph& g, ParamStore& store, Var image) const;
  Tensor forward(ParamStore& store, const Image& image) const;
};

/// Decoder: two residual blocks, two (nearest upsample x2 + 5x5 conv)
/// stages, then a 7x7 conv. Residual normalization is either plain
/// instance norm or adaptive (per-channel scale/shift from a style MLP).
struct Decoder {
  enum class Norm { Instance, Adaptive };
  enum class Output { Tanh, Sigmoid };

  std::string prefix;
  int in_channels = 32;
  int base = 16;
  int out_channels = 3;
  Norm norm = Norm::Adaptive;
  Output output = Output::Tanh;
  int style_dim = 8;    // Adaptive only
  int mlp_hidden = 32;  // Adaptive only

  void register_params(ParamStore& store, panoptix::Rng& rng, double stddev = 0.02) const;
  /// `style` must be a valid rank-1 (style_dim) var when norm is Adaptive.
  Var build(Graph& g, ParamStore& store, Var content, Var style = {}) const;
};

/// LSGAN patch discriminator: three 4x4 stride-2 convs with leaky-rectifier
/// activations and a 1x1 conv to a single-channel score map (H/8, W/8).
/// Condition masks enter as extra input channels.
struct PatchDiscriminator {
  std::string prefix;
  int in_channels = 3;  // image channels plus condition channels
  int base = 16;

  void register_params(ParamStore& store, panoptix::Rng& rng, double stddev = 0.02) const;
  Var build(Graph& g, ParamStore& store, Var input) const;
  Tensor forward(ParamStore& store, const Image& image,
                 const std::vector<BinaryMask>& condition_masks = {}) const;
};

}  // namespace panoptix::nn
