#include "panoptix/nets.hpp"

#include <stdexcept>

#include "panoptix/rng.hpp"

namespace panoptix::nn {

Tensor image_to_tensor(const Image& image) {
  Tensor t({image.height, image.width, 3});
  for (int64_t i = 0; i < t.size(); ++i) t[i] = image.pixels[static_cast<size_t>(i)];
  return t;
}

Image tensor_to_image(const Tensor& t) {
  if (t.rank() != 3 || t.dim(2) != 3) {
    throw std::invalid_argument("tensor_to_image: expected (H, W, 3), got " + t.shape_str());
  }
  Image img = Image::zeros(t.dim(0), t.dim(1));
  for (int64_t i = 0; i < t.size(); ++i) img.pixels[static_cast<size_t>(i)] = t[i];
  return img;
}

Tensor mask_to_tensor(const BinaryMask& mask) {
  Tensor t({mask.height, mask.width, 1});
  for (int64_t i = 0; i < t.size(); ++i) t[i] = mask.bits[static_cast<size_t>(i)] ? 1.0 : 0.0;
  return t;
}

BinaryMask binarize(const Tensor& soft, const std::string& label, double threshold) {
  if (soft.rank() != 3 || soft.dim(2) != 1) {
    throw std::invalid_argument("binarize: expected (H, W, 1), got " + soft.shape_str());
  }
  BinaryMask m = BinaryMask::zeros(soft.dim(0), soft.dim(1), label);
  for (int64_t i = 0; i < soft.size(); ++i) m.bits[static_cast<size_t>(i)] = soft[i] >= threshold ? 1 : 0;
  return m;
}

Tensor sample_style(uint64_t seed, int dim) {
  panoptix::Rng rng(panoptix::mix_seed(seed, 0x7374796cULL));
  Tensor t({dim});
  for (int i = 0; i < dim; ++i) t[i] = rng.normal();
  return t;
}

namespace {

void register_conv(ParamStore& store, panoptix::Rng& rng, double stddev, const std::string& name,
                   int k, int in_c, int out_c) {
  store.create_normal(name + ".w", {k, k, in_c, out_c}, rng, stddev);
  store.create_zeros(name + ".b", {out_c});
}

Var conv(Graph& g, ParamStore& store, const std::string& name, Var x, int stride, int pad) {
  return g.conv2d(x, g.param(store, name + ".w"), g.param(store, name + ".b"), stride, pad);
}

void check_divisible_by_4(const Tensor& t, const std::string& who) {
  if (t.rank() != 3) throw std::invalid_argument(who + ": expected (H, W, C) input");
  if (t.dim(0) % 4 != 0 || t.dim(1) % 4 != 0) {
    throw std::invalid_argument(who + ": input " + t.shape_str() + " not divisible by 4");
  }
}

}  // namespace

void ContentEncoder::register_params(ParamStore& store, panoptix::Rng& rng, double stddev) const {
  register_conv(store, rng, stddev, prefix + "conv1", 7, in_channels, base);
  register_conv(store, rng, stddev, prefix + "down1", 4, base, out_channels);
  register_conv(store, rng, stddev, prefix + "down2", 4, out_channels, out_channels);
  register_conv(store, rng, stddev, prefix + "res1.conv1", 3, out_channels, out_channels);
  register_conv(store, rng, stddev, prefix + "res1.conv2", 3, out_channels, out_channels);
  register_conv(store, rng, stddev, prefix + "res2.conv1", 3, out_channels, out_channels);
  register_conv(store, rng, stddev, prefix + "res2.conv2", 3, out_channels, out_channels);
}

Var ContentEncoder::build(Graph& g, ParamStore& store, Var image) const {
  check_divisible_by_4(g.value(image), "content encoder");
  Var h = g.relu(g.instance_norm(conv(g, store, prefix + "conv1", image, 1, 3)));
  h = g.relu(g.instance_norm(conv(g, store, prefix + "down1", h, 2, 1)));
  h = g.relu(g.instance_norm(conv(g, store, prefix + "down2", h, 2, 1)));
  // Residual block 1: both convs normalized.
  {
    Var r = g.relu(g.instance_norm(conv(g, store, prefix + "res1.conv1", h, 1, 1)));
    r = g.instance_norm(conv(g, store, prefix + "res1.conv2", r, 1, 1));
    h = g.add(h, r);
  }
  // Residual block 2: no normalization on the final residual output.
  {
    Var r = g.relu(g.instance_norm(conv(g, store, prefix + "res2.conv1", h, 1, 1)));
    r = conv(g, store, prefix + "res2.conv2", r, 1, 1);
    h = g.add(h, r);
  }
  return h;
}

Tensor ContentEncoder::forward(ParamStore& store, const Image& image) const {
  Graph g;
  Var out = build(g, store, g.input(image_to_tensor(image)));
  return g.value(out);
}

void StyleEncoder::register_params(ParamStore& store, panoptix::Rng& rng, double stddev) const {
  register_conv(store, rng, stddev, prefix + "conv1", 7, in_channels, base);
  register_conv(store, rng, stddev, prefix + "down1", 4, base, 2 * base);
  register_conv(store, rng, stddev, prefix + "down2", 4, 2 * base, 4 * base);
  store.create_normal(prefix + "fc.w", {4 * base, style_dim}, rng, stddev);
  store.create_zeros(prefix + "fc.b", {style_dim});
}

Var StyleEncoder::build(Graph& g, ParamStore& store, Var image) const {
  check_divisible_by_4(g.value(image), "style encoder");
  Var h = g.relu(conv(g, store, prefix + "conv1", image, 1, 3));
  h = g.relu(conv(g, store, prefix + "down1", h, 2, 1));
  h = g.relu(conv(g, store, prefix + "down2", h, 2, 1));
  Var pooled = g.global_avg_pool(h);
  return g.linear(pooled, g.param(store, prefix + "fc.w"), g.param(store, prefix + "fc.b"));
}

Tensor StyleEncoder::forward(ParamStore& store, const Image& image) const {
  Graph g;
  Var out = build(g, store, g.input(image_to_tensor(image)));
  return g.value(out);
}

void Decoder::register_params(ParamStore& store, panoptix::Rng& rng, double stddev) const {
  register_conv(store, rng, stddev, prefix + "res1.conv1", 3, in_channels, in_channels);
  register_conv(store, rng, stddev, prefix + "res1.conv2", 3, in_channels, in_channels);
  register_conv(store, rng, stddev, prefix + "res2.conv1", 3, in_channels, in_channels);
  register_conv(store, rng, stddev, prefix + "res2.conv2", 3, in_channels, in_channels);
  register_conv(store, rng, stddev, prefix + "up1", 5, in_channels, base);
  register_conv(store, rng, stddev, prefix + "up2", 5, base, base);
  register_conv(store, rng, stddev, prefix + "out", 7, base, out_channels);
  if (norm == Norm::Adaptive) {
    store.create_normal(prefix + "mlp.fc1.w", {style_dim, mlp_hidden}, rng, stddev);
    store.create_zeros(prefix + "mlp.fc1.b", {mlp_hidden});
    // Four adaptive layers, each taking a (scale, shift) pair per channel.
    store.create_normal(prefix + "mlp.fc2.w", {mlp_hidden, 4 * 2 * in_channels}, rng, stddev);
    store.create_zeros(prefix + "mlp.fc2.b", {4 * 2 * in_channels});
  }
}

Var Decoder::build(Graph& g, ParamStore& store, Var content, Var style) const {
  const Tensor& cv = g.value(content);
  if (cv.rank() != 3 || cv.dim(2) != in_channels) {
    throw std::invalid_argument("decoder: content code shape " + cv.shape_str() +
                                " does not match expected channels " +
                                std::to_string(in_channels));
  }

  // Adaptive normalization: the style vector feeds a small MLP whose output
  // provides per-channel scale/shift for each normalization site. Scale is
  // (1 + delta) so a freshly initialized decoder behaves like instance norm.
  std::vector<Var> scales, shifts;
  if (norm == Norm::Adaptive) {
    if (!style.valid()) throw std::invalid_argument("decoder: adaptive norm requires a style code");
    const Tensor& sv = g.value(style);
    if (sv.rank() != 1 || sv.dim(0) != style_dim) {
      throw std::invalid_argument("decoder: style code shape " + sv.shape_str() +
                                  " does not match style_dim " + std::to_string(style_dim));
    }
    Var h = g.relu(g.linear(style, g.param(store, prefix + "mlp.fc1.w"),
                            g.param(store, prefix + "mlp.fc1.b")));
    Var out = g.linear(h, g.param(store, prefix + "mlp.fc2.w"), g.param(store, prefix + "mlp.fc2.b"));
    for (int j = 0; j < 4; ++j) {
      Var delta = g.slice_vec(out, j * 2 * in_channels, in_channels);
      scales.push_back(g.add_scalar(delta, 1.0));
      shifts.push_back(g.slice_vec(out, j * 2 * in_channels + in_channels, in_channels));
    }
  }

  auto normalize_at = [&](Var x, int site) -> Var {
    Var n = g.instance_norm(x);
    if (norm == Norm::Adaptive) n = g.channel_affine(n, scales[site], shifts[site]);
    return n;
  };

  Var h = content;
  {
    Var r = g.relu(normalize_at(conv(g, store, prefix + "res1.conv1", h, 1, 1), 0));
    r = normalize_at(conv(g, store, prefix + "res1.conv2", r, 1, 1), 1);
    h = g.add(h, r);
  }
  {
    Var r = g.relu(normalize_at(conv(g, store, prefix + "res2.conv1", h, 1, 1), 2));
    r = normalize_at(conv(g, store, prefix + "res2.conv2", r, 1, 1), 3);
    h = g.add(h, r);
  }
  h = g.relu(conv(g, store, prefix + "up1", g.upsample2(h), 1, 2));
  h = g.relu(conv(g, store, prefix + "up2", g.upsample2(h), 1, 2));
  h = conv(g, store, prefix + "out", h, 1, 3);
  return output == Output::Tanh ? g.tanh_act(h) : g.sigmoid(h);
}

void PatchDiscriminator::register_params(ParamStore& store, panoptix::Rng& rng, double stddev) const {
  register_conv(store, rng, stddev, prefix + "d1", 4, in_channels, base);
  register_conv(store, rng, stddev, prefix + "d2", 4, base, 2 * base);
  register_conv(store, rng, stddev, prefix + "d3", 4, 2 * base, 4 * base);
  register_conv(store, rng, stddev, prefix + "score", 1, 4 * base, 1);
}

Var PatchDiscriminator::build(Graph& g, ParamStore& store, Var input) const {
  const Tensor& iv = g.value(input);
  if (iv.rank() != 3 || iv.dim(2) != in_channels) {
    throw std::invalid_argument("discriminator: input shape " + iv.shape_str() +
                                " does not match expected channels " +
                                std::to_string(in_channels));
  }
  Var h = g.leaky_relu(conv(g, store, prefix + "d1", input, 2, 1), 0.2);
  h = g.leaky_relu(conv(g, store, prefix + "d2", h, 2, 1), 0.2);
  h = g.leaky_relu(conv(g, store, prefix + "d3", h, 2, 1), 0.2);
  return conv(g, store, prefix + "score", h, 1, 0);
}

Tensor PatchDiscriminator::forward(ParamStore& store, const Image& image,
                                   const std::vector<BinaryMask>& condition_masks) const {
  Graph g;
  std::vector<Var> channels = {g.input(image_to_tensor(image))};
  for (const BinaryMask& m : condition_masks) {
    if (m.height != image.height || m.width != image.width) {
      throw std::invalid_argument("discriminator: condition mask shape mismatch");
    }
    channels.push_back(g.input(mask_to_tensor(m)));
  }
  Var input = channels.size() == 1 ? channels[0] : g.concat_channels(channels);
  Var out = build(g, store, input);
  return g.value(out);
}

}  // namespace panoptix::nn
