#include "panoptix/tra.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "panoptix/registry.hpp"
#include "panoptix/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace panoptix {

using nn::Graph;
using nn::Tensor;
using nn::Var;

namespace {

bool is_disc_param(const std::string& name) { return name.rfind("disc", 0) == 0; }

void validate_forward_inputs(const Image& x, const std::vector<BinaryMask>& masks) {
  if (masks.empty()) throw std::invalid_argument("empty mask list");
  for (const auto& m : masks) {
    if (m.height != x.height || m.width != x.width) {
      throw std::invalid_argument("tra_forward: mask shape " + std::to_string(m.height) + "x" +
                                  std::to_string(m.width) + " does not match image");
    }
  }
  for (size_t i = 0; i < masks.size(); ++i) {
    for (size_t j = i + 1; j < masks.size(); ++j) {
      for (size_t k = 0; k < masks[i].bits.size(); ++k) {
        if (masks[i].bits[k] && masks[j].bits[k]) {
          throw std::invalid_argument("overlap violation: instance masks " + std::to_string(i) +
                                      "," + std::to_string(j));
        }
      }
    }
  }
}

Var broadcast3(Graph& g, Var w) { return g.concat_channels({w, w, w}); }

/// Mean of per-instance L1 terms.
Var mask_l1_mean(Graph& g, const std::vector<Var>& a, const std::vector<Var>& b) {
  std::vector<Var> terms;
  for (size_t n = 0; n < a.size(); ++n) terms.push_back(g.l1_diff(a[n], b[n]));
  return g.mul_scalar(g.add_all(terms), 1.0 / static_cast<double>(terms.size()));
}

json train_log_to_json(const std::vector<TrainLogEntry>& log) {
  json out = json::array();
  for (const auto& entry : log) {
    out.push_back({{"step", entry.step}, {"components", entry.components}});
  }
  return out;
}

std::vector<TrainLogEntry> train_log_from_json(const json& j) {
  std::vector<TrainLogEntry> out;
  for (const auto& e : j) {
    TrainLogEntry entry;
    entry.step = e.at("step").get<int64_t>();
    for (const auto& [k, v] : e.at("components").items()) entry.components[k] = v.get<double>();
    out.push_back(std::move(entry));
  }
  return out;
}

/// Value-level translation that also reports the soft union of the
/// generated masks (used as the discriminator condition channel).
struct TranslatedValues {
  Image image;
  std::vector<Tensor> soft_masks;
  Tensor soft_union;  // (H, W, 1)
};

TranslatedValues translate_values(TraBundle& bundle, TraDirection dir, const Image& x,
                                  const std::vector<BinaryMask>& masks) {
  Graph g;
  Var input = g.input(nn::image_to_tensor(x));
  std::vector<Var> mask_vars;
  for (const auto& m : masks) mask_vars.push_back(g.input(nn::mask_to_tensor(m)));
  TraTranslateVars out = tra_translate(g, bundle, dir, input, mask_vars);
  TranslatedValues values;
  values.image = nn::tensor_to_image(g.value(out.image));
  for (Var v : out.soft_masks) values.soft_masks.push_back(g.value(v));
  values.soft_union = g.value(g.soft_union(out.soft_masks));
  return values;
}

}  // namespace

nn::ContentEncoder TraBundle::image_encoder(bool forward) const {
  return nn::ContentEncoder{forward ? "gen_fwd.fx." : "gen_rev.fx.", 3, arch.fx_base, arch.fx_out};
}

nn::ContentEncoder TraBundle::mask_encoder(bool forward) const {
  return nn::ContentEncoder{forward ? "gen_fwd.fp." : "gen_rev.fp.", 1, arch.fp_base, arch.fp_out};
}

nn::Decoder TraBundle::image_decoder(bool forward) const {
  nn::Decoder d;
  d.prefix = forward ? "gen_fwd.dx." : "gen_rev.dx.";
  d.in_channels = arch.fx_out + arch.fp_out;
  d.base = arch.dec_base;
  d.out_channels = 3;
  d.norm = nn::Decoder::Norm::Instance;
  d.output = nn::Decoder::Output::Tanh;
  return d;
}

nn::Decoder TraBundle::mask_decoder(bool forward) const {
  nn::Decoder d;
  d.prefix = forward ? "gen_fwd.dp." : "gen_rev.dp.";
  d.in_channels = arch.fx_out + 2 * arch.fp_out;
  d.base = arch.dec_base;
  d.out_channels = 1;
  d.norm = nn::Decoder::Norm::Instance;
  d.output = nn::Decoder::Output::Sigmoid;
  return d;
}

nn::PatchDiscriminator TraBundle::discriminator(bool forward) const {
  // Image plus one union-of-masks channel.
  return nn::PatchDiscriminator{forward ? "disc_r." : "disc_i.", 4, arch.disc_base};
}

TraBundle make_tra_bundle(const std::string& source_label, const std::string& target_label,
                          uint64_t seed, const TraArch& arch, const TraWeights& weights) {
  if (source_label.empty() || target_label.empty() || source_label == target_label) {
    throw std::invalid_argument("TRA bundle needs two distinct non-empty labels");
  }
  TraBundle b;
  b.source_label = source_label;
  b.target_label = target_label;
  b.arch = arch;
  b.weights = weights;
  Rng rng(mix_seed(seed, 0x747261));
  const double sd = arch.init_stddev;
  b.image_encoder(true).register_params(b.params, rng, sd);
  b.mask_encoder(true).register_params(b.params, rng, sd);
  b.image_decoder(true).register_params(b.params, rng, sd);
  b.mask_decoder(true).register_params(b.params, rng, sd);
  b.image_encoder(false).register_params(b.params, rng, sd);
  b.mask_encoder(false).register_params(b.params, rng, sd);
  b.image_decoder(false).register_params(b.params, rng, sd);
  b.mask_decoder(false).register_params(b.params, rng, sd);
  b.discriminator(true).register_params(b.params, rng, sd);
  b.discriminator(false).register_params(b.params, rng, sd);
  return b;
}

TraTranslateVars tra_translate(Graph& g, TraBundle& bundle, TraDirection direction, Var x,
                               const std::vector<Var>& masks) {
  if (masks.empty()) throw std::invalid_argument("empty mask list");
  const bool fwd = direction == TraDirection::Forward;
  auto fx = bundle.image_encoder(fwd);
  auto fp = bundle.mask_encoder(fwd);
  auto dec_x = bundle.image_decoder(fwd);
  auto dec_p = bundle.mask_decoder(fwd);

  Var fx_feat = fx.build(g, bundle.params, x);
  std::vector<Var> fp_feats;
  for (Var m : masks) fp_feats.push_back(fp.build(g, bundle.params, m));
  Var fp_sum = g.add_all(fp_feats);

  TraTranslateVars out;
  out.image = dec_x.build(g, bundle.params, g.concat_channels({fx_feat, fp_sum}));
  for (Var feat : fp_feats) {
    out.soft_masks.push_back(
        dec_p.build(g, bundle.params, g.concat_channels({fx_feat, fp_sum, feat})));
  }
  return out;
}

std::pair<Image, std::vector<BinaryMask>> tra_forward(const Image& x,
                                                      const std::vector<BinaryMask>& masks,
                                                      TraBundle& bundle, TraDirection direction) {
  validate_forward_inputs(x, masks);
  Graph g;
  Var input = g.input(nn::image_to_tensor(x));
  std::vector<Var> mask_vars;
  for (const auto& m : masks) mask_vars.push_back(g.input(nn::mask_to_tensor(m)));
  TraTranslateVars out = tra_translate(g, bundle, direction, input, mask_vars);
  std::vector<BinaryMask> out_masks;
  for (size_t n = 0; n < out.soft_masks.size(); ++n) {
    out_masks.push_back(nn::binarize(g.value(out.soft_masks[n]), masks[n].label));
  }
  return {nn::tensor_to_image(g.value(out.image)), std::move(out_masks)};
}

std::map<std::string, Var> tra_component_vars(Graph& g, const TraChainVars& chains) {
  std::map<std::string, Var> c;
  c["gan"] = g.add(g.mse_to(chains.d_fake_r, 1.0), g.mse_to(chains.d_fake_i, 1.0));

  Var cycle = g.add(g.l1_diff(chains.cycle_i, chains.x_i), g.l1_diff(chains.cycle_r, chains.x_r));
  cycle = g.add(cycle, mask_l1_mean(g, chains.cycle_masks_i, chains.masks_i));
  cycle = g.add(cycle, mask_l1_mean(g, chains.cycle_masks_r, chains.masks_r));
  c["cycle"] = cycle;

  c["identity"] =
      g.add(g.l1_diff(chains.idt_r, chains.x_r), g.l1_diff(chains.idt_i, chains.x_i));

  Var w_fwd = g.mul(g.one_minus(g.soft_union(chains.masks_i)),
                    g.one_minus(g.soft_union(chains.gen_masks_r)));
  Var ctx_fwd = g.mean_all(g.mul(broadcast3(g, w_fwd), g.abs_act(g.sub(chains.fake_r, chains.x_i))));
  Var w_rev = g.mul(g.one_minus(g.soft_union(chains.masks_r)),
                    g.one_minus(g.soft_union(chains.gen_masks_i)));
  Var ctx_rev = g.mean_all(g.mul(broadcast3(g, w_rev), g.abs_act(g.sub(chains.fake_i, chains.x_r))));
  c["context"] = g.add(ctx_fwd, ctx_rev);
  return c;
}

Var tra_total_var(Graph& g, const std::map<std::string, Var>& c, const TraWeights& w) {
  Var total = c.at("gan");
  total = g.add(total, g.mul_scalar(c.at("cycle"), w.cycle));
  total = g.add(total, g.mul_scalar(c.at("identity"), w.identity));
  total = g.add(total, g.mul_scalar(c.at("context"), w.context));
  return total;
}

TraGraphOutputs build_tra_loss(Graph& g, TraBundle& bundle, const Image& x_i,
                               const std::vector<BinaryMask>& masks_i, const Image& x_r,
                               const std::vector<BinaryMask>& masks_r) {
  validate_forward_inputs(x_i, masks_i);
  validate_forward_inputs(x_r, masks_r);

  TraChainVars chains;
  chains.x_i = g.input(nn::image_to_tensor(x_i));
  chains.x_r = g.input(nn::image_to_tensor(x_r));
  for (const auto& m : masks_i) chains.masks_i.push_back(g.input(nn::mask_to_tensor(m)));
  for (const auto& m : masks_r) chains.masks_r.push_back(g.input(nn::mask_to_tensor(m)));

  TraTranslateVars fwd = tra_translate(g, bundle, TraDirection::Forward, chains.x_i, chains.masks_i);
  chains.fake_r = fwd.image;
  chains.gen_masks_r = fwd.soft_masks;
  TraTranslateVars rev = tra_translate(g, bundle, TraDirection::Reverse, chains.x_r, chains.masks_r);
  chains.fake_i = rev.image;
  chains.gen_masks_i = rev.soft_masks;

  TraTranslateVars cyc_i =
      tra_translate(g, bundle, TraDirection::Reverse, chains.fake_r, chains.gen_masks_r);
  chains.cycle_i = cyc_i.image;
  chains.cycle_masks_i = cyc_i.soft_masks;
  TraTranslateVars cyc_r =
      tra_translate(g, bundle, TraDirection::Forward, chains.fake_i, chains.gen_masks_i);
  chains.cycle_r = cyc_r.image;
  chains.cycle_masks_r = cyc_r.soft_masks;

  chains.idt_r =
      tra_translate(g, bundle, TraDirection::Forward, chains.x_r, chains.masks_r).image;
  chains.idt_i =
      tra_translate(g, bundle, TraDirection::Reverse, chains.x_i, chains.masks_i).image;

  auto disc_r = bundle.discriminator(true);
  auto disc_i = bundle.discriminator(false);
  chains.d_fake_r = disc_r.build(
      g, bundle.params, g.concat_channels({chains.fake_r, g.soft_union(chains.gen_masks_r)}));
  chains.d_fake_i = disc_i.build(
      g, bundle.params, g.concat_channels({chains.fake_i, g.soft_union(chains.gen_masks_i)}));

  TraGraphOutputs out;
  out.components = tra_component_vars(g, chains);
  out.total = tra_total_var(g, out.components, bundle.weights);
  out.fake_r = chains.fake_r;
  out.fake_i = chains.fake_i;
  out.gen_masks_r = chains.gen_masks_r;
  out.gen_masks_i = chains.gen_masks_i;
  return out;
}

Var build_tra_disc_loss(Graph& g, TraBundle& bundle, const Image& x_i,
                        const std::vector<BinaryMask>& masks_i, const Image& x_r,
                        const std::vector<BinaryMask>& masks_r) {
  validate_forward_inputs(x_i, masks_i);
  validate_forward_inputs(x_r, masks_r);
  TranslatedValues fake_r = translate_values(bundle, TraDirection::Forward, x_i, masks_i);
  TranslatedValues fake_i = translate_values(bundle, TraDirection::Reverse, x_r, masks_r);

  auto disc_r = bundle.discriminator(true);
  auto disc_i = bundle.discriminator(false);
  Var real_r_in = g.concat_channels(
      {g.input(nn::image_to_tensor(x_r)), g.input(nn::mask_to_tensor(mask_union(masks_r)))});
  Var fake_r_in = g.concat_channels(
      {g.input(nn::image_to_tensor(fake_r.image)), g.input(fake_r.soft_union)});
  Var real_i_in = g.concat_channels(
      {g.input(nn::image_to_tensor(x_i)), g.input(nn::mask_to_tensor(mask_union(masks_i)))});
  Var fake_i_in = g.concat_channels(
      {g.input(nn::image_to_tensor(fake_i.image)), g.input(fake_i.soft_union)});

  Var loss_r = g.add(g.mse_to(disc_r.build(g, bundle.params, real_r_in), 1.0),
                     g.mse_to(disc_r.build(g, bundle.params, fake_r_in), 0.0));
  Var loss_i = g.add(g.mse_to(disc_i.build(g, bundle.params, real_i_in), 1.0),
                     g.mse_to(disc_i.build(g, bundle.params, fake_i_in), 0.0));
  return g.add(loss_r, loss_i);
}

TraLossComponents tra_loss(const Image& x_i, const std::vector<BinaryMask>& masks_i,
                           const Image& x_r, const std::vector<BinaryMask>& masks_r,
                           TraBundle& bundle) {
  Graph g;
  TraGraphOutputs out = build_tra_loss(g, bundle, x_i, masks_i, x_r, masks_r);
  TraLossComponents result;
  for (const auto& [name, var] : out.components) result.values[name] = g.scalar_value(var);
  result.total = g.scalar_value(out.total);
  result.values["total"] = result.total;
  if (!std::isfinite(result.total)) throw std::runtime_error("tra_loss: non-finite loss");
  return result;
}

std::vector<std::vector<int>> sequential_chunks(int n, int chunk_size) {
  if (n < 0 || chunk_size <= 0) throw std::invalid_argument("sequential_chunks: bad arguments");
  std::vector<std::vector<int>> chunks;
  for (int start = 0; start < n; start += chunk_size) {
    std::vector<int> chunk;
    for (int i = start; i < std::min(n, start + chunk_size); ++i) chunk.push_back(i);
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

namespace {

std::vector<BinaryMask> masks_with_label(const SceneRecord& rec, const std::string& label) {
  std::vector<BinaryMask> out;
  for (const auto& m : rec.masks.instances) {
    if (m.label == label) out.push_back(m);
  }
  return out;
}

std::vector<BinaryMask> pick(const std::vector<BinaryMask>& masks, const std::vector<int>& idxs) {
  std::vector<BinaryMask> out;
  for (int i : idxs) out.push_back(masks[static_cast<size_t>(i)]);
  return out;
}

/// Generator-side loss for one chunk pair. Either side may be absent when
/// its sample ran out of chunks; terms touching a missing side are dropped.
struct ChunkLoss {
  std::map<std::string, double> components;
  Var total;
  Var fake_r, fake_i;  // invalid when that direction did not run
};

ChunkLoss build_chunk_loss(Graph& g, TraBundle& bundle, const Image& cur_i,
                           const std::vector<BinaryMask>& chunk_i, const Image& orig_i,
                           const Image& cur_r, const std::vector<BinaryMask>& chunk_r,
                           const Image& orig_r) {
  ChunkLoss out;
  std::vector<Var> gan_terms, cycle_terms, idt_terms, ctx_terms;

  Var x_i, x_r;
  std::vector<Var> m_i, m_r;
  if (!chunk_i.empty()) {
    x_i = g.input(nn::image_to_tensor(cur_i));
    for (const auto& m : chunk_i) m_i.push_back(g.input(nn::mask_to_tensor(m)));
  }
  if (!chunk_r.empty()) {
    x_r = g.input(nn::image_to_tensor(cur_r));
    for (const auto& m : chunk_r) m_r.push_back(g.input(nn::mask_to_tensor(m)));
  }

  if (!chunk_i.empty()) {
    TraTranslateVars fwd = tra_translate(g, bundle, TraDirection::Forward, x_i, m_i);
    out.fake_r = fwd.image;
    Var u_gen = g.soft_union(fwd.soft_masks);
    Var d_fake = bundle.discriminator(true).build(g, bundle.params,
                                                  g.concat_channels({fwd.image, u_gen}));
    gan_terms.push_back(g.mse_to(d_fake, 1.0));

    TraTranslateVars cyc = tra_translate(g, bundle, TraDirection::Reverse, fwd.image, fwd.soft_masks);
    cycle_terms.push_back(g.l1_diff(cyc.image, x_i));
    cycle_terms.push_back(mask_l1_mean(g, cyc.soft_masks, m_i));

    Var w = g.mul(g.one_minus(g.soft_union(m_i)), g.one_minus(u_gen));
    ctx_terms.push_back(g.mean_all(g.mul(broadcast3(g, w), g.abs_act(g.sub(fwd.image, x_i)))));

    Var orig = g.input(nn::image_to_tensor(orig_i));
    idt_terms.push_back(
        g.l1_diff(tra_translate(g, bundle, TraDirection::Reverse, orig, m_i).image, orig));
  }
  if (!chunk_r.empty()) {
    TraTranslateVars rev = tra_translate(g, bundle, TraDirection::Reverse, x_r, m_r);
    out.fake_i = rev.image;
    Var u_gen = g.soft_union(rev.soft_masks);
    Var d_fake = bundle.discriminator(false).build(g, bundle.params,
                                                   g.concat_channels({rev.image, u_gen}));
    gan_terms.push_back(g.mse_to(d_fake, 1.0));

    TraTranslateVars cyc = tra_translate(g, bundle, TraDirection::Forward, rev.image, rev.soft_masks);
    cycle_terms.push_back(g.l1_diff(cyc.image, x_r));
    cycle_terms.push_back(mask_l1_mean(g, cyc.soft_masks, m_r));

    Var w = g.mul(g.one_minus(g.soft_union(m_r)), g.one_minus(u_gen));
    ctx_terms.push_back(g.mean_all(g.mul(broadcast3(g, w), g.abs_act(g.sub(rev.image, x_r)))));

    Var orig = g.input(nn::image_to_tensor(orig_r));
    idt_terms.push_back(
        g.l1_diff(tra_translate(g, bundle, TraDirection::Forward, orig, m_r).image, orig));
  }

  Var gan = g.add_all(gan_terms);
  Var cycle = g.add_all(cycle_terms);
  Var identity = g.add_all(idt_terms);
  Var context = g.add_all(ctx_terms);
  out.total = g.add(gan, g.mul_scalar(cycle, bundle.weights.cycle));
  out.total = g.add(out.total, g.mul_scalar(identity, bundle.weights.identity));
  out.total = g.add(out.total, g.mul_scalar(context, bundle.weights.context));
  out.components["gan"] = g.scalar_value(gan);
  out.components["cycle"] = g.scalar_value(cycle);
  out.components["identity"] = g.scalar_value(identity);
  out.components["context"] = g.scalar_value(context);
  out.components["total"] = g.scalar_value(out.total);
  return out;
}

Var build_chunk_disc_loss(Graph& g, TraBundle& bundle, const Image& cur_i,
                          const std::vector<BinaryMask>& chunk_i, const Image& orig_i,
                          const std::vector<BinaryMask>& all_masks_i, const Image& cur_r,
                          const std::vector<BinaryMask>& chunk_r, const Image& orig_r,
                          const std::vector<BinaryMask>& all_masks_r) {
  std::vector<Var> terms;
  if (!chunk_i.empty()) {
    TranslatedValues fake = translate_values(bundle, TraDirection::Forward, cur_i, chunk_i);
    const std::vector<BinaryMask>& real_masks = chunk_r.empty() ? all_masks_r : chunk_r;
    auto disc = bundle.discriminator(true);
    Var real_in = g.concat_channels({g.input(nn::image_to_tensor(orig_r)),
                                     g.input(nn::mask_to_tensor(mask_union(real_masks)))});
    Var fake_in =
        g.concat_channels({g.input(nn::image_to_tensor(fake.image)), g.input(fake.soft_union)});
    terms.push_back(g.mse_to(disc.build(g, bundle.params, real_in), 1.0));
    terms.push_back(g.mse_to(disc.build(g, bundle.params, fake_in), 0.0));
  }
  if (!chunk_r.empty()) {
    TranslatedValues fake = translate_values(bundle, TraDirection::Reverse, cur_r, chunk_r);
    const std::vector<BinaryMask>& real_masks = chunk_i.empty() ? all_masks_i : chunk_i;
    auto disc = bundle.discriminator(false);
    Var real_in = g.concat_channels({g.input(nn::image_to_tensor(orig_i)),
                                     g.input(nn::mask_to_tensor(mask_union(real_masks)))});
    Var fake_in =
        g.concat_channels({g.input(nn::image_to_tensor(fake.image)), g.input(fake.soft_union)});
    terms.push_back(g.mse_to(disc.build(g, bundle.params, real_in), 1.0));
    terms.push_back(g.mse_to(disc.build(g, bundle.params, fake_in), 0.0));
  }
  return g.add_all(terms);
}

}  // namespace

TraBundle train_tra(const std::vector<SceneRecord>& dataset_i,
                    const std::vector<SceneRecord>& dataset_r, const std::string& source_label,
                    const std::string& target_label, const nn::TrainConfig& config,
                    const TraArch& arch, const TraWeights& weights,
                    const TrainLogObserver& on_log) {
  config.validate();
  if (dataset_i.empty() || dataset_r.empty()) throw std::invalid_argument("empty dataset");
  if (config.epochs <= 0) throw std::invalid_argument("train_tra: epochs must be positive");

  std::vector<std::vector<BinaryMask>> masks_i(dataset_i.size()), masks_r(dataset_r.size());
  for (size_t k = 0; k < dataset_i.size(); ++k) {
    masks_i[k] = masks_with_label(dataset_i[k], source_label);
    if (masks_i[k].empty()) {
      throw std::invalid_argument("source record " + std::to_string(k) +
                                  " has no instance mask labeled '" + source_label + "'");
    }
  }
  for (size_t k = 0; k < dataset_r.size(); ++k) {
    masks_r[k] = masks_with_label(dataset_r[k], target_label);
    if (masks_r[k].empty()) {
      throw std::invalid_argument("target record " + std::to_string(k) +
                                  " has no instance mask labeled '" + target_label + "'");
    }
  }

  TraBundle bundle = make_tra_bundle(source_label, target_label, config.seed, arch, weights);
  nn::AdamOptimizer adam_g(config, [](const std::string& n) { return !is_disc_param(n); });
  nn::AdamOptimizer adam_d(config, is_disc_param);

  struct Acc {
    std::map<std::string, double> sums;
    int64_t window = 0;
    void add(const std::map<std::string, double>& c) {
      for (const auto& [k, v] : c) sums[k] += v;
      ++window;
    }
    void flush(std::vector<TrainLogEntry>& log, int64_t step, const TrainLogObserver& on_log) {
      if (window == 0) return;
      TrainLogEntry e;
      e.step = step;
      for (const auto& [k, v] : sums) e.components[k] = v / static_cast<double>(window);
      if (on_log) on_log(e);
      log.push_back(std::move(e));
      sums.clear();
      window = 0;
    }
  } acc;

  int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<size_t> order_i(dataset_i.size()), order_r(dataset_r.size());
    std::iota(order_i.begin(), order_i.end(), 0);
    std::iota(order_r.begin(), order_r.end(), 0);
    Rng shuffle_rng(mix_seed(config.seed, static_cast<uint64_t>(epoch), 0x5348));
    for (size_t k = order_i.size(); k > 1; --k) {
      std::swap(order_i[k - 1], order_i[static_cast<size_t>(shuffle_rng.uniform_int(
                                    static_cast<int64_t>(k)))]);
    }
    for (size_t k = order_r.size(); k > 1; --k) {
      std::swap(order_r[k - 1], order_r[static_cast<size_t>(shuffle_rng.uniform_int(
                                    static_cast<int64_t>(k)))]);
    }

    for (size_t s = 0; s < dataset_i.size(); ++s) {
      const size_t idx_i = order_i[s];
      const size_t idx_r = order_r[s % order_r.size()];
      const Image& orig_i = dataset_i[idx_i].image;
      const Image& orig_r = dataset_r[idx_r].image;
      const auto& sample_masks_i = masks_i[idx_i];
      const auto& sample_masks_r = masks_r[idx_r];

      auto chunks_i = sequential_chunks(static_cast<int>(sample_masks_i.size()), 2);
      auto chunks_r = sequential_chunks(static_cast<int>(sample_masks_r.size()), 2);
      const size_t n_chunks = std::max(chunks_i.size(), chunks_r.size());

      // The chunk loop carries the partially translated images forward;
      // only values cross the chunk boundary, never gradients.
      Image cur_i = orig_i;
      Image cur_r = orig_r;
      std::map<std::string, double> step_components;
      int chunk_count = 0;
      for (size_t j = 0; j < n_chunks; ++j) {
        std::vector<BinaryMask> chunk_masks_i =
            j < chunks_i.size() ? pick(sample_masks_i, chunks_i[j]) : std::vector<BinaryMask>{};
        std::vector<BinaryMask> chunk_masks_r =
            j < chunks_r.size() ? pick(sample_masks_r, chunks_r[j]) : std::vector<BinaryMask>{};

        bundle.params.zero_grads();
        double d_value;
        {
          Graph g;
          Var d_loss = build_chunk_disc_loss(g, bundle, cur_i, chunk_masks_i, orig_i,
                                             sample_masks_i, cur_r, chunk_masks_r, orig_r,
                                             sample_masks_r);
          d_value = g.scalar_value(d_loss);
          g.backward(d_loss);
        }
        adam_d.step(bundle.params);

        bundle.params.zero_grads();
        {
          Graph g;
          ChunkLoss loss = build_chunk_loss(g, bundle, cur_i, chunk_masks_i, orig_i, cur_r,
                                            chunk_masks_r, orig_r);
          if (!std::isfinite(loss.components.at("total"))) {
            throw std::runtime_error("train_tra: non-finite loss at step " +
                                     std::to_string(step + 1));
          }
          g.backward(loss.total);
          if (loss.fake_r.valid()) cur_i = nn::tensor_to_image(g.value(loss.fake_r));
          if (loss.fake_i.valid()) cur_r = nn::tensor_to_image(g.value(loss.fake_i));
          loss.components["d_total"] = d_value;
          for (const auto& [k, v] : loss.components) step_components[k] += v;
          ++chunk_count;
        }
        adam_g.step(bundle.params);
      }

      for (auto& [k, v] : step_components) v /= static_cast<double>(chunk_count);
      acc.add(step_components);
      ++step;
      if (step == 1 || step % 100 == 0) acc.flush(bundle.train_log, step, on_log);
    }
  }
  acc.flush(bundle.train_log, step, on_log);
  return bundle;
}

std::pair<Image, MaskSet> apply_tra_chain(const Image& x, const MaskSet& masks,
                                          const std::vector<ThingStep>& thing_steps,
                                          Registry& registry) {
  Image current = x;
  MaskSet current_masks = masks;
  for (size_t k = 0; k < thing_steps.size(); ++k) {
    const ThingStep& step = thing_steps[k];
    const std::string where = "step " + std::to_string(k + 1);
    std::shared_ptr<TraBundle> bundle;
    try {
      bundle = registry.tra(step.tra_bundle_id);
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }

    TraDirection dir;
    if (bundle->source_label == step.source_label && bundle->target_label == step.target_label) {
      dir = TraDirection::Forward;
    } else if (bundle->source_label == step.target_label &&
               bundle->target_label == step.source_label) {
      dir = TraDirection::Reverse;
    } else {
      throw std::runtime_error(where + ": bundle '" + step.tra_bundle_id + "' maps " +
                               bundle->source_label + "<->" + bundle->target_label +
                               ", not " + step.source_label + "->" + step.target_label);
    }

    std::vector<size_t> positions;
    std::vector<BinaryMask> selected;
    for (size_t m = 0; m < current_masks.instances.size(); ++m) {
      if (current_masks.instances[m].label == step.source_label) {
        positions.push_back(m);
        selected.push_back(current_masks.instances[m]);
      }
    }
    if (selected.empty()) {
      throw std::runtime_error(where + ": no masks labeled " + step.source_label);
    }

    auto [translated, new_masks] = tra_forward(current, selected, *bundle, dir);
    current = std::move(translated);
    for (size_t m = 0; m < positions.size(); ++m) {
      new_masks[m].label = step.target_label;
      current_masks.instances[positions[m]] = std::move(new_masks[m]);
    }
  }
  return {std::move(current), std::move(current_masks)};
}

void save_tra_bundle(const TraBundle& bundle, const nn::TrainConfig& config,
                     const std::string& dir) {
  nn::save_checkpoint(bundle.params, dir);
  json meta;
  meta["source_label"] = bundle.source_label;
  meta["target_label"] = bundle.target_label;
  meta["config"] = {{"learning_rate", config.learning_rate},
                    {"adam_beta1", config.adam_beta1},
                    {"adam_beta2", config.adam_beta2},
                    {"batch_size", config.batch_size},
                    {"iterations", config.iterations},
                    {"epochs", config.epochs},
                    {"seed", config.seed},
                    {"weights",
                     {{"cycle", bundle.weights.cycle},
                      {"identity", bundle.weights.identity},
                      {"context", bundle.weights.context}}},
                    {"arch",
                     {{"fx_base", bundle.arch.fx_base},
                      {"fx_out", bundle.arch.fx_out},
                      {"fp_base", bundle.arch.fp_base},
                      {"fp_out", bundle.arch.fp_out},
                      {"dec_base", bundle.arch.dec_base},
                      {"disc_base", bundle.arch.disc_base},
                      {"init_stddev", bundle.arch.init_stddev}}}};
  meta["train_log"] = train_log_to_json(bundle.train_log);
  std::ofstream f(fs::path(dir) / "tra_meta.json", std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write tra_meta.json in " + dir);
  f << meta.dump(2) << "\n";
}

TraBundle load_tra_bundle(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "tra_meta.json");
  if (!f) throw std::runtime_error("missing tra_meta.json in " + dir);
  json meta;
  try {
    f >> meta;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed tra_meta.json in " + dir + ": " + e.what());
  }
  try {
    TraArch arch;
    const json& a = meta.at("config").at("arch");
    arch.fx_base = a.at("fx_base").get<int>();
    arch.fx_out = a.at("fx_out").get<int>();
    arch.fp_base = a.at("fp_base").get<int>();
    arch.fp_out = a.at("fp_out").get<int>();
    arch.dec_base = a.at("dec_base").get<int>();
    arch.disc_base = a.at("disc_base").get<int>();
    arch.init_stddev = a.at("init_stddev").get<double>();
    TraWeights weights;
    const json& w = meta.at("config").at("weights");
    weights.cycle = w.at("cycle").get<double>();
    weights.identity = w.at("identity").get<double>();
    weights.context = w.at("context").get<double>();
    TraBundle bundle = make_tra_bundle(meta.at("source_label").get<std::string>(),
                                       meta.at("target_label").get<std::string>(), 0, arch, weights);
    nn::load_checkpoint(bundle.params, dir);
    if (meta.contains("train_log")) bundle.train_log = train_log_from_json(meta["train_log"]);
    return bundle;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed tra_meta.json in " + dir + ": " + e.what());
  }
}

}  // namespace panoptix
