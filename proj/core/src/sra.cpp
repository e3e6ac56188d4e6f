#include "panoptix/sra.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "panoptix/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace panoptix {

using nn::Graph;
using nn::Tensor;
using nn::Var;

namespace {

bool is_disc_param(const std::string& name) { return name.rfind("disc", 0) == 0; }

void check_image(const Image& x, const char* who) {
  if (x.height % 4 != 0 || x.width % 4 != 0 || x.height < 8 || x.width < 8) {
    throw std::invalid_argument(std::string(who) + ": image shape unsupported");
  }
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
    for (const auto& [k, v] : e.at("components").items()) {
      entry.components[k] = v.get<double>();
    }
    out.push_back(std::move(entry));
  }
  return out;
}

/// Accumulates per-component sums and emits window means into the log.
struct LogAccumulator {
  std::map<std::string, double> sums;
  int64_t window = 0;

  void add(const std::map<std::string, double>& components) {
    for (const auto& [k, v] : components) sums[k] += v;
    ++window;
  }
  void flush(std::vector<TrainLogEntry>& log, int64_t step, const TrainLogObserver& on_log) {
    if (window == 0) return;
    TrainLogEntry entry;
    entry.step = step;
    for (const auto& [k, v] : sums) entry.components[k] = v / static_cast<double>(window);
    if (on_log) on_log(entry);
    log.push_back(std::move(entry));
    sums.clear();
    window = 0;
  }
};

}  // namespace

nn::ContentEncoder SraBundle::content_encoder(bool i_side) const {
  return nn::ContentEncoder{i_side ? "enc_c_i." : "enc_c_r.", 3, arch.base, arch.content_channels};
}

nn::StyleEncoder SraBundle::style_encoder(bool i_side) const {
  return nn::StyleEncoder{i_side ? "enc_s_i." : "enc_s_r.", 3, arch.base, arch.style_dim};
}

nn::Decoder SraBundle::generator(bool i_side) const {
  nn::Decoder d;
  d.prefix = i_side ? "gen_i." : "gen_r.";
  d.in_channels = arch.content_channels;
  d.base = arch.base;
  d.out_channels = 3;
  d.norm = nn::Decoder::Norm::Adaptive;
  d.output = nn::Decoder::Output::Tanh;
  d.style_dim = arch.style_dim;
  d.mlp_hidden = arch.mlp_hidden;
  return d;
}

nn::PatchDiscriminator SraBundle::discriminator(bool i_side) const {
  return nn::PatchDiscriminator{i_side ? "disc_i." : "disc_r.", 3, arch.disc_base};
}

SraBundle make_sra_bundle(const std::string& domain_i, const std::string& domain_r, uint64_t seed,
                          const SraArch& arch, const SraLambdas& lambdas) {
  if (domain_i.empty() || domain_r.empty() || domain_i == domain_r) {
    throw std::invalid_argument("SRA bundle needs two distinct non-empty domain ids");
  }
  if (lambdas.x < 0 || lambdas.c < 0 || lambdas.s < 0) {
    throw std::invalid_argument("SRA lambdas must be non-negative");
  }
  SraBundle b;
  b.domain_i = domain_i;
  b.domain_r = domain_r;
  b.arch = arch;
  b.lambdas = lambdas;
  Rng rng(mix_seed(seed, 0x737261));
  const double sd = arch.init_stddev;
  b.content_encoder(true).register_params(b.params, rng, sd);
  b.style_encoder(true).register_params(b.params, rng, sd);
  b.generator(true).register_params(b.params, rng, sd);
  b.discriminator(true).register_params(b.params, rng, sd);
  b.content_encoder(false).register_params(b.params, rng, sd);
  b.style_encoder(false).register_params(b.params, rng, sd);
  b.generator(false).register_params(b.params, rng, sd);
  b.discriminator(false).register_params(b.params, rng, sd);
  return b;
}

Image translate_style(const Image& x, const Tensor& style, SraBundle& bundle,
                      SraDirection direction) {
  check_image(x, "translate_style");
  Graph g;
  Var input = g.input(nn::image_to_tensor(x));
  const bool from_i = direction == SraDirection::IToR;
  Var content = bundle.content_encoder(from_i).build(g, bundle.params, input);
  Var out = bundle.generator(!from_i).build(g, bundle.params, content, g.input(style));
  return nn::tensor_to_image(g.value(out));
}

Image reconstruct(const Image& x, SraBundle& bundle, const std::string& domain_id) {
  bool i_side;
  if (domain_id == bundle.domain_i) i_side = true;
  else if (domain_id == bundle.domain_r) i_side = false;
  else throw std::invalid_argument("reconstruct: bundle does not cover domain '" + domain_id + "'");
  check_image(x, "reconstruct");
  Graph g;
  Var input = g.input(nn::image_to_tensor(x));
  Var content = bundle.content_encoder(i_side).build(g, bundle.params, input);
  Var style = bundle.style_encoder(i_side).build(g, bundle.params, input);
  Var out = bundle.generator(i_side).build(g, bundle.params, content, style);
  return nn::tensor_to_image(g.value(out));
}

std::map<std::string, Var> sra_component_vars(Graph& g, const SraChainVars& chains) {
  std::map<std::string, Var> c;
  c["gan_r"] = g.mse_to(chains.d_fake_r, 1.0);
  c["gan_i"] = g.mse_to(chains.d_fake_i, 1.0);
  c["recon_x_i"] = g.l1_diff(chains.x_i_recon, chains.x_i);
  c["recon_x_r"] = g.l1_diff(chains.x_r_recon, chains.x_r);
  c["recon_c_i"] = g.l1_diff(chains.c_i_recon, chains.c_i);
  c["recon_c_r"] = g.l1_diff(chains.c_r_recon, chains.c_r);
  c["recon_s_r"] = g.l1_diff(chains.s_r_recon, chains.s_r_prior);
  c["recon_s_i"] = g.l1_diff(chains.s_i_recon, chains.s_i_prior);
  return c;
}

Var sra_total_var(Graph& g, const std::map<std::string, Var>& c, const SraLambdas& lambdas) {
  Var gan = g.add(c.at("gan_i"), c.at("gan_r"));
  Var rx = g.mul_scalar(g.add(c.at("recon_x_i"), c.at("recon_x_r")), lambdas.x);
  Var rc = g.mul_scalar(g.add(c.at("recon_c_i"), c.at("recon_c_r")), lambdas.c);
  Var rs = g.mul_scalar(g.add(c.at("recon_s_i"), c.at("recon_s_r")), lambdas.s);
  return g.add(g.add(gan, rx), g.add(rc, rs));
}

SraGraphOutputs build_sra_loss(Graph& g, SraBundle& bundle, const Image& x_i, const Image& x_r,
                               uint64_t seed_style_r, uint64_t seed_style_i) {
  check_image(x_i, "sra_loss");
  check_image(x_r, "sra_loss");
  auto enc_c_i = bundle.content_encoder(true);
  auto enc_s_i = bundle.style_encoder(true);
  auto gen_i = bundle.generator(true);
  auto disc_i = bundle.discriminator(true);
  auto enc_c_r = bundle.content_encoder(false);
  auto enc_s_r = bundle.style_encoder(false);
  auto gen_r = bundle.generator(false);
  auto disc_r = bundle.discriminator(false);

  SraChainVars chains;
  chains.x_i = g.input(nn::image_to_tensor(x_i));
  chains.x_r = g.input(nn::image_to_tensor(x_r));
  chains.s_r_prior = g.input(nn::sample_style(seed_style_r, bundle.arch.style_dim));
  chains.s_i_prior = g.input(nn::sample_style(seed_style_i, bundle.arch.style_dim));

  chains.c_i = enc_c_i.build(g, bundle.params, chains.x_i);
  chains.c_r = enc_c_r.build(g, bundle.params, chains.x_r);
  Var s_i_enc = enc_s_i.build(g, bundle.params, chains.x_i);
  Var s_r_enc = enc_s_r.build(g, bundle.params, chains.x_r);

  // Image chains: x -> (c, s) -> x_hat.
  chains.x_i_recon = gen_i.build(g, bundle.params, chains.c_i, s_i_enc);
  chains.x_r_recon = gen_r.build(g, bundle.params, chains.c_r, s_r_enc);

  // Cross translations with prior styles.
  Var x_ir = gen_r.build(g, bundle.params, chains.c_i, chains.s_r_prior);
  Var x_ri = gen_i.build(g, bundle.params, chains.c_r, chains.s_i_prior);

  // Content and style chains re-encode the translations with the target
  // domain's encoders.
  chains.c_i_recon = enc_c_r.build(g, bundle.params, x_ir);
  chains.s_r_recon = enc_s_r.build(g, bundle.params, x_ir);
  chains.c_r_recon = enc_c_i.build(g, bundle.params, x_ri);
  chains.s_i_recon = enc_s_i.build(g, bundle.params, x_ri);

  chains.d_fake_r = disc_r.build(g, bundle.params, x_ir);
  chains.d_fake_i = disc_i.build(g, bundle.params, x_ri);

  SraGraphOutputs out;
  out.components = sra_component_vars(g, chains);
  out.total = sra_total_var(g, out.components, bundle.lambdas);
  out.x_ir = x_ir;
  out.x_ri = x_ri;
  return out;
}

Var build_sra_disc_loss(Graph& g, SraBundle& bundle, const Image& x_i, const Image& x_r,
                        uint64_t seed_style_r, uint64_t seed_style_i) {
  // Fakes are produced by a plain forward pass and enter the graph as
  // inputs, so only discriminator parameters receive gradients.
  Image fake_r = translate_style(x_i, nn::sample_style(seed_style_r, bundle.arch.style_dim), bundle,
                                 SraDirection::IToR);
  Image fake_i = translate_style(x_r, nn::sample_style(seed_style_i, bundle.arch.style_dim), bundle,
                                 SraDirection::RToI);
  auto disc_i = bundle.discriminator(true);
  auto disc_r = bundle.discriminator(false);
  Var real_r = disc_r.build(g, bundle.params, g.input(nn::image_to_tensor(x_r)));
  Var fake_r_score = disc_r.build(g, bundle.params, g.input(nn::image_to_tensor(fake_r)));
  Var real_i = disc_i.build(g, bundle.params, g.input(nn::image_to_tensor(x_i)));
  Var fake_i_score = disc_i.build(g, bundle.params, g.input(nn::image_to_tensor(fake_i)));
  Var loss_r = g.add(g.mse_to(real_r, 1.0), g.mse_to(fake_r_score, 0.0));
  Var loss_i = g.add(g.mse_to(real_i, 1.0), g.mse_to(fake_i_score, 0.0));
  return g.add(loss_r, loss_i);
}

SraLossComponents sra_loss(const Image& x_i, const Image& x_r, SraBundle& bundle,
                           uint64_t seed_style_r, uint64_t seed_style_i) {
  Graph g;
  SraGraphOutputs out = build_sra_loss(g, bundle, x_i, x_r, seed_style_r, seed_style_i);
  SraLossComponents result;
  for (const auto& [name, var] : out.components) result.values[name] = g.scalar_value(var);
  result.total = g.scalar_value(out.total);
  result.values["total"] = result.total;
  if (!std::isfinite(result.total)) throw std::runtime_error("sra_loss: non-finite loss");
  return result;
}

SraBundle train_sra(const std::vector<SceneRecord>& dataset_i,
                    const std::vector<SceneRecord>& dataset_r, const nn::TrainConfig& config,
                    const SraLambdas& lambdas, const SraArch& arch,
                    const TrainLogObserver& on_log) {
  config.validate();
  if (dataset_i.empty() || dataset_r.empty()) throw std::invalid_argument("empty dataset");
  if (config.iterations <= 0) throw std::invalid_argument("train_sra: iterations must be positive");
  const std::string domain_i = dataset_i.front().domain_id;
  const std::string domain_r = dataset_r.front().domain_id;

  SraBundle bundle = make_sra_bundle(domain_i, domain_r, config.seed, arch, lambdas);
  nn::AdamOptimizer adam_g(config, [](const std::string& n) { return !is_disc_param(n); });
  nn::AdamOptimizer adam_d(config, is_disc_param);

  Rng sampler(mix_seed(config.seed, 0x73616d70));
  LogAccumulator acc;
  for (int iter = 0; iter < config.iterations; ++iter) {
    const Image& x_i = dataset_i[static_cast<size_t>(sampler.uniform_int(
        static_cast<int64_t>(dataset_i.size())))].image;
    const Image& x_r = dataset_r[static_cast<size_t>(sampler.uniform_int(
        static_cast<int64_t>(dataset_r.size())))].image;
    const uint64_t seed_r = mix_seed(config.seed, static_cast<uint64_t>(iter), 11);
    const uint64_t seed_i = mix_seed(config.seed, static_cast<uint64_t>(iter), 12);

    // Discriminator update, then generator update.
    bundle.params.zero_grads();
    double d_value;
    {
      Graph g;
      Var d_loss = build_sra_disc_loss(g, bundle, x_i, x_r, seed_r, seed_i);
      d_value = g.scalar_value(d_loss);
      g.backward(d_loss);
    }
    adam_d.step(bundle.params);

    bundle.params.zero_grads();
    std::map<std::string, double> components;
    {
      Graph g;
      SraGraphOutputs out = build_sra_loss(g, bundle, x_i, x_r, seed_r, seed_i);
      for (const auto& [name, var] : out.components) components[name] = g.scalar_value(var);
      components["total"] = g.scalar_value(out.total);
      if (!std::isfinite(components["total"])) {
        throw std::runtime_error("train_sra: non-finite loss at iteration " + std::to_string(iter));
      }
      g.backward(out.total);
    }
    adam_g.step(bundle.params);

    components["d_total"] = d_value;
    acc.add(components);
    const int64_t step = iter + 1;
    if (step == 1 || step % 100 == 0) acc.flush(bundle.train_log, step, on_log);
  }
  acc.flush(bundle.train_log, config.iterations, on_log);
  return bundle;
}

void save_sra_bundle(const SraBundle& bundle, const nn::TrainConfig& config,
                     const std::string& dir) {
  nn::save_checkpoint(bundle.params, dir);
  json meta;
  meta["domain_i"] = bundle.domain_i;
  meta["domain_r"] = bundle.domain_r;
  meta["lambdas"] = {{"x", bundle.lambdas.x}, {"c", bundle.lambdas.c}, {"s", bundle.lambdas.s}};
  meta["config"] = {{"learning_rate", config.learning_rate},
                    {"adam_beta1", config.adam_beta1},
                    {"adam_beta2", config.adam_beta2},
                    {"batch_size", config.batch_size},
                    {"iterations", config.iterations},
                    {"epochs", config.epochs},
                    {"seed", config.seed},
                    {"arch",
                     {{"base", bundle.arch.base},
                      {"content_channels", bundle.arch.content_channels},
                      {"style_dim", bundle.arch.style_dim},
                      {"disc_base", bundle.arch.disc_base},
                      {"mlp_hidden", bundle.arch.mlp_hidden},
                      {"init_stddev", bundle.arch.init_stddev}}}};
  meta["train_log"] = train_log_to_json(bundle.train_log);
  std::ofstream f(fs::path(dir) / "sra_meta.json", std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write sra_meta.json in " + dir);
  f << meta.dump(2) << "\n";
}

SraBundle load_sra_bundle(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "sra_meta.json");
  if (!f) throw std::runtime_error("missing sra_meta.json in " + dir);
  json meta;
  try {
    f >> meta;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed sra_meta.json in " + dir + ": " + e.what());
  }
  SraArch arch;
  SraLambdas lambdas;
  try {
    const json& a = meta.at("config").at("arch");
    arch.base = a.at("base").get<int>();
    arch.content_channels = a.at("content_channels").get<int>();
    arch.style_dim = a.at("style_dim").get<int>();
    arch.disc_base = a.at("disc_base").get<int>();
    arch.mlp_hidden = a.at("mlp_hidden").get<int>();
    arch.init_stddev = a.at("init_stddev").get<double>();
    lambdas.x = meta.at("lambdas").at("x").get<double>();
    lambdas.c = meta.at("lambdas").at("c").get<double>();
    lambdas.s = meta.at("lambdas").at("s").get<double>();
    SraBundle bundle =
        make_sra_bundle(meta.at("domain_i").get<std::string>(),
                        meta.at("domain_r").get<std::string>(), 0, arch, lambdas);
    nn::load_checkpoint(bundle.params, dir);
    if (meta.contains("train_log")) bundle.train_log = train_log_from_json(meta["train_log"]);
    return bundle;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed sra_meta.json in " + dir + ": " + e.what());
  }
}

}  // namespace panoptix
