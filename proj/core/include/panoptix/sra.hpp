#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "panoptix/graph.hpp"
#include "panoptix/nets.hpp"
#include "panoptix/params.hpp"
#include "panoptix/toyset.hpp"

namespace panoptix {

struct TrainLogEntry {
  int64_t step = 0;
  std::map<std::string, double> components;  // smoothed over the window ending at `step`
};

struct SraArch {
  int base = 16;
  int content_channels = 32;
  int style_dim = 8;
  int disc_base = 16;
  int mlp_hidden = 32;
  double init_stddev = 0.02;  // weight init scale (normal, zero-mean)
};

struct SraLambdas {
  double x = 10.0;
  double c = 1.0;
  double s = 1.0;
};

/// One trained domain pair: content/style encoders, generators and
/// discriminators for both domains, plus the loss weights.
struct SraBundle {
  std::string domain_i;
  std::string domain_r;
  SraArch arch;
  SraLambdas lambdas;
  nn::ParamStore params;
  std::vector<TrainLogEntry> train_log;

  nn::ContentEncoder content_encoder(bool i_side) const;
  nn::StyleEncoder style_encoder(bool i_side) const;
  nn::Decoder generator(bool i_side) const;
  nn::PatchDiscriminator discriminator(bool i_side) const;
};

/// Builds a freshly initialized bundle; parameter init is deterministic in
/// the seed.
SraBundle make_sra_bundle(const std::string& domain_i, const std::string& domain_r, uint64_t seed,
                          const SraArch& arch = {}, const SraLambdas& lambdas = {});

enum class SraDirection { IToR, RToI };

/// G_target(E_source^c(x), style). Output matches the input shape with
/// values in [-1, 1].
Image translate_style(const Image& x, const nn::Tensor& style, SraBundle& bundle,
                      SraDirection direction);

/// G_d(E_d^c(x), E_d^s(x)) for the named domain.
Image reconstruct(const Image& x, SraBundle& bundle, const std::string& domain_id);

/// Chain endpoints of one joint-loss evaluation; tests may populate these
/// with stand-ins to probe the assembly arithmetic.
struct SraChainVars {
  nn::Var x_i, x_r;              // real samples
  nn::Var x_i_recon, x_r_recon;  // within-domain image reconstructions
  nn::Var c_i, c_r;              // content codes of the real samples
  nn::Var c_i_recon, c_r_recon;  // content codes re-encoded from the cross translations
  nn::Var s_r_prior, s_i_prior;  // prior style codes driving the cross translations
  nn::Var s_r_recon, s_i_recon;  // style codes re-encoded from the cross translations
  nn::Var d_fake_r, d_fake_i;    // discriminator scores on the cross translations
};

/// The eight named generator-side components. GAN terms are least-squares
/// with real target 1.
std::map<std::string, nn::Var> sra_component_vars(nn::Graph& g, const SraChainVars& chains);

/// total = gan_i + gan_r + lambda_x (recon_x_i + recon_x_r)
///       + lambda_c (recon_c_i + recon_c_r) + lambda_s (recon_s_i + recon_s_r)
nn::Var sra_total_var(nn::Graph& g, const std::map<std::string, nn::Var>& components,
                      const SraLambdas& lambdas);

struct SraGraphOutputs {
  std::map<std::string, nn::Var> components;
  nn::Var total;
  nn::Var x_ir;  // translation into domain r
  nn::Var x_ri;  // translation into domain i
};

/// Builds the full generator-side loss graph: image, content and style
/// reconstruction chains in both directions plus both adversarial terms.
/// Prior styles come from sample_style(seed_style_r) and
/// sample_style(seed_style_i).
SraGraphOutputs build_sra_loss(nn::Graph& g, SraBundle& bundle, const Image& x_i, const Image& x_r,
                               uint64_t seed_style_r, uint64_t seed_style_i);

/// Discriminator-side least-squares loss; the cross translations enter
/// detached so only discriminator parameters receive gradients.
nn::Var build_sra_disc_loss(nn::Graph& g, SraBundle& bundle, const Image& x_i, const Image& x_r,
                            uint64_t seed_style_r, uint64_t seed_style_i);

struct SraLossComponents {
  std::map<std::string, double> values;  // the eight components plus "total"
  double total = 0.0;
};

/// Evaluates the joint loss once (no parameter update).
SraLossComponents sra_loss(const Image& x_i, const Image& x_r, SraBundle& bundle,
                           uint64_t seed_style_r, uint64_t seed_style_i);

using TrainLogObserver = std::function<void(const TrainLogEntry&)>;

/// Alternating discriminator/generator Adam steps, batch size 1, fresh
/// style seeds per iteration derived from config.seed. Deterministic
/// end-to-end. The log records step 1 and every 100th step (window means).
SraBundle train_sra(const std::vector<SceneRecord>& dataset_i,
                    const std::vector<SceneRecord>& dataset_r, const nn::TrainConfig& config,
                    const SraLambdas& lambdas = {}, const SraArch& arch = {},
                    const TrainLogObserver& on_log = nullptr);

/// Checkpoint directory: neural-core format plus sra_meta.json
/// {domain_i, domain_r, lambdas, config}.
void save_sra_bundle(const SraBundle& bundle, const nn::TrainConfig& config, const std::string& dir);
SraBundle load_sra_bundle(const std::string& dir);

}  // namespace panoptix
