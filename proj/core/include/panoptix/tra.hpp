#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "panoptix/graph.hpp"
#include "panoptix/nets.hpp"
#include "panoptix/params.hpp"
#include "panoptix/plan.hpp"
#include "panoptix/sra.hpp"  // TrainLogEntry
#include "panoptix/toyset.hpp"

namespace panoptix {

class Registry;

struct TraArch {
  int fx_base = 16;   // image feature encoder width
  int fx_out = 32;    // image feature channels
  int fp_base = 8;    // mask feature encoder width
  int fp_out = 16;    // mask feature channels
  int dec_base = 16;  // decoder upsampling width
  int disc_base = 16;
  double init_stddev = 0.02;  // weight init scale (normal, zero-mean)
};

/// Loss weights for the non-adversarial terms. The adversarial term has
/// weight 1; cycle/identity/context default to 10.
struct TraWeights {
  double cycle = 10.0;
  double identity = 10.0;
  double context = 10.0;
};

/// One transfiguration mapping source_label <-> target_label: image and
/// mask generators for both directions plus both discriminators.
struct TraBundle {
  std::string source_label;
  std::string target_label;
  TraArch arch;
  TraWeights weights;
  nn::ParamStore params;
  std::vector<TrainLogEntry> train_log;

  nn::ContentEncoder image_encoder(bool forward) const;
  nn::ContentEncoder mask_encoder(bool forward) const;
  nn::Decoder image_decoder(bool forward) const;
  nn::Decoder mask_decoder(bool forward) const;
  nn::PatchDiscriminator discriminator(bool forward) const;  // forward -> D over target domain
};

TraBundle make_tra_bundle(const std::string& source_label, const std::string& target_label,
                          uint64_t seed, const TraArch& arch = {}, const TraWeights& weights = {});

enum class TraDirection { Forward, Reverse };

/// Graph-level translation of one image with its instance masks. The image
/// decoder consumes the image features and the summed mask features; each
/// per-instance mask decoder additionally sees that instance's own
/// features. Soft masks stay in the graph for losses.
struct TraTranslateVars {
  nn::Var image;
  std::vector<nn::Var> soft_masks;
};
TraTranslateVars tra_translate(nn::Graph& g, TraBundle& bundle, TraDirection direction, nn::Var x,
                               const std::vector<nn::Var>& masks);

/// Value-level translation: binarizes the generated soft masks at 0.5.
/// Output counts equal input counts; labels pass through.
std::pair<Image, std::vector<BinaryMask>> tra_forward(const Image& x,
                                                      const std::vector<BinaryMask>& masks,
                                                      TraBundle& bundle, TraDirection direction);

/// Chain endpoints of one loss evaluation; tests may feed stand-ins.
struct TraChainVars {
  nn::Var x_i, x_r;
  std::vector<nn::Var> masks_i, masks_r;
  nn::Var fake_r, fake_i;  // translations
  std::vector<nn::Var> gen_masks_r, gen_masks_i;
  nn::Var cycle_i, cycle_r;  // round trips
  std::vector<nn::Var> cycle_masks_i, cycle_masks_r;
  nn::Var idt_r, idt_i;  // forward generator applied to its own target domain
  nn::Var d_fake_r, d_fake_i;
};

/// Components {gan, cycle, identity, context}. Context change is weighted
/// by (1 - union(source masks)) (1 - union(generated soft masks)):
/// change is penalized only where neither side has a thing.
std::map<std::string, nn::Var> tra_component_vars(nn::Graph& g, const TraChainVars& chains);

/// total = gan + w_cycle * cycle + w_identity * identity + w_context * context
nn::Var tra_total_var(nn::Graph& g, const std::map<std::string, nn::Var>& components,
                      const TraWeights& weights);

struct TraGraphOutputs {
  std::map<std::string, nn::Var> components;
  nn::Var total;
  nn::Var fake_r, fake_i;
  std::vector<nn::Var> gen_masks_r, gen_masks_i;
};

/// Full generator-side loss over one unpaired sample per domain.
TraGraphOutputs build_tra_loss(nn::Graph& g, TraBundle& bundle, const Image& x_i,
                               const std::vector<BinaryMask>& masks_i, const Image& x_r,
                               const std::vector<BinaryMask>& masks_r);

/// Discriminator-side least-squares loss with detached fakes. Both
/// discriminators see image (+) union-of-masks as channels.
nn::Var build_tra_disc_loss(nn::Graph& g, TraBundle& bundle, const Image& x_i,
                            const std::vector<BinaryMask>& masks_i, const Image& x_r,
                            const std::vector<BinaryMask>& masks_r);

struct TraLossComponents {
  std::map<std::string, double> values;  // gan, cycle, identity, context, total
  double total = 0.0;
};

/// Evaluates the loss once on a one-sample-per-domain batch.
TraLossComponents tra_loss(const Image& x_i, const std::vector<BinaryMask>& masks_i,
                           const Image& x_r, const std::vector<BinaryMask>& masks_r,
                           TraBundle& bundle);

/// Splits n instance indices into chunks of at most `chunk_size`,
/// preserving order.
std::vector<std::vector<int>> sequential_chunks(int n, int chunk_size);

/// Epochs of alternating discriminator/generator Adam steps over seeded
/// shuffles. Each sample's masks are processed in chunks of at most 2;
/// every chunk translates against the image updated by previous chunks and
/// gradients detach between chunks.
TraBundle train_tra(const std::vector<SceneRecord>& dataset_i,
                    const std::vector<SceneRecord>& dataset_r, const std::string& source_label,
                    const std::string& target_label, const nn::TrainConfig& config,
                    const TraArch& arch = {}, const TraWeights& weights = {},
                    const TrainLogObserver& on_log = nullptr);

/// Folds the plan's thing steps left to right: each step translates the
/// masks bearing its source label against the current image and relabels
/// the generated masks to its target label. K = 0 is the identity.
std::pair<Image, MaskSet> apply_tra_chain(const Image& x, const MaskSet& masks,
                                          const std::vector<ThingStep>& thing_steps,
                                          Registry& registry);

/// Checkpoint directory: neural-core format plus tra_meta.json
/// {source_label, target_label, config}.
void save_tra_bundle(const TraBundle& bundle, const nn::TrainConfig& config,
                     const std::string& dir);
TraBundle load_tra_bundle(const std::string& dir);

}  // namespace panoptix
