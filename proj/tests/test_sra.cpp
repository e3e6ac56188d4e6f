#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "panoptix/gradcheck.hpp"
#include "panoptix/rng.hpp"
#include "panoptix/sra.hpp"
#include "panoptix/toyset.hpp"

using namespace panoptix;
using nn::Graph;
using nn::Tensor;
using nn::Var;
namespace fs = std::filesystem;

namespace {

const SraArch kTinyArch{4, 8, 4, 4, 8};
// O(1) init keeps the normalized activations well-conditioned at the probe
// scale; finite differences at eps 1e-3 are meaningless when instance-norm
// curvature blows up as 1/sigma^3 on near-zero conv outputs.
const SraArch kGradArch{4, 8, 4, 4, 8, 0.3};

Image random_image(int h, int w, uint64_t seed) {
  Rng rng(seed);
  Image img = Image::zeros(h, w);
  for (auto& v : img.pixels) v = rng.uniform(-1.0, 1.0);
  return img;
}

std::vector<SceneRecord> toy_scenes(const std::string& domain, int count, int size,
                                    uint64_t seed) {
  std::vector<SceneRecord> out;
  for (int k = 0; k < count; ++k) {
    ToySceneSpec spec{domain, size, 1 + k % 3, seed + static_cast<uint64_t>(k)};
    auto [img, masks] = generate_scene(spec);
    out.push_back({std::move(img), std::move(masks), domain});
  }
  return out;
}

}  // namespace

TEST_CASE("lambda defaults are (10, 1, 1)") {
  SraLambdas lambdas;
  CHECK(lambdas.x == 10.0);
  CHECK(lambdas.c == 1.0);
  CHECK(lambdas.s == 1.0);
}

TEST_CASE("translate_style keeps shape and the tanh range") {
  SraBundle bundle = make_sra_bundle("A", "B", 1, kTinyArch);
  Image x = random_image(32, 32, 2);
  Image out = translate_style(x, nn::sample_style(3, kTinyArch.style_dim), bundle,
                              SraDirection::IToR);
  CHECK(out.height == 32);
  CHECK(out.width == 32);
  for (double v : out.pixels) {
    CHECK(v <= 1.0);
    CHECK(v >= -1.0);
  }
}

TEST_CASE("zero-initialized nets translate any image to a constant") {
  SraBundle bundle = make_sra_bundle("A", "B", 1, kTinyArch);
  for (const auto& name : bundle.params.names()) bundle.params.get(name).fill(0.0);
  Image out = translate_style(random_image(16, 16, 5), nn::sample_style(1, kTinyArch.style_dim),
                              bundle, SraDirection::IToR);
  for (double v : out.pixels) CHECK(v == out.pixels[0]);
}

TEST_CASE("identity chain stand-ins zero all six reconstruction terms") {
  Graph g;
  Rng rng(7);
  Tensor img({8, 8, 3});
  for (int64_t i = 0; i < img.size(); ++i) img[i] = rng.uniform(-1.0, 1.0);
  Tensor code({2, 2, 4});
  for (int64_t i = 0; i < code.size(); ++i) code[i] = rng.normal();
  Tensor style({4});
  for (int64_t i = 0; i < style.size(); ++i) style[i] = rng.normal();
  Tensor score({1, 1, 1});
  score[0] = 0.25;

  SraChainVars chains;
  chains.x_i = g.input(img);
  chains.x_i_recon = g.input(img);
  chains.x_r = g.input(img);
  chains.x_r_recon = g.input(img);
  chains.c_i = g.input(code);
  chains.c_i_recon = g.input(code);
  chains.c_r = g.input(code);
  chains.c_r_recon = g.input(code);
  chains.s_r_prior = g.input(style);
  chains.s_r_recon = g.input(style);
  chains.s_i_prior = g.input(style);
  chains.s_i_recon = g.input(style);
  chains.d_fake_r = g.input(score);
  chains.d_fake_i = g.input(score);

  auto components = sra_component_vars(g, chains);
  for (const char* name :
       {"recon_x_i", "recon_x_r", "recon_c_i", "recon_c_r", "recon_s_i", "recon_s_r"}) {
    CHECK(g.scalar_value(components.at(name)) == 0.0);
  }
  const double expected_gan = (0.25 - 1.0) * (0.25 - 1.0);
  CHECK(g.scalar_value(components.at("gan_i")) == doctest::Approx(expected_gan));
  Var total = sra_total_var(g, components, SraLambdas{});
  CHECK(g.scalar_value(total) == doctest::Approx(2 * expected_gan));
}

TEST_CASE("joint loss equals the weighted component sum to 1e-6 relative") {
  SraBundle bundle = make_sra_bundle("A", "B", 11, kTinyArch);
  Image x_i = random_image(8, 8, 1);
  Image x_r = random_image(8, 8, 2);
  SraLossComponents loss = sra_loss(x_i, x_r, bundle, 100, 200);

  const auto& v = loss.values;
  const double expected = v.at("gan_i") + v.at("gan_r") +
                          bundle.lambdas.x * (v.at("recon_x_i") + v.at("recon_x_r")) +
                          bundle.lambdas.c * (v.at("recon_c_i") + v.at("recon_c_r")) +
                          bundle.lambdas.s * (v.at("recon_s_i") + v.at("recon_s_r"));
  CHECK(std::abs(loss.total - expected) / std::abs(expected) < 1e-6);
  for (const auto& [name, value] : v) {
    CHECK(std::isfinite(value));
    CHECK(value >= 0.0);
  }
}

TEST_CASE("doubling lambda_x exactly doubles the image-reconstruction contribution") {
  SraBundle bundle = make_sra_bundle("A", "B", 13, kTinyArch);
  Image x_i = random_image(8, 8, 3);
  Image x_r = random_image(8, 8, 4);
  SraLossComponents base = sra_loss(x_i, x_r, bundle, 5, 6);
  const double recon_x = base.values.at("recon_x_i") + base.values.at("recon_x_r");

  bundle.lambdas.x *= 2;
  SraLossComponents doubled = sra_loss(x_i, x_r, bundle, 5, 6);
  CHECK(doubled.total - base.total == doctest::Approx(10.0 * recon_x).epsilon(1e-12));
  for (const char* unchanged : {"recon_x_i", "recon_x_r", "gan_i", "gan_r"}) {
    CHECK(doubled.values.at(unchanged) == base.values.at(unchanged));
  }
}

TEST_CASE("every SRA loss component passes the finite-difference check on 8x8 tiny nets") {
  SraBundle bundle = make_sra_bundle("A", "B", 17, kGradArch);
  Image x_i = random_image(8, 8, 21);
  Image x_r = random_image(8, 8, 22);

  const char* names[] = {"gan_i",     "gan_r",     "recon_x_i", "recon_x_r", "recon_c_i",
                         "recon_c_r", "recon_s_i", "recon_s_r", "total"};
  for (const char* name : names) {
    CAPTURE(name);
    auto loss_fn = [&]() {
      Graph g;
      SraGraphOutputs out = build_sra_loss(g, bundle, x_i, x_r, 31, 32);
      Var target = std::string(name) == "total" ? out.total : out.components.at(name);
      g.backward(target);
      return g.scalar_value(target);
    };
    auto report = nn::grad_check(bundle.params, loss_fn, {.epsilon = 1e-3, .num_coords = 50, .seed = 5});
    INFO("component ", name, " worst ", report.worst_param, " rel ", report.max_rel_error);
    CHECK(report.max_rel_error < 1e-2);
  }
}

TEST_CASE("discriminator loss passes the finite-difference check over disc parameters") {
  SraBundle bundle = make_sra_bundle("A", "B", 19, kGradArch);
  Image x_i = random_image(8, 8, 23);
  Image x_r = random_image(8, 8, 24);
  auto loss_fn = [&]() {
    Graph g;
    Var loss = build_sra_disc_loss(g, bundle, x_i, x_r, 41, 42);
    g.backward(loss);
    return g.scalar_value(loss);
  };
  nn::GradCheckOptions options;
  options.num_coords = 50;
  options.seed = 6;
  // The fakes enter detached, so the check is over discriminator weights.
  options.param_filter = [](const std::string& n) { return n.rfind("disc", 0) == 0; };
  auto report = nn::grad_check(bundle.params, loss_fn, options);
  CHECK(report.max_rel_error < 1e-2);
}

TEST_CASE("train_sra smoke: 20+20 scenes, 200 iterations, finite losses throughout") {
  auto ds_a = toy_scenes("A", 20, 32, 100);
  auto ds_b = toy_scenes("B", 20, 32, 200);
  nn::TrainConfig config;
  config.iterations = 200;
  config.seed = 3;
  SraBundle bundle = train_sra(ds_a, ds_b, config, {}, kTinyArch);
  REQUIRE(!bundle.train_log.empty());
  for (const auto& entry : bundle.train_log) {
    for (const auto& [name, value] : entry.components) {
      CAPTURE(entry.step);
      CAPTURE(name);
      CHECK(std::isfinite(value));
    }
  }
  CHECK(bundle.train_log.front().step == 1);
  CHECK(bundle.params.all_finite());
}

TEST_CASE("train_sra is deterministic: same config gives identical iteration-1 loss") {
  auto ds_a = toy_scenes("A", 4, 32, 300);
  auto ds_b = toy_scenes("B", 4, 32, 400);
  nn::TrainConfig config;
  config.iterations = 1;
  config.seed = 9;
  SraBundle b1 = train_sra(ds_a, ds_b, config, {}, kTinyArch);
  SraBundle b2 = train_sra(ds_a, ds_b, config, {}, kTinyArch);
  REQUIRE(b1.train_log.size() == b2.train_log.size());
  CHECK(std::abs(b1.train_log[0].components.at("total") -
                 b2.train_log[0].components.at("total")) < 1e-6);
}

TEST_CASE("train_sra rejects empty datasets") {
  auto ds = toy_scenes("A", 2, 32, 1);
  nn::TrainConfig config;
  config.iterations = 1;
  CHECK_THROWS_WITH_AS(train_sra({}, ds, config, {}, kTinyArch), "empty dataset",
                       std::invalid_argument);
}

TEST_CASE("reconstruct is deterministic and domain-checked") {
  SraBundle bundle = make_sra_bundle("A", "B", 23, kTinyArch);
  Image x = random_image(32, 32, 31);
  Image r1 = reconstruct(x, bundle, "A");
  Image r2 = reconstruct(x, bundle, "A");
  CHECK(r1.pixels == r2.pixels);
  CHECK_THROWS_AS(reconstruct(x, bundle, "C"), std::invalid_argument);

  for (const auto& name : bundle.params.names()) bundle.params.get(name).fill(0.0);
  Image rec = reconstruct(x, bundle, "B");
  for (double v : rec.pixels) CHECK(std::isfinite(v));
}

TEST_CASE("direction symmetry: swapped domains expose the same component names") {
  SraBundle fwd = make_sra_bundle("A", "B", 29, kTinyArch);
  SraBundle swapped = make_sra_bundle("B", "A", 29, kTinyArch);
  Image x_a = random_image(8, 8, 41);
  Image x_b = random_image(8, 8, 42);
  auto loss_fwd = sra_loss(x_a, x_b, fwd, 1, 2);
  auto loss_swp = sra_loss(x_b, x_a, swapped, 1, 2);
  REQUIRE(loss_fwd.values.size() == loss_swp.values.size());
  for (const auto& [name, value] : loss_fwd.values) {
    CHECK(loss_swp.values.count(name) == 1);
  }
}

TEST_CASE("SRA bundle checkpoint round trip preserves values and metadata") {
  fs::path dir = fs::temp_directory_path() / "panoptix_sra_bundle";
  fs::remove_all(dir);
  SraBundle bundle = make_sra_bundle("A", "B", 31, kTinyArch, SraLambdas{5.0, 2.0, 0.5});
  nn::TrainConfig config;
  config.iterations = 7;
  config.seed = 77;
  save_sra_bundle(bundle, config, dir.string());

  SraBundle back = load_sra_bundle(dir.string());
  CHECK(back.domain_i == "A");
  CHECK(back.domain_r == "B");
  CHECK(back.lambdas.x == 5.0);
  CHECK(back.lambdas.s == 0.5);
  CHECK(back.arch.base == kTinyArch.base);
  for (const auto& name : bundle.params.names()) {
    const auto& orig = bundle.params.get(name);
    const auto& loaded = back.params.get(name);
    for (int64_t i = 0; i < orig.size(); ++i) {
      CHECK(loaded[i] == static_cast<double>(static_cast<float>(orig[i])));
    }
  }
}
