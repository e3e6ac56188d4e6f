#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "panoptix/graph.hpp"
#include "panoptix/nets.hpp"
#include "panoptix/params.hpp"
#include "panoptix/rng.hpp"

using namespace panoptix;
using nn::Graph;
using nn::ParamStore;
using nn::Tensor;
using nn::Var;
namespace fs = std::filesystem;

namespace {

Image random_image(int h, int w, uint64_t seed) {
  Rng rng(seed);
  Image img = Image::zeros(h, w);
  for (auto& v : img.pixels) v = rng.uniform(-1.0, 1.0);
  return img;
}

struct TestNets {
  ParamStore store;
  nn::ContentEncoder content{"ec.", 3, 16, 32};
  nn::StyleEncoder style{"es.", 3, 16, 8};
  nn::Decoder decoder;
  nn::PatchDiscriminator disc{"d.", 3, 16};

  explicit TestNets(uint64_t seed) {
    decoder.prefix = "g.";
    Rng rng(seed);
    content.register_params(store, rng);
    style.register_params(store, rng);
    decoder.register_params(store, rng);
    disc.register_params(store, rng);
  }
};

}  // namespace

TEST_CASE("encode_content shape contract holds for 32/64/128 inputs") {
  TestNets nets(1);
  for (int size : {32, 64, 128}) {
    Tensor code = nets.content.forward(nets.store, random_image(size, size, 7));
    CHECK(code.shape() == std::vector<int>{size / 4, size / 4, 32});
    CHECK(code.all_finite());
  }
}

TEST_CASE("encode_content rejects inputs not divisible by 4") {
  TestNets nets(1);
  Image img = random_image(10, 12, 3);
  CHECK_THROWS_AS(nets.content.forward(nets.store, img), std::invalid_argument);
}

TEST_CASE("zero-initialized encoder maps the zero image to a finite code") {
  ParamStore store;
  nn::ContentEncoder enc{"ec.", 3, 16, 32};
  Rng rng(0);
  enc.register_params(store, rng);
  for (const auto& name : store.names()) store.get(name).fill(0.0);
  Tensor code = enc.forward(store, Image::zeros(32, 32));
  CHECK(code.all_finite());
}

TEST_CASE("perturbing one input pixel changes the content code") {
  TestNets nets(2);
  Image img = random_image(32, 32, 11);
  Tensor before = nets.content.forward(nets.store, img);
  img.pixels[100] = img.pixels[100] > 0 ? img.pixels[100] - 0.5 : img.pixels[100] + 0.5;
  Tensor after = nets.content.forward(nets.store, img);
  bool any_diff = false;
  for (int64_t i = 0; i < before.size(); ++i) {
    if (before[i] != after[i]) {
      any_diff = true;
      break;
    }
  }
  CHECK(any_diff);
}

TEST_CASE("encode_style returns an 8-vector sensitive to global brightness") {
  TestNets nets(3);
  Image img = random_image(32, 32, 5);
  Tensor s1 = nets.style.forward(nets.store, img);
  CHECK(s1.shape() == std::vector<int>{8});

  Image brighter = img;
  for (auto& v : brighter.pixels) v = std::min(1.0, v + 0.3);
  Tensor s2 = nets.style.forward(nets.store, brighter);
  double diff = 0;
  for (int i = 0; i < 8; ++i) diff += std::abs(s1[i] - s2[i]);
  CHECK(diff > 0);
}

TEST_CASE("zero-parameter style encoder returns the zero vector") {
  ParamStore store;
  nn::StyleEncoder enc{"es.", 3, 16, 8};
  Rng rng(0);
  enc.register_params(store, rng);
  for (const auto& name : store.names()) store.get(name).fill(0.0);
  Tensor s = enc.forward(store, random_image(32, 32, 1));
  for (int i = 0; i < 8; ++i) CHECK(s[i] == 0.0);
}

TEST_CASE("decode produces a tanh-bounded image of the encoder input shape") {
  TestNets nets(4);
  Image img = random_image(32, 32, 9);
  Tensor content = nets.content.forward(nets.store, img);
  Graph g;
  Var out = nets.decoder.build(g, nets.store, g.input(content), g.input(nn::sample_style(1)));
  const Tensor& t = g.value(out);
  CHECK(t.shape() == std::vector<int>{32, 32, 3});
  for (int64_t i = 0; i < t.size(); ++i) {
    CHECK(t[i] <= 1.0);
    CHECK(t[i] >= -1.0);
  }
}

TEST_CASE("two distinct styles shift the decoded channel statistics") {
  TestNets nets(5);
  Tensor content = nets.content.forward(nets.store, random_image(32, 32, 13));
  auto decode_mean = [&](uint64_t style_seed) {
    Graph g;
    Var out =
        nets.decoder.build(g, nets.store, g.input(content), g.input(nn::sample_style(style_seed)));
    double mean = 0;
    for (int64_t i = 0; i < g.value(out).size(); ++i) mean += g.value(out)[i];
    return mean / static_cast<double>(g.value(out).size());
  };
  CHECK(decode_mean(1) != decode_mean(2));
}

TEST_CASE("discriminate yields an (H/8, W/8) score map; masks enter as channels") {
  TestNets nets(6);
  Image img = random_image(32, 32, 17);
  Tensor plain = nets.disc.forward(nets.store, img);
  CHECK(plain.shape() == std::vector<int>{4, 4, 1});

  ParamStore store5;
  nn::PatchDiscriminator disc5{"d5.", 5, 16};
  Rng rng(7);
  disc5.register_params(store5, rng);
  BinaryMask m1 = BinaryMask::zeros(32, 32, "a");
  BinaryMask m2 = BinaryMask::zeros(32, 32, "b");
  m1.at(1, 1) = 1;
  Tensor with_masks = disc5.forward(store5, img, {m1, m2});
  CHECK(with_masks.shape() == std::vector<int>{4, 4, 1});

  CHECK_THROWS_AS(nets.disc.forward(nets.store, img, {m1}), std::invalid_argument);
}

TEST_CASE("zero-parameter discriminator scores are all zero") {
  ParamStore store;
  nn::PatchDiscriminator disc{"d.", 3, 16};
  Rng rng(0);
  disc.register_params(store, rng);
  for (const auto& name : store.names()) store.get(name).fill(0.0);
  Tensor scores = disc.forward(store, random_image(32, 32, 19));
  for (int64_t i = 0; i < scores.size(); ++i) CHECK(scores[i] == 0.0);
}

TEST_CASE("sample_style: determinism, distinctness, and N(0, I) moments") {
  Tensor a = nn::sample_style(42);
  Tensor b = nn::sample_style(42);
  REQUIRE(a.size() == 8);
  for (int i = 0; i < 8; ++i) CHECK(a[i] == b[i]);

  Tensor c = nn::sample_style(43);
  bool differs = false;
  for (int i = 0; i < 8; ++i) differs = differs || a[i] != c[i];
  CHECK(differs);

  const int n = 10000;
  std::vector<double> mean(8, 0), var(8, 0);
  std::vector<Tensor> draws;
  draws.reserve(n);
  for (int k = 0; k < n; ++k) draws.push_back(nn::sample_style(static_cast<uint64_t>(k)));
  for (const auto& t : draws) {
    for (int i = 0; i < 8; ++i) mean[static_cast<size_t>(i)] += t[i];
  }
  for (int i = 0; i < 8; ++i) mean[static_cast<size_t>(i)] /= n;
  for (const auto& t : draws) {
    for (int i = 0; i < 8; ++i) {
      double d = t[i] - mean[static_cast<size_t>(i)];
      var[static_cast<size_t>(i)] += d * d;
    }
  }
  for (int i = 0; i < 8; ++i) {
    var[static_cast<size_t>(i)] /= n;
    CHECK(mean[static_cast<size_t>(i)] > -0.05);
    CHECK(mean[static_cast<size_t>(i)] < 0.05);
    CHECK(var[static_cast<size_t>(i)] > 0.9);
    CHECK(var[static_cast<size_t>(i)] < 1.1);
  }
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  ParamStore store;
  store.create_zeros("p", {3});
  store.get("p")[0] = 1.0;
  store.get("p")[1] = -2.0;
  nn::TrainConfig config;
  config.learning_rate = 0.1;
  nn::AdamOptimizer adam(config);
  adam.step(store);
  CHECK(store.get("p")[0] == 1.0);
  CHECK(store.get("p")[1] == -2.0);
}

TEST_CASE("adam single step with constant gradient matches the hand-computed update") {
  ParamStore store;
  store.create_zeros("p", {1});
  store.get("p")[0] = 0.7;
  store.grad("p")[0] = 1.0;
  nn::TrainConfig config;
  config.learning_rate = 0.1;
  nn::AdamOptimizer adam(config);
  adam.step(store);
  // Bias-corrected first step: m_hat = v_hat = 1, update = -lr / (1 + eps).
  const double expected = 0.7 - 0.1 * (1.0 / (1.0 + 1e-8));
  CHECK(store.get("p")[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam throws 'gradient blow-up' naming the parameter on NaN") {
  ParamStore store;
  store.create_zeros("weights.w", {2});
  store.grad("weights.w")[1] = std::nan("");
  nn::TrainConfig config;
  nn::AdamOptimizer adam(config);
  CHECK_THROWS_WITH_AS(adam.step(store), doctest::Contains("gradient blow-up"),
                       std::runtime_error);
  try {
    adam.step(store);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("weights.w") != std::string::npos);
  }
}

TEST_CASE("adam name filter restricts updates") {
  ParamStore store;
  store.create_zeros("disc.w", {1});
  store.create_zeros("gen.w", {1});
  store.grad("disc.w")[0] = 1.0;
  store.grad("gen.w")[0] = 1.0;
  nn::TrainConfig config;
  config.learning_rate = 0.1;
  nn::AdamOptimizer adam(config, [](const std::string& n) { return n.rfind("disc", 0) == 0; });
  adam.step(store);
  CHECK(store.get("disc.w")[0] != 0.0);
  CHECK(store.get("gen.w")[0] == 0.0);
}

TEST_CASE("train config validation") {
  nn::TrainConfig config;
  config.batch_size = 2;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config.batch_size = 1;
  config.learning_rate = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is bit-exact at the file level") {
  fs::path dir = fs::temp_directory_path() / "panoptix_ckpt_test";
  fs::remove_all(dir);

  ParamStore store;
  Rng rng(21);
  store.create_normal("b.second", {3, 2}, rng);
  store.create_normal("a.first", {4}, rng);
  save_checkpoint(store, dir.string());

  ParamStore loaded;
  nn::load_checkpoint(loaded, dir.string());
  CHECK(loaded.names() == store.names());

  // save(load(dir)) must reproduce both files byte for byte.
  fs::path dir2 = fs::temp_directory_path() / "panoptix_ckpt_test2";
  fs::remove_all(dir2);
  save_checkpoint(loaded, dir2.string());
  for (const char* file : {"index.json", "weights.bin"}) {
    std::ifstream f1(dir / file, std::ios::binary), f2(dir2 / file, std::ios::binary);
    std::vector<char> b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::vector<char> b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(!b1.empty());
    CHECK(b1 == b2);
  }

  // Loaded values are the f32 cast of the saved doubles.
  for (const auto& name : store.names()) {
    const Tensor& orig = store.get(name);
    const Tensor& back = loaded.get(name);
    for (int64_t i = 0; i < orig.size(); ++i) {
      CHECK(back[i] == static_cast<double>(static_cast<float>(orig[i])));
    }
  }
}

TEST_CASE("checkpoint load validates completeness against a pre-built store") {
  fs::path dir = fs::temp_directory_path() / "panoptix_ckpt_missing";
  fs::remove_all(dir);
  ParamStore store;
  Rng rng(22);
  store.create_normal("x", {2}, rng);
  save_checkpoint(store, dir.string());

  ParamStore expects_more;
  expects_more.create_zeros("x", {2});
  expects_more.create_zeros("y", {2});
  CHECK_THROWS_WITH_AS(nn::load_checkpoint(expects_more, dir.string()),
                       doctest::Contains("missing parameter"), std::runtime_error);

  ParamStore wrong_shape;
  wrong_shape.create_zeros("x", {3});
  CHECK_THROWS_WITH_AS(nn::load_checkpoint(wrong_shape, dir.string()),
                       doctest::Contains("shape mismatch"), std::runtime_error);
}
