#include "panoptix/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace panoptix::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

Tensor& ParamStore::create_zeros(const std::string& name, std::vector<int> shape) {
  if (has(name)) throw std::invalid_argument("parameter already exists: " + name);
  params_.emplace(name, Tensor(shape));
  grads_.emplace(name, Tensor(shape));
  return params_.at(name);
}

Tensor& ParamStore::create_normal(const std::string& name, std::vector<int> shape,
                                  panoptix::Rng& rng, double stddev) {
  Tensor& t = create_zeros(name, std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * stddev;
  return t;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

Tensor& ParamStore::grad(const std::string& name) {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, g] : grads_) g.fill(0.0);
}

bool ParamStore::all_finite() const {
  for (const auto& [name, t] : params_) {
    if (!t.all_finite()) return false;
  }
  return true;
}

int64_t ParamStore::total_size() const {
  int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(name);
  return out;
}

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be positive");
  if (adam_beta1 <= 0 || adam_beta1 >= 1 || adam_beta2 <= 0 || adam_beta2 >= 1) {
    throw std::invalid_argument("adam betas must be in (0, 1)");
  }
  if (batch_size != 1) throw std::invalid_argument("batch_size is fixed at 1");
  if (iterations < 0 || epochs < 0) throw std::invalid_argument("negative training budget");
}

AdamOptimizer::AdamOptimizer(const TrainConfig& config, NameFilter filter)
    : lr_(config.learning_rate),
      beta1_(config.adam_beta1),
      beta2_(config.adam_beta2),
      eps_(1e-8),
      filter_(std::move(filter)) {
  config.validate();
}

void AdamOptimizer::step(ParamStore& store) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (const std::string& name : store.names()) {
    if (filter_ && !filter_(name)) continue;
    Tensor& p = store.get(name);
    Tensor& g = store.grad(name);
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      m_.emplace(name, Tensor(p.shape()));
      v_.emplace(name, Tensor(p.shape()));
      mit = m_.find(name);
    }
    Tensor& m = mit->second;
    Tensor& v = v_.at(name);
    for (int64_t i = 0; i < p.size(); ++i) {
      double gi = g[i];
      if (!std::isfinite(gi)) {
        throw std::runtime_error("gradient blow-up in parameter '" + name + "'");
      }
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      p[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

void save_checkpoint(const ParamStore& store, const std::string& dir) {
  fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (!fs::is_directory(root)) throw std::runtime_error("cannot create checkpoint dir: " + dir);

  json index = json::object();
  std::vector<uint8_t> payload;
  int64_t offset = 0;
  for (const std::string& name : store.names()) {
    const Tensor& t = store.get(name);
    json entry;
    entry["shape"] = t.shape();
    entry["dtype"] = "f32";
    entry["offset"] = offset;
    entry["file"] = "weights.bin";
    index[name] = std::move(entry);
    for (int64_t i = 0; i < t.size(); ++i) {
      float f = static_cast<float>(t[i]);
      uint8_t bytes[4];
      std::memcpy(bytes, &f, 4);
      payload.insert(payload.end(), bytes, bytes + 4);
    }
    offset += t.size() * 4;
  }

  std::ofstream jf(root / "index.json", std::ios::trunc);
  if (!jf) throw std::runtime_error("cannot write checkpoint index in " + dir);
  jf << index.dump(2) << "\n";
  jf.close();

  std::ofstream wf(root / "weights.bin", std::ios::binary | std::ios::trunc);
  if (!wf) throw std::runtime_error("cannot write checkpoint weights in " + dir);
  wf.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!wf) throw std::runtime_error("checkpoint write failed in " + dir);
}

void load_checkpoint(ParamStore& store, const std::string& dir) {
  fs::path root(dir);
  std::ifstream jf(root / "index.json");
  if (!jf) throw std::runtime_error("cannot open checkpoint index: " + (root / "index.json").string());
  json index;
  try {
    jf >> index;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed checkpoint index in " + dir + ": " + e.what());
  }

  const bool prebuilt = store.count() != 0;
  if (prebuilt) {
    for (const std::string& name : store.names()) {
      if (!index.contains(name)) {
        throw std::runtime_error("checkpoint in " + dir + " is missing parameter '" + name + "'");
      }
    }
  }

  std::map<std::string, std::vector<char>> file_cache;
  auto read_file = [&](const std::string& rel) -> const std::vector<char>& {
    auto it = file_cache.find(rel);
    if (it != file_cache.end()) return it->second;
    std::ifstream f(root / rel, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint payload: " + (root / rel).string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return file_cache.emplace(rel, std::move(bytes)).first->second;
  };

  for (const auto& [name, entry] : index.items()) {
    std::vector<int> shape;
    int64_t offset;
    std::string file, dtype;
    try {
      shape = entry.at("shape").get<std::vector<int>>();
      dtype = entry.at("dtype").get<std::string>();
      offset = entry.at("offset").get<int64_t>();
      file = entry.at("file").get<std::string>();
    } catch (const json::exception& e) {
      throw std::runtime_error("malformed checkpoint entry '" + name + "': " + e.what());
    }
    if (dtype != "f32") throw std::runtime_error("unsupported checkpoint dtype: " + dtype);

    Tensor* target;
    if (prebuilt) {
      if (!store.has(name)) {
        throw std::runtime_error("checkpoint has unexpected parameter '" + name + "'");
      }
      target = &store.get(name);
      if (target->shape() != shape) {
        throw std::runtime_error("checkpoint shape mismatch for '" + name + "'");
      }
    } else {
      target = &store.create_zeros(name, shape);
    }

    const std::vector<char>& bytes = read_file(file);
    int64_t need = offset + target->size() * 4;
    if (offset < 0 || need > static_cast<int64_t>(bytes.size())) {
      throw std::runtime_error("checkpoint payload truncated for '" + name + "'");
    }
    for (int64_t i = 0; i < target->size(); ++i) {
      float f;
      std::memcpy(&f, bytes.data() + offset + i * 4, 4);
      (*target)[i] = static_cast<double>(f);
    }
  }
}

}  // namespace panoptix::nn
