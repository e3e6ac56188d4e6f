#include "panoptix/registry.hpp"

#include <filesystem>
#include <stdexcept>

#include "panoptix/tra.hpp"

namespace fs = std::filesystem;

namespace panoptix {

Registry::Registry(std::string root) : root_(std::move(root)) {}

std::string Registry::bundle_dir(const std::string& bundle_id) const {
  if (bundle_id.empty() || bundle_id.find('/') != std::string::npos) {
    throw std::runtime_error("invalid bundle id: '" + bundle_id + "'");
  }
  return (fs::path(root_) / bundle_id).string();
}

std::shared_ptr<TraBundle> Registry::tra(const std::string& bundle_id) {
  auto it = tra_cache_.find(bundle_id);
  if (it != tra_cache_.end()) return it->second;
  const std::string dir = bundle_dir(bundle_id);
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("bundle '" + bundle_id + "' not found under " + root_);
  }
  if (!fs::exists(fs::path(dir) / "tra_meta.json")) {
    throw std::runtime_error("bundle '" + bundle_id + "' is not a TRA bundle");
  }
  auto bundle = std::make_shared<TraBundle>(load_tra_bundle(dir));
  tra_cache_.emplace(bundle_id, bundle);
  return bundle;
}

std::shared_ptr<SraBundle> Registry::sra(const std::string& bundle_id) {
  auto it = sra_cache_.find(bundle_id);
  if (it != sra_cache_.end()) return it->second;
  const std::string dir = bundle_dir(bundle_id);
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("bundle '" + bundle_id + "' not found under " + root_);
  }
  if (!fs::exists(fs::path(dir) / "sra_meta.json")) {
    throw std::runtime_error("bundle '" + bundle_id + "' is not an SRA bundle");
  }
  auto bundle = std::make_shared<SraBundle>(load_sra_bundle(dir));
  sra_cache_.emplace(bundle_id, bundle);
  return bundle;
}

}  // namespace panoptix
