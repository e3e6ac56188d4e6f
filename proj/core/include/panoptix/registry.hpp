#pragma once

#include <map>
#include <memory>
#include <string>

#include "panoptix/sra.hpp"

namespace panoptix {

struct TraBundle;

/// Resolves bundle ids to checkpoint directories by convention
/// (root/<bundle_id>/) and caches loaded bundles. Loading validates that
/// the checkpoint covers every expected parameter.
class Registry {
 public:
  explicit Registry(std::string root);

  const std::string& root() const { return root_; }
  std::shared_ptr<TraBundle> tra(const std::string& bundle_id);
  std::shared_ptr<SraBundle> sra(const std::string& bundle_id);

 private:
  std::string bundle_dir(const std::string& bundle_id) const;

  std::string root_;
  std::map<std::string, std::shared_ptr<TraBundle>> tra_cache_;
  std::map<std::string, std::shared_ptr<SraBundle>> sra_cache_;
};

}  // namespace panoptix
