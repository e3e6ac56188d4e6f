#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace panoptix {

/// Style pick for one stuff step: a seeded prior draw or a reference image
/// encoded by the target domain's style encoder. Serialized as
/// "random(seed)" or "reference(path)".
struct StyleSource {
  enum class Kind { Random, Reference };
  Kind kind = Kind::Random;
  uint64_t seed = 0;
  std::string reference_path;

  static StyleSource parse(const std::string& text);
  std::string to_string() const;
};

struct ThingStep {
  std::string source_label;
  std::string target_label;
  std::string tra_bundle_id;
};

struct StuffStep {
  std::string source_label;
  std::string target_domain_id;
  std::string sra_bundle_id;
  StyleSource style_source;
};

/// The M = K + L attribute assignments of a translation run. `a_count` is
/// the number of distinct target domains among the stuff steps.
struct TranslationPlan {
  std::vector<ThingStep> thing_steps;
  std::vector<StuffStep> stuff_steps;
  int a_count = 0;

  int k_count() const { return static_cast<int>(thing_steps.size()); }
  int l_count() const { return static_cast<int>(stuff_steps.size()); }
  int m_count() const { return k_count() + l_count(); }

  /// Throws if a_count disagrees with the stuff steps or exceeds L.
  void validate() const;
  static TranslationPlan from_json_text(const std::string& text);
  std::string to_json_text() const;
};

TranslationPlan load_plan(const std::string& path);
void save_plan(const TranslationPlan& plan, const std::string& path);

}  // namespace panoptix
