#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "panoptix/plan.hpp"
#include "panoptix/registry.hpp"
#include "panoptix/toyset.hpp"

namespace panoptix {

struct SceneMetrics {
  int index = 0;
  double context_preservation_in = 0.0;
  double context_preservation_out = 0.0;
  double stuff_region_delta = 0.0;
  double diversity = 0.0;
  double recon_l1 = 0.0;
  bool thing_region_empty = false;
  bool stuff_region_empty = false;
};

struct EvalReport {
  int version = 1;
  std::map<std::string, std::string> config;  // echo of the run parameters
  std::vector<SceneMetrics> scenes;
  std::map<std::string, double> aggregate;  // means over scenes

  std::string to_json_text() const;
};

/// Runs the plan once per style seed on every scene and quantifies the
/// results: thing-region change split in/out, stuff-region delta against
/// the thing-translated image, style diversity inside the stuff region,
/// and SRA reconstruction L1. Deterministic in the seed.
EvalReport run_eval(const std::vector<SceneRecord>& scenes, const TranslationPlan& plan,
                    Registry& registry, int n_styles, uint64_t seed);

void write_report_json(const EvalReport& report, const std::string& path);

/// Schema check used by tests and downstream readers: throws when a
/// required field is missing or non-finite.
void validate_report_json_text(const std::string& text);

}  // namespace panoptix
