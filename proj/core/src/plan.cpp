#include "panoptix/plan.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace panoptix {

StyleSource StyleSource::parse(const std::string& text) {
  StyleSource s;
  if (text.rfind("random(", 0) == 0 && text.back() == ')') {
    s.kind = Kind::Random;
    const std::string body = text.substr(7, text.size() - 8);
    try {
      size_t used = 0;
      s.seed = std::stoull(body, &used);
      if (used != body.size()) throw std::invalid_argument(body);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad style_source seed: " + text);
    }
    return s;
  }
  if (text.rfind("reference(", 0) == 0 && text.back() == ')') {
    s.kind = Kind::Reference;
    s.reference_path = text.substr(10, text.size() - 11);
    if (s.reference_path.empty()) {
      throw std::invalid_argument("style_source reference path is empty");
    }
    return s;
  }
  throw std::invalid_argument("style_source must be random(seed) or reference(path), got: " + text);
}

std::string StyleSource::to_string() const {
  if (kind == Kind::Random) return "random(" + std::to_string(seed) + ")";
  return "reference(" + reference_path + ")";
}

void TranslationPlan::validate() const {
  std::set<std::string> domains;
  for (const auto& step : stuff_steps) domains.insert(step.target_domain_id);
  if (a_count != static_cast<int>(domains.size())) {
    throw std::invalid_argument("plan field A = " + std::to_string(a_count) +
                                " does not match the " + std::to_string(domains.size()) +
                                " distinct target domains");
  }
  if (a_count > l_count()) throw std::invalid_argument("plan invariant A <= L violated");
  for (const auto& step : thing_steps) {
    if (step.source_label.empty() || step.target_label.empty() || step.tra_bundle_id.empty()) {
      throw std::invalid_argument("thing step with empty field");
    }
  }
  for (const auto& step : stuff_steps) {
    if (step.source_label.empty() || step.target_domain_id.empty() || step.sra_bundle_id.empty()) {
      throw std::invalid_argument("stuff step with empty field");
    }
  }
}

TranslationPlan TranslationPlan::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed plan JSON: ") + e.what());
  }
  TranslationPlan plan;
  try {
    for (const auto& t : j.at("thing_steps")) {
      plan.thing_steps.push_back({t.at("source_label").get<std::string>(),
                                  t.at("target_label").get<std::string>(),
                                  t.at("tra_bundle_id").get<std::string>()});
    }
    for (const auto& s : j.at("stuff_steps")) {
      plan.stuff_steps.push_back({s.at("source_label").get<std::string>(),
                                  s.at("target_domain_id").get<std::string>(),
                                  s.at("sra_bundle_id").get<std::string>(),
                                  StyleSource::parse(s.at("style_source").get<std::string>())});
    }
    plan.a_count = j.at("A").get<int>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed plan JSON: ") + e.what());
  }
  plan.validate();
  return plan;
}

std::string TranslationPlan::to_json_text() const {
  json j;
  json things = json::array();
  for (const auto& t : thing_steps) {
    things.push_back({{"source_label", t.source_label},
                      {"target_label", t.target_label},
                      {"tra_bundle_id", t.tra_bundle_id}});
  }
  json stuffs = json::array();
  for (const auto& s : stuff_steps) {
    stuffs.push_back({{"source_label", s.source_label},
                      {"target_domain_id", s.target_domain_id},
                      {"sra_bundle_id", s.sra_bundle_id},
                      {"style_source", s.style_source.to_string()}});
  }
  j["thing_steps"] = std::move(things);
  j["stuff_steps"] = std::move(stuffs);
  j["A"] = a_count;
  return j.dump(2) + "\n";
}

TranslationPlan load_plan(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open plan: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return TranslationPlan::from_json_text(text);
}

void save_plan(const TranslationPlan& plan, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write plan: " + path);
  f << plan.to_json_text();
}

}  // namespace panoptix
