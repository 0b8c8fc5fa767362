#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trialkit/errors.hpp"
#include "trialkit/rdd.hpp"
#include "trialkit/sensitivity.hpp"
#include "trialkit/tdesign.hpp"

namespace trialkit::config {

using json = nlohmann::json;

// Strict reader over one JSON object: every key must be consumed, and a
// trailing done() call reports any leftovers by name. A "schema" key is
// accepted anywhere (and must equal 1); "notes" is reserved for free text.
class StrictObject {
 public:
  StrictObject(const json& object, std::string context)
      : object_(object), context_(std::move(context)) {
    if (!object_.is_object()) {
      throw Error(ErrorKind::bad_config, context_ + " must be a JSON object");
    }
    if (object_.contains("schema")) {
      seen_.insert("schema");
      if (!object_["schema"].is_number_integer() || object_["schema"].get<int>() != 1) {
        throw Error(ErrorKind::bad_config, context_ + ": unsupported schema version");
      }
    }
    if (object_.contains("notes")) seen_.insert("notes");
  }

  bool has(const std::string& key) const { return object_.contains(key); }

  const json& require(const std::string& key) {
    if (!object_.contains(key)) {
      throw Error(ErrorKind::bad_config, context_ + ": missing required key '" + key + "'");
    }
    seen_.insert(key);
    return object_.at(key);
  }

  const json* optional(const std::string& key) {
    if (!object_.contains(key)) return nullptr;
    seen_.insert(key);
    return &object_.at(key);
  }

  double number(const std::string& key) { return as_number(require(key), key); }

  double number_or(const std::string& key, double fallback) {
    const json* value = optional(key);
    return value ? as_number(*value, key) : fallback;
  }

  std::int64_t integer(const std::string& key) { return as_integer(require(key), key); }

  std::int64_t integer_or(const std::string& key, std::int64_t fallback) {
    const json* value = optional(key);
    return value ? as_integer(*value, key) : fallback;
  }

  std::string text(const std::string& key) { return as_text(require(key), key); }

  std::optional<std::string> text_optional(const std::string& key) {
    const json* value = optional(key);
    if (!value) return std::nullopt;
    return as_text(*value, key);
  }

  void done() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw Error(ErrorKind::bad_config, context_ + ": unknown key '" + it.key() + "'");
      }
    }
  }

  const std::string& context() const { return context_; }

 private:
  double as_number(const json& value, const std::string& key) const {
    if (!value.is_number()) {
      throw Error(ErrorKind::bad_config, context_ + ": key '" + key + "' must be a number");
    }
    return value.get<double>();
  }

  std::int64_t as_integer(const json& value, const std::string& key) const {
    if (!value.is_number_integer()) {
      throw Error(ErrorKind::bad_config, context_ + ": key '" + key + "' must be an integer");
    }
    return value.get<std::int64_t>();
  }

  std::string as_text(const json& value, const std::string& key) const {
    if (!value.is_string()) {
      throw Error(ErrorKind::bad_config, context_ + ": key '" + key + "' must be a string");
    }
    return value.get<std::string>();
  }

  const json& object_;
  std::set<std::string> seen_;
  std::string context_;
};

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::bad_config, "cannot open config file '" + path + "'");
  }
  json parsed;
  try {
    in >> parsed;
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::bad_config, "config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parsed;
}

inline Proportion proportion_field(StrictObject& object, const std::string& key) {
  const double value = object.number(key);
  try {
    return Proportion(value, key);
  } catch (const Error& e) {
    throw Error(ErrorKind::bad_config, object.context() + ": " + e.what());
  }
}

inline std::vector<double> number_array(const json& value, const std::string& context) {
  if (!value.is_array()) throw Error(ErrorKind::bad_config, context + " must be an array");
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& item : value) {
    if (!item.is_number()) throw Error(ErrorKind::bad_config, context + " must hold numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

inline tdesign::MemberDistribution parse_member(const json& spec, const std::string& context) {
  StrictObject object(spec, context);
  const std::string family = object.text("family");
  if (family == "truncated-normal") {
    tdesign::TruncatedNormalMember member{object.number("mean"), object.number("sd")};
    object.done();
    return member;
  }
  if (family == "uniform") {
    tdesign::UniformMember member{object.number("lo"), object.number("hi")};
    object.done();
    return member;
  }
  if (family == "quantile-table") {
    tdesign::QuantileTableMember member;
    member.probs = number_array(object.require("probs"), context + ".probs");
    member.values = number_array(object.require("values"), context + ".values");
    object.done();
    return member;
  }
  throw Error(ErrorKind::bad_config, context + ": unknown member family '" + family + "'");
}

inline tdesign::PresentationCohort parse_cohort(const json& spec,
                                                const std::string& context = "cohort") {
  StrictObject object(spec, context);
  if (const auto kind = object.text_optional("kind"); kind && *kind != "cohort") {
    throw Error(ErrorKind::bad_config, context + ": expected kind 'cohort', got '" + *kind + "'");
  }
  StrictObject window_object(object.require("window"), context + ".window");
  tdesign::TimeWindow window{window_object.number("start"), window_object.number("end")};
  window_object.done();

  const json& members_json = object.require("members");
  if (!members_json.is_array() || members_json.empty()) {
    throw Error(ErrorKind::bad_config, context + ": 'members' must be a nonempty array");
  }
  std::vector<tdesign::MemberDistribution> members;
  members.reserve(members_json.size());
  for (std::size_t i = 0; i < members_json.size(); ++i) {
    members.push_back(
        parse_member(members_json[i], context + ".members[" + std::to_string(i) + "]"));
  }
  const Proportion treated = proportion_field(object, "treated_fraction");
  object.done();
  return tdesign::PresentationCohort(window, std::move(members), treated);
}

inline rdd::LatentDensity parse_latent(const json& spec, const std::string& context) {
  StrictObject object(spec, context);
  const std::string family = object.text("family");
  if (family == "gaussian") {
    rdd::GaussianDensity density{object.number("mean"), object.number("sd")};
    object.done();
    return density;
  }
  if (family == "uniform") {
    rdd::UniformDensity density{object.number("lo"), object.number("hi")};
    object.done();
    return density;
  }
  throw Error(ErrorKind::bad_config, context + ": unknown latent family '" + family + "'");
}

inline rdd::NoiseDensity parse_noise(const json& spec, const std::string& context) {
  StrictObject object(spec, context);
  const std::string family = object.text("family");
  if (family == "gaussian") {
    rdd::GaussianNoise noise{object.number("scale")};
    object.done();
    return noise;
  }
  if (family == "uniform") {
    rdd::UniformNoise noise{object.number("half_width")};
    object.done();
    return noise;
  }
  throw Error(ErrorKind::bad_config, context + ": unknown noise family '" + family + "'");
}

// Outcome-probability functions are declared as either a constant or a set
// of constant bands over the latent score.
inline std::function<double(double)> parse_outcome_fn(const json& spec,
                                                      const std::string& context) {
  StrictObject object(spec, context);
  const std::string kind = object.text("kind");
  if (kind == "constant") {
    const double value = object.number("value");
    object.done();
    return [value](double) { return value; };
  }
  if (kind == "bands") {
    const double fallback = object.number_or("default", 0.0);
    const json& bands_json = object.require("bands");
    if (!bands_json.is_array()) {
      throw Error(ErrorKind::bad_config, context + ": 'bands' must be an array");
    }
    struct Band {
      double from, to, value;
    };
    std::vector<Band> bands;
    for (std::size_t i = 0; i < bands_json.size(); ++i) {
      StrictObject band(bands_json[i], context + ".bands[" + std::to_string(i) + "]");
      bands.push_back(Band{band.number("from"), band.number("to"), band.number("value")});
      band.done();
    }
    object.done();
    return [bands = std::move(bands), fallback](double u) {
      for (const auto& band : bands) {
        if (u >= band.from && u < band.to) return band.value;
      }
      return fallback;
    };
  }
  throw Error(ErrorKind::bad_config, context + ": unknown outcome function kind '" + kind + "'");
}

inline rdd::RddScenario parse_rdd_scenario(const json& spec,
                                           const std::string& context = "scenario") {
  StrictObject object(spec, context);
  const std::string kind = object.has("kind") ? object.text("kind") : "rdd-scenario";
  if (kind == "rdd-adversarial") {
    const double cutoff = object.number("cutoff");
    const auto window = number_array(object.require("latent_window"), context + ".latent_window");
    if (window.size() != 2) {
      throw Error(ErrorKind::bad_config, context + ": 'latent_window' must be [lo, hi]");
    }
    const double noise_scale = object.number("noise_scale");
    object.done();
    return rdd::adversarial_scenario(cutoff, {window[0], window[1]}, noise_scale);
  }
  if (kind != "rdd-scenario") {
    throw Error(ErrorKind::bad_config, context + ": unknown scenario kind '" + kind + "'");
  }
  rdd::RddScenario scenario;
  scenario.cutoff = object.number("cutoff");
  scenario.delta = object.number("delta");
  scenario.latent = parse_latent(object.require("latent"), context + ".latent");
  scenario.noise = parse_noise(object.require("noise"), context + ".noise");
  scenario.baseline_fn = parse_outcome_fn(object.require("baseline"), context + ".baseline");
  scenario.effect_fn = parse_outcome_fn(object.require("effect"), context + ".effect");
  if (const json* window = object.optional("latent_window")) {
    const auto values = number_array(*window, context + ".latent_window");
    if (values.size() != 2) {
      throw Error(ErrorKind::bad_config, context + ": 'latent_window' must be [lo, hi]");
    }
    scenario.latent_window = {values[0], values[1]};
  }
  object.done();
  rdd::validate_scenario(scenario);
  return scenario;
}

inline sensitivity::MultiArmCohort parse_potential_outcomes(
    const json& spec, const std::string& context = "cohort") {
  StrictObject object(spec, context);
  if (const auto kind = object.text_optional("kind"); kind && *kind != "potential-outcomes") {
    throw Error(ErrorKind::bad_config,
                context + ": expected kind 'potential-outcomes', got '" + *kind + "'");
  }
  sensitivity::MultiArmCohort cohort;
  const json& arms = object.require("arms");
  if (!arms.is_array() || arms.size() < 2) {
    throw Error(ErrorKind::bad_config, context + ": 'arms' must list at least two labels");
  }
  for (const auto& label : arms) {
    if (!label.is_number_integer()) {
      throw Error(ErrorKind::bad_config, context + ": arm labels must be integers");
    }
    cohort.arm_labels.push_back(label.get<long>());
  }
  const json& outcomes = object.require("outcomes");
  if (!outcomes.is_array()) {
    throw Error(ErrorKind::bad_config, context + ": 'outcomes' must be an array of rows");
  }
  for (const auto& row : outcomes) {
    if (!row.is_array()) {
      throw Error(ErrorKind::bad_config, context + ": each outcomes row must be an array");
    }
    std::vector<int> parsed;
    for (const auto& entry : row) {
      if (entry.is_null()) {
        parsed.push_back(-1);
      } else if (entry.is_number_integer()) {
        parsed.push_back(entry.get<int>());
      } else {
        throw Error(ErrorKind::bad_config, context + ": outcomes entries must be 0, 1, or null");
      }
    }
    cohort.outcomes.push_back(std::move(parsed));
  }
  const json& assigned = object.require("assigned");
  if (!assigned.is_array()) {
    throw Error(ErrorKind::bad_config, context + ": 'assigned' must be an array");
  }
  for (const auto& entry : assigned) {
    if (!entry.is_number_integer()) {
      throw Error(ErrorKind::bad_config, context + ": assigned entries must be arm labels");
    }
    const long label = entry.get<long>();
    const auto it = std::find(cohort.arm_labels.begin(), cohort.arm_labels.end(), label);
    if (it == cohort.arm_labels.end()) {
      std::ostringstream msg;
      msg << context << ": assigned label " << label << " is not a declared arm";
      throw Error(ErrorKind::missing_assignment, msg.str());
    }
    cohort.assigned.push_back(static_cast<int>(it - cohort.arm_labels.begin()));
  }
  object.done();
  return cohort;
}

}  // namespace trialkit::config
