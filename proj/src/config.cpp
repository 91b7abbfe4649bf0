#include "dbender/config.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dbender/error.hpp"

namespace dbender {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kCommandClassCount> kClassNames = {"ACT", "PRE", "READ", "WRITE", "REF", "ZQS"};

[[noreturn]] void config_error(const std::string& origin, const std::string& reason) {
  fail(ErrorCode::ConfigError, origin + ": " + reason);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, path.string() + ": cannot open");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    config_error(path.string(), e.what());
  }
}

// Resolves "extends" chains; the child document is applied as a merge patch.
json load_with_extends(const fs::path& path, int depth = 0) {
  if (depth > 8) config_error(path.string(), "extends chain too deep");
  json doc = read_json_file(path);
  if (doc.contains("extends")) {
    const fs::path base = path.parent_path() / doc["extends"].get<std::string>();
    json merged = load_with_extends(base, depth + 1);
    doc.erase("extends");
    merged.merge_patch(doc);
    return merged;
  }
  return doc;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

void check_probability(double p, const std::string& origin, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) config_error(origin, std::string(what) + " must lie in [0,1]");
}

RuleScope parse_scope(const std::string& s, const std::string& origin) {
  if (s == "same_bank") return RuleScope::SameBank;
  if (s == "same_device") return RuleScope::SameDevice;
  if (s == "different_bank") return RuleScope::DifferentBank;
  config_error(origin, "unknown rule scope '" + s + "'");
}

CommandClass class_or_throw(const std::string& s, const std::string& origin) {
  auto c = parse_command_class(s);
  if (!c) config_error(origin, "unknown command class '" + s + "'");
  return *c;
}

EpsilonModel parse_eps(const json& j) {
  EpsilonModel e;
  e.floor = get_or(j, "floor", 0.0);
  e.median = get_or(j, "median", 0.0);
  e.shape = get_or(j, "shape", 0.0);
  return e;
}

json eps_json(const EpsilonModel& e) { return {{"floor", e.floor}, {"median", e.median}, {"shape", e.shape}}; }

PlatformConfig from_json(const json& doc, const std::string& origin) {
  PlatformConfig cfg;
  cfg.origin = origin;
  cfg.name = get_or<std::string>(doc, "name", cfg.name);
  cfg.standard = get_or<std::string>(doc, "standard", cfg.standard);

  if (doc.contains("geometry")) {
    const auto& g = doc["geometry"];
    cfg.geometry.banks = get_or(g, "banks", cfg.geometry.banks);
    cfg.geometry.rows_per_bank = get_or(g, "rows_per_bank", cfg.geometry.rows_per_bank);
    cfg.geometry.columns_per_row = get_or(g, "columns_per_row", cfg.geometry.columns_per_row);
    if (get_or(g, "transfer_bits", 512u) != 512u) config_error(origin, "transfer_bits must be 512");
  }
  if (cfg.geometry.banks < 1 || cfg.geometry.rows_per_bank < 1 || cfg.geometry.columns_per_row < 1) {
    config_error(origin, "geometry counts must be >= 1");
  }

  if (doc.contains("platform")) {
    const auto& p = doc["platform"];
    cfg.instruction_capacity = get_or(p, "instruction_capacity", cfg.instruction_capacity);
    cfg.scratchpad_words = get_or(p, "scratchpad_words", cfg.scratchpad_words);
    cfg.fifo_capacity = get_or(p, "fifo_transfers", cfg.fifo_capacity);
    if (p.contains("host_drain")) {
      const auto& d = p["host_drain"];
      if (!d.is_array() || d.size() != 2) config_error(origin, "host_drain must be [numerator, denominator]");
      cfg.drain_numerator = d[0].get<uint32_t>();
      cfg.drain_denominator = d[1].get<uint32_t>();
      if (cfg.drain_denominator == 0) config_error(origin, "host_drain denominator must be positive");
    }
  }

  if (!doc.contains("timing") || !doc["timing"].contains("rules")) config_error(origin, "missing timing table");
  const auto& t = doc["timing"];
  cfg.timing.bus_slot_ns = get_or(t, "bus_slot_ns", cfg.timing.bus_slot_ns);
  if (!(cfg.timing.bus_slot_ns > 0)) config_error(origin, "bus_slot_ns must be positive");
  if (t.contains("parameters")) {
    for (auto& [k, v] : t["parameters"].items()) {
      const double ns = v.get<double>();
      const double slots = ns / cfg.timing.bus_slot_ns;
      if (ns < 0 || std::fabs(slots - std::round(slots)) > 1e-6) {
        config_error(origin, "parameter " + k + " is not a non-negative multiple of the bus slot");
      }
      cfg.timing.parameters[k] = ns;
    }
  }
  for (const auto& r : t["rules"]) {
    TimingRule rule;
    rule.prev = class_or_throw(r.at("prev").get<std::string>(), origin);
    rule.next = class_or_throw(r.at("next").get<std::string>(), origin);
    rule.scope = parse_scope(get_or<std::string>(r, "scope", "same_bank"), origin);
    if (r.contains("param")) {
      rule.name = r["param"].get<std::string>();
      auto it = cfg.timing.parameters.find(rule.name);
      if (it == cfg.timing.parameters.end()) config_error(origin, "rule references unknown parameter " + rule.name);
      rule.min_ns = it->second;
    } else {
      rule.name = get_or<std::string>(r, "name", "rule");
      rule.min_ns = r.at("min_ns").get<double>();
    }
    const double slots = rule.min_ns / cfg.timing.bus_slot_ns;
    if (rule.min_ns < 0 || std::fabs(slots - std::round(slots)) > 1e-6) {
      config_error(origin, "rule " + rule.name + " is not a non-negative multiple of the bus slot");
    }
    cfg.timing.rules.push_back(rule);
  }

  if (doc.contains("refresh")) cfg.rows_per_ref = get_or(doc["refresh"], "rows_per_ref", cfg.rows_per_ref);
  if (cfg.rows_per_ref < 1) config_error(origin, "rows_per_ref must be >= 1");

  if (doc.contains("scheduler")) {
    const auto& s = doc["scheduler"];
    auto& sc = cfg.scheduler;
    sc.refresh_enabled = get_or(s, "refresh_enabled", sc.refresh_enabled);
    sc.zqs_enabled = get_or(s, "zqs_enabled", sc.zqs_enabled);
    sc.periodic_read_enabled = get_or(s, "periodic_read_enabled", sc.periodic_read_enabled);
    sc.refresh_period_ns = get_or(s, "refresh_period_ns", sc.refresh_period_ns);
    sc.zqs_period_ns = get_or(s, "zqs_period_ns", sc.zqs_period_ns);
    sc.periodic_read_period_ns = get_or(s, "periodic_read_period_ns", sc.periodic_read_period_ns);
    if (!(sc.refresh_period_ns > 0 && sc.zqs_period_ns > 0 && sc.periodic_read_period_ns > 0)) {
      config_error(origin, "scheduler periods must be positive");
    }
  }

  if (doc.contains("energy_nj")) {
    for (auto& [k, v] : doc["energy_nj"].items()) {
      cfg.energy[static_cast<size_t>(class_or_throw(k, origin))] = v.get<double>();
    }
  }

  if (doc.contains("fault_model")) {
    const auto& f = doc["fault_model"];
    auto& fm = cfg.fault;
    fm.seed = get_or<uint64_t>(f, "seed", fm.seed);
    fm.calibrated = get_or(f, "calibrated", fm.calibrated);
    fm.temperature_c = get_or(f, "temperature_c", fm.temperature_c);
    if (f.contains("rowhammer")) {
      const auto& r = f["rowhammer"];
      auto& rh = fm.rowhammer;
      rh.enabled = get_or(r, "enabled", rh.enabled);
      rh.base_disturb = get_or(r, "base_disturb", rh.base_disturb);
      rh.distance2_ratio = get_or(r, "distance2_ratio", rh.distance2_ratio);
      rh.alternation_bonus = get_or(r, "alternation_bonus", rh.alternation_bonus);
      rh.data_pattern_gate = get_or(r, "data_pattern_gate", rh.data_pattern_gate);
      if (r.contains("threshold")) {
        const auto& th = r["threshold"];
        auto& m = rh.threshold;
        m.min = get_or(th, "min", m.min);
        m.median = get_or(th, "median", m.median);
        m.shape = get_or(th, "shape", m.shape);
        m.weak_fraction = get_or(th, "weak_fraction", m.weak_fraction);
        m.tail_fraction = get_or(th, "tail_fraction", m.tail_fraction);
        m.tail_spread = get_or(th, "tail_spread", m.tail_spread);
      }
      const auto& m = rh.threshold;
      if (!(m.min > 0 && m.median > m.min && m.shape > 0 && m.tail_spread >= 0)) {
        config_error(origin, "rowhammer thresholds must satisfy 0 < min < median, shape > 0");
      }
      check_probability(m.weak_fraction, origin, "weak_fraction");
      check_probability(m.tail_fraction, origin, "tail_fraction");
      if (!(rh.base_disturb >= 0 && rh.alternation_bonus >= 0)) {
        config_error(origin, "disturbance weights must be non-negative");
      }
      if (!(rh.distance2_ratio >= 0 && rh.distance2_ratio < 1)) config_error(origin, "distance2_ratio must lie in [0,1)");
    }
    if (f.contains("majority")) {
      const auto& m = f["majority"];
      auto& mj = fm.majority;
      mj.tras_threshold_ns = get_or(m, "tras_threshold_ns", mj.tras_threshold_ns);
      mj.trp_threshold_ns = get_or(m, "trp_threshold_ns", mj.trp_threshold_ns);
      if (m.contains("valid_timings")) {
        for (const auto& p : m["valid_timings"]) mj.valid_timings.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      }
      if (m.contains("and_error")) mj.and_error = parse_eps(m["and_error"]);
      if (m.contains("or_gap")) mj.or_gap = parse_eps(m["or_gap"]);
      check_probability(mj.and_error.floor, origin, "and_error.floor");
      check_probability(mj.and_error.median, origin, "and_error.median");
      check_probability(mj.or_gap.median, origin, "or_gap.median");
      if (mj.and_error.median < mj.and_error.floor) config_error(origin, "and_error median below floor");
    }
    if (f.contains("retention")) {
      const auto& r = f["retention"];
      auto& rt = fm.retention;
      rt.enabled = get_or(r, "enabled", rt.enabled);
      rt.weak_fraction = get_or(r, "weak_fraction", rt.weak_fraction);
      rt.median_ms = get_or(r, "median_ms", rt.median_ms);
      rt.shape = get_or(r, "shape", rt.shape);
      check_probability(rt.weak_fraction, origin, "retention.weak_fraction");
      if (!(rt.median_ms > 0)) config_error(origin, "retention median must be positive");
    }
  }

  if (doc.contains("experiment")) {
    for (auto& [k, v] : doc["experiment"].items()) cfg.experiment[k] = v.get<double>();
  }
  return cfg;
}

}  // namespace

std::string_view command_class_name(CommandClass c) { return kClassNames[static_cast<size_t>(c)]; }

std::optional<CommandClass> parse_command_class(std::string_view text) {
  for (size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == text) return static_cast<CommandClass>(i);
  }
  return std::nullopt;
}

std::string_view rule_scope_name(RuleScope s) {
  switch (s) {
    case RuleScope::SameBank: return "same_bank";
    case RuleScope::SameDevice: return "same_device";
    case RuleScope::DifferentBank: return "different_bank";
  }
  return "?";
}

double TimingConfig::parameter(const std::string& name) const {
  auto it = parameters.find(name);
  if (it == parameters.end()) fail(ErrorCode::ConfigError, "missing timing parameter " + name);
  return it->second;
}

int64_t TimingConfig::to_slots(double ns) const {
  return static_cast<int64_t>(std::ceil(ns / bus_slot_ns - 1e-9));
}

int64_t TimingConfig::parameter_slots(const std::string& name) const { return to_slots(parameter(name)); }

std::string config_directory() {
  if (const char* env = std::getenv("DBENDER_CONFIG_DIR")) return env;
  return DBENDER_CONFIG_DIR;
}

std::string resolve_profile_path(const std::string& path_or_id) {
  if (fs::exists(path_or_id)) return path_or_id;
  fs::path p = fs::path(config_directory()) / path_or_id;
  if (fs::exists(p)) return p.string();
  p += ".json";
  if (fs::exists(p)) return p.string();
  fail(ErrorCode::ConfigError, path_or_id + ": no such config file or profile");
}

PlatformConfig load_config(const std::string& path_or_id) {
  const std::string path = resolve_profile_path(path_or_id);
  try {
    return from_json(load_with_extends(path), path);
  } catch (const json::exception& e) {
    config_error(path, e.what());
  }
}

PlatformConfig parse_config_text(const std::string& json_text, const std::string& origin) {
  try {
    json doc = json::parse(json_text, nullptr, true, true);
    if (doc.contains("extends")) {
      const fs::path base = fs::path(config_directory()) / doc["extends"].get<std::string>();
      json merged = load_with_extends(base);
      doc.erase("extends");
      merged.merge_patch(doc);
      doc = std::move(merged);
    }
    return from_json(doc, origin);
  } catch (const json::exception& e) {
    config_error(origin, e.what());
  }
}

std::string config_to_json(const PlatformConfig& cfg) {
  json doc;
  doc["name"] = cfg.name;
  doc["standard"] = cfg.standard;
  doc["geometry"] = {{"banks", cfg.geometry.banks},
                     {"rows_per_bank", cfg.geometry.rows_per_bank},
                     {"columns_per_row", cfg.geometry.columns_per_row},
                     {"transfer_bits", cfg.geometry.transfer_bits}};
  doc["platform"] = {{"instruction_capacity", cfg.instruction_capacity},
                     {"scratchpad_words", cfg.scratchpad_words},
                     {"fifo_transfers", cfg.fifo_capacity},
                     {"host_drain", {cfg.drain_numerator, cfg.drain_denominator}}};
  json rules = json::array();
  for (const auto& r : cfg.timing.rules) {
    rules.push_back({{"name", r.name},
                     {"prev", std::string(command_class_name(r.prev))},
                     {"next", std::string(command_class_name(r.next))},
                     {"scope", std::string(rule_scope_name(r.scope))},
                     {"min_ns", r.min_ns}});
  }
  doc["timing"] = {{"bus_slot_ns", cfg.timing.bus_slot_ns}, {"parameters", cfg.timing.parameters}, {"rules", rules}};
  doc["refresh"] = {{"rows_per_ref", cfg.rows_per_ref}};
  const auto& s = cfg.scheduler;
  doc["scheduler"] = {{"refresh_enabled", s.refresh_enabled},
                      {"zqs_enabled", s.zqs_enabled},
                      {"periodic_read_enabled", s.periodic_read_enabled},
                      {"refresh_period_ns", s.refresh_period_ns},
                      {"zqs_period_ns", s.zqs_period_ns},
                      {"periodic_read_period_ns", s.periodic_read_period_ns}};
  json energy = json::object();
  for (int i = 0; i < kCommandClassCount; ++i) {
    energy[std::string(kClassNames[i])] = cfg.energy[i];
  }
  doc["energy_nj"] = energy;
  const auto& f = cfg.fault;
  const auto& rh = f.rowhammer;
  const auto& th = rh.threshold;
  json valid = json::array();
  for (const auto& [a, b] : f.majority.valid_timings) valid.push_back({a, b});
  doc["fault_model"] = {
      {"seed", f.seed},
      {"calibrated", f.calibrated},
      {"temperature_c", f.temperature_c},
      {"rowhammer",
       {{"enabled", rh.enabled},
        {"base_disturb", rh.base_disturb},
        {"distance2_ratio", rh.distance2_ratio},
        {"alternation_bonus", rh.alternation_bonus},
        {"data_pattern_gate", rh.data_pattern_gate},
        {"threshold",
         {{"min", th.min},
          {"median", th.median},
          {"shape", th.shape},
          {"weak_fraction", th.weak_fraction},
          {"tail_fraction", th.tail_fraction},
          {"tail_spread", th.tail_spread}}}}},
      {"majority",
       {{"tras_threshold_ns", f.majority.tras_threshold_ns},
        {"trp_threshold_ns", f.majority.trp_threshold_ns},
        {"valid_timings", valid},
        {"and_error", eps_json(f.majority.and_error)},
        {"or_gap", eps_json(f.majority.or_gap)}}},
      {"retention",
       {{"enabled", f.retention.enabled},
        {"weak_fraction", f.retention.weak_fraction},
        {"median_ms", f.retention.median_ms},
        {"shape", f.retention.shape}}}};
  doc["experiment"] = cfg.experiment;
  return doc.dump(2) + "\n";
}

}  // namespace dbender
