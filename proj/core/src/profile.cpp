#include "wattbench/profile.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wattbench/csv.hpp"
#include "wattbench/errors.hpp"
#include "wattbench/glob.hpp"
#include "wattbench/io.hpp"

using nlohmann::json;

namespace wattbench {

namespace {

double checked_hit_rate(const json& value, const std::string& key) {
  if (!value.is_number())
    throw Error(ErrorKind::format, "profile metadata: '" + key + "' must be a number");
  const double rate = value.get<double>();
  if (rate < 0.0 || rate > 1.0)
    throw Error(ErrorKind::value,
                "profile metadata: '" + key + "' outside [0,1]: " + std::to_string(rate));
  return rate;
}

json hit_rates_to_json(const std::map<std::string, FamilyHitRates>& rates) {
  json out = json::object();
  for (const auto& [family, fr] : rates) {
    json entry = json::object();
    if (fr.l1) entry["l1"] = *fr.l1;
    if (fr.l2) entry["l2"] = *fr.l2;
    out[family] = std::move(entry);
  }
  return out;
}

}  // namespace

GroupingRules::GroupingRules(std::vector<GroupingRule> rules) : rules_(std::move(rules)) {
  for (const auto& rule : rules_) {
    if (rule.match.empty())
      throw Error(ErrorKind::value, "grouping rule with empty match pattern");
    if (rule.rewrite.empty())
      throw Error(ErrorKind::value, "grouping rule '" + rule.match + "' with empty rewrite");
    if (rule.sequence_divisor && *rule.sequence_divisor < 1)
      throw Error(ErrorKind::value,
                  "grouping rule '" + rule.match + "' with non-positive sequence divisor");
  }
}

GroupingRules GroupingRules::defaults() {
  std::vector<GroupingRule> rules;
  // Eviction-hint modifiers on global memory ops do not change the energy key.
  for (const char* op : {"LDG", "STG"}) {
    for (const char* hint : {"EF", "EL", "LU"}) {
      for (const char* width : {"", ".64", ".128"}) {
        GroupingRule rule;
        rule.match = std::string(op) + ".E." + hint + width;
        rule.rewrite = std::string(op) + ".E" + width;
        rules.push_back(std::move(rule));
      }
    }
  }
  // Predicate logic-op variants all map onto one canonical compare.
  rules.push_back(GroupingRule{"ISETP.*", "ISETP.GE.AND", std::nullopt});
  // V100 tensor ops execute as four .STEPn instructions; report them as one.
  rules.push_back(GroupingRule{"HMMA.884.F32.F32.STEP*", "HMMA.884.F32.F32", 4});
  return GroupingRules(std::move(rules));
}

GroupingRules GroupingRules::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::format, std::string("grouping rules: invalid JSON: ") + e.what());
  }
  if (!doc.is_array())
    throw Error(ErrorKind::format, "grouping rules: top level must be an array");
  std::vector<GroupingRule> rules;
  for (const auto& item : doc) {
    GroupingRule rule;
    if (!item.contains("match") || !item.contains("rewrite"))
      throw Error(ErrorKind::format, "grouping rules: each rule needs 'match' and 'rewrite'");
    rule.match = item.at("match").get<std::string>();
    rule.rewrite = item.at("rewrite").get<std::string>();
    if (item.contains("sequence_divisor"))
      rule.sequence_divisor = item.at("sequence_divisor").get<int>();
    rules.push_back(std::move(rule));
  }
  return GroupingRules(std::move(rules));
}

GroupingRules GroupingRules::from_json_file(const std::string& path) {
  return from_json(read_file(path));
}

std::string GroupingRules::to_json() const {
  json doc = json::array();
  for (const auto& rule : rules_) {
    json item;
    item["match"] = rule.match;
    item["rewrite"] = rule.rewrite;
    if (rule.sequence_divisor) item["sequence_divisor"] = *rule.sequence_divisor;
    doc.push_back(std::move(item));
  }
  return doc.dump(2) + "\n";
}

std::uint64_t GroupingRules::fingerprint() const {
  std::uint64_t hash = 1469598103934665603ull;  // FNV offset basis
  auto mix = [&hash](std::string_view text) {
    for (unsigned char c : text) {
      hash ^= c;
      hash *= 1099511628211ull;  // FNV prime
    }
    hash ^= 0x1f;
    hash *= 1099511628211ull;
  };
  for (const auto& rule : rules_) {
    mix(rule.match);
    mix(rule.rewrite);
    mix(rule.sequence_divisor ? std::to_string(*rule.sequence_divisor) : "-");
  }
  return hash;
}

double InstructionProfile::total_instruction_count() const {
  double total = 0.0;
  for (const auto& [key, count] : grouped_counts) total += count;
  return total;
}

std::string InstructionProfile::to_json() const {
  json doc;
  doc["kernel_label"] = kernel_label;
  doc["t_exec_s"] = t_exec_s;
  json counts = json::object();
  for (const auto& [key, count] : grouped_counts) counts[key] = count;
  doc["grouped_counts"] = std::move(counts);
  if (l1_load_hit_rate) doc["l1_load_hit_rate"] = *l1_load_hit_rate;
  if (l2_hit_rate) doc["l2_hit_rate"] = *l2_hit_rate;
  if (!family_hit_rates.empty()) doc["hit_rates"] = hit_rates_to_json(family_hit_rates);
  char fp[32];
  std::snprintf(fp, sizeof(fp), "%016llx",
                static_cast<unsigned long long>(grouping_fingerprint));
  doc["grouping_fingerprint"] = fp;
  return doc.dump(2) + "\n";
}

RawProfile parse_instruction_profile(std::istream& opcode_csv, std::istream& metadata_json) {
  const std::string what = "opcode counts";
  csv::Table table = csv::read_table(opcode_csv, what);
  if (table.header.size() != 2 || table.header[0] != "opcode" || table.header[1] != "count")
    throw Error(ErrorKind::format, what + ": header must be 'opcode,count'");

  RawProfile profile;
  std::map<std::string, std::size_t> seen;  // opcode -> index into opcode_counts
  for (const auto& row : table.rows) {
    if (row.cells.size() != 2)
      throw Error(ErrorKind::format,
                  what + ": expected 2 cells at line " + std::to_string(row.line_number));
    const std::string& opcode = row.cells[0];
    if (opcode.empty())
      throw Error(ErrorKind::format,
                  what + ": empty opcode at line " + std::to_string(row.line_number));
    const double count = csv::parse_double(row.cells[1], row.line_number, what);
    if (count < 0.0)
      throw Error(ErrorKind::value,
                  what + ": negative count at line " + std::to_string(row.line_number));
    auto [it, inserted] = seen.emplace(opcode, profile.opcode_counts.size());
    if (inserted) {
      profile.opcode_counts.push_back(RawOpcodeCount{opcode, count});
    } else {
      profile.opcode_counts[it->second].count += count;
      profile.warnings.push_back("duplicate opcode '" + opcode + "' rows merged");
    }
  }

  json meta;
  try {
    meta = json::parse(metadata_json);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::format, std::string("profile metadata: invalid JSON: ") + e.what());
  }
  if (!meta.is_object())
    throw Error(ErrorKind::format, "profile metadata: top level must be an object");
  if (!meta.contains("kernel_label"))
    throw Error(ErrorKind::format, "profile metadata: missing 'kernel_label'");
  if (!meta.contains("t_exec_s"))
    throw Error(ErrorKind::format, "profile metadata: missing 't_exec_s'");
  profile.kernel_label = meta.at("kernel_label").get<std::string>();
  profile.t_exec_s = meta.at("t_exec_s").get<double>();
  if (profile.t_exec_s <= 0.0)
    throw Error(ErrorKind::value, "profile metadata: t_exec_s must be positive");
  if (meta.contains("l1_load_hit_rate"))
    profile.l1_load_hit_rate = checked_hit_rate(meta.at("l1_load_hit_rate"), "l1_load_hit_rate");
  if (meta.contains("l2_hit_rate"))
    profile.l2_hit_rate = checked_hit_rate(meta.at("l2_hit_rate"), "l2_hit_rate");
  if (meta.contains("hit_rates")) {
    const json& rates = meta.at("hit_rates");
    if (!rates.is_object())
      throw Error(ErrorKind::format, "profile metadata: 'hit_rates' must be an object");
    for (auto it = rates.begin(); it != rates.end(); ++it) {
      FamilyHitRates fr;
      if (it.value().contains("l1"))
        fr.l1 = checked_hit_rate(it.value().at("l1"), it.key() + ".l1");
      if (it.value().contains("l2"))
        fr.l2 = checked_hit_rate(it.value().at("l2"), it.key() + ".l2");
      profile.family_hit_rates[it.key()] = fr;
    }
  }
  if (meta.contains("count_scale_factor")) {
    const double factor = meta.at("count_scale_factor").get<double>();
    if (factor <= 0.0)
      throw Error(ErrorKind::value, "profile metadata: count_scale_factor must be positive");
    profile.count_scale_factor = factor;
  }
  return profile;
}

RawProfile parse_instruction_profile_files(const std::string& opcode_csv_path,
                                           const std::string& metadata_path) {
  std::ifstream counts(opcode_csv_path, std::ios::binary);
  if (!counts) throw Error(ErrorKind::io, "cannot open opcode counts: " + opcode_csv_path);
  std::ifstream meta(metadata_path, std::ios::binary);
  if (!meta) throw Error(ErrorKind::io, "cannot open profile metadata: " + metadata_path);
  return parse_instruction_profile(counts, meta);
}

InstructionProfile scale_counts(const InstructionProfile& profile, double scale_factor) {
  if (scale_factor <= 0.0)
    throw Error(ErrorKind::value, "count scale factor must be positive");
  InstructionProfile scaled = profile;
  for (auto& [key, count] : scaled.grouped_counts) count *= scale_factor;
  return scaled;
}

std::map<std::string, double> apply_grouping(const std::vector<RawOpcodeCount>& raw,
                                             const GroupingRules& rules) {
  std::map<std::string, double> grouped;
  for (const auto& entry : raw) {
    const std::string* key = &entry.opcode;
    for (const auto& rule : rules.rules()) {
      if (rule.sequence_divisor) continue;  // handled by collapse_sequences
      if (glob_match(rule.match, entry.opcode)) {
        key = &rule.rewrite;
        break;
      }
    }
    grouped[*key] += entry.count;
  }
  return grouped;
}

std::map<std::string, double> apply_grouping(const std::map<std::string, double>& raw,
                                             const GroupingRules& rules) {
  std::vector<RawOpcodeCount> list;
  list.reserve(raw.size());
  for (const auto& [opcode, count] : raw) list.push_back(RawOpcodeCount{opcode, count});
  return apply_grouping(list, rules);
}

std::map<std::string, double> collapse_sequences(const std::map<std::string, double>& grouped,
                                                 const GroupingRules& rules,
                                                 std::vector<std::string>* warnings) {
  std::map<std::string, double> out;
  // family key -> (accumulated step count, divisor)
  std::map<std::string, std::pair<double, int>> sequences;
  for (const auto& [key, count] : grouped) {
    bool matched = false;
    for (const auto& rule : rules.rules()) {
      if (!rule.sequence_divisor) continue;
      if (glob_match(rule.match, key)) {
        auto& slot = sequences[rule.rewrite];
        slot.first += count;
        slot.second = *rule.sequence_divisor;
        matched = true;
        break;
      }
    }
    if (!matched) out[key] += count;
  }
  for (const auto& [family, slot] : sequences) {
    const double quotient = slot.first / slot.second;
    const double snapped = std::round(quotient);
    if (std::fabs(quotient - snapped) > 1e-9 * std::max(1.0, std::fabs(quotient)) &&
        warnings != nullptr) {
      std::ostringstream msg;
      msg << "sequence '" << family << "': step total " << slot.first << " not divisible by "
          << slot.second << "; rounded " << quotient << " to " << snapped;
      warnings->push_back(msg.str());
    }
    out[family] += snapped;
  }
  return out;
}

InstructionProfile build_profile(const RawProfile& raw, const GroupingRules& rules) {
  std::vector<RawOpcodeCount> counts = raw.opcode_counts;
  if (raw.count_scale_factor) {
    if (*raw.count_scale_factor <= 0.0)
      throw Error(ErrorKind::value, "count scale factor must be positive");
    for (auto& entry : counts) entry.count *= *raw.count_scale_factor;
  }
  InstructionProfile profile;
  profile.kernel_label = raw.kernel_label;
  profile.t_exec_s = raw.t_exec_s;
  profile.l1_load_hit_rate = raw.l1_load_hit_rate;
  profile.l2_hit_rate = raw.l2_hit_rate;
  profile.family_hit_rates = raw.family_hit_rates;
  profile.warnings = raw.warnings;
  profile.grouped_counts =
      collapse_sequences(apply_grouping(counts, rules), rules, &profile.warnings);
  profile.grouping_fingerprint = rules.fingerprint();
  return profile;
}

}  // namespace wattbench
