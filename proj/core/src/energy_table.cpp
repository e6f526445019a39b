#include "wattbench/energy_table.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "wattbench/errors.hpp"
#include "wattbench/glob.hpp"
#include "wattbench/io.hpp"

using nlohmann::json;

namespace wattbench {

namespace {

constexpr int kSchemaMajor = 1;
constexpr int kSchemaMinor = 0;

int provenance_rank(Provenance provenance) {
  switch (provenance) {
    case Provenance::direct:
    case Provenance::solved:
      return 2;
    case Provenance::grouped:
      return 1;
    case Provenance::bucketed:
    case Provenance::scaled:
      return 0;
  }
  return 0;
}

bool is_known(Provenance provenance) {
  return provenance == Provenance::direct || provenance == Provenance::solved;
}

bool starts_with(const std::string& text, std::string_view prefix) {
  return text.size() >= prefix.size() && text.compare(0, prefix.size(), prefix) == 0;
}

std::string fingerprint_hex(std::uint64_t fingerprint) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(fingerprint));
  return buffer;
}

std::uint64_t fingerprint_from_hex(const std::string& text) {
  return std::strtoull(text.c_str(), nullptr, 16);
}

constexpr std::array<MemoryLevel, 3> kLevels = {MemoryLevel::l1, MemoryLevel::l2,
                                                MemoryLevel::dram};

}  // namespace

const char* to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::direct: return "direct";
    case Provenance::solved: return "solved";
    case Provenance::grouped: return "grouped";
    case Provenance::bucketed: return "bucketed";
    case Provenance::scaled: return "scaled";
  }
  return "?";
}

const char* to_string(MemoryLevel level) {
  switch (level) {
    case MemoryLevel::l1: return "L1";
    case MemoryLevel::l2: return "L2";
    case MemoryLevel::dram: return "DRAM";
  }
  return "?";
}

std::optional<Provenance> provenance_from_string(std::string_view text) {
  if (text == "direct") return Provenance::direct;
  if (text == "solved") return Provenance::solved;
  if (text == "grouped") return Provenance::grouped;
  if (text == "bucketed") return Provenance::bucketed;
  if (text == "scaled") return Provenance::scaled;
  return std::nullopt;
}

std::optional<MemoryLevel> memory_level_from_string(std::string_view text) {
  if (text == "L1") return MemoryLevel::l1;
  if (text == "L2") return MemoryLevel::l2;
  if (text == "DRAM") return MemoryLevel::dram;
  return std::nullopt;
}

std::string make_qualified_key(const std::string& group_key,
                               std::optional<MemoryLevel> level) {
  if (!level) return group_key;
  return group_key + "@" + to_string(*level);
}

std::pair<std::string, std::optional<MemoryLevel>> split_qualified_key(const std::string& key) {
  const auto at = key.rfind('@');
  if (at == std::string::npos) return {key, std::nullopt};
  const auto level = memory_level_from_string(key.substr(at + 1));
  if (!level) return {key, std::nullopt};
  return {key.substr(0, at), level};
}

std::optional<std::string> instruction_family(const std::string& group_key) {
  if (starts_with(group_key, "LDG")) return "global_load";
  if (starts_with(group_key, "STG")) return "global_store";
  if (starts_with(group_key, "LDL")) return "local_load";
  if (starts_with(group_key, "STL")) return "local_store";
  if (starts_with(group_key, "LDS") || starts_with(group_key, "LDSM")) return "shared_load";
  if (starts_with(group_key, "STS")) return "shared_store";
  if (starts_with(group_key, "LDC") || starts_with(group_key, "ULDC")) return "constant_load";
  if (starts_with(group_key, "TEX") || starts_with(group_key, "TLD")) return "texture";
  if (starts_with(group_key, "LD")) return "global_load";
  if (starts_with(group_key, "ST")) return "global_store";
  return std::nullopt;
}

bool is_cache_split_family(const std::string& family) {
  return family == "global_load" || family == "global_store" || family == "local_load" ||
         family == "local_store" || family == "texture";
}

BucketTaxonomy::BucketTaxonomy(std::vector<Bucket> buckets) : buckets_(std::move(buckets)) {
  for (const auto& bucket : buckets_) {
    if (bucket.name.empty()) throw Error(ErrorKind::value, "bucket with empty name");
    if (bucket.patterns.empty())
      throw Error(ErrorKind::value, "bucket '" + bucket.name + "' has no patterns");
  }
}

BucketTaxonomy BucketTaxonomy::defaults() {
  std::vector<Bucket> buckets;
  buckets.push_back({"tensor", {"HMMA*", "IMMA*", "DMMA*", "BMMA*", "HGMMA*", "QGMMA*"}});
  buckets.push_back({"double-ALU", {"DADD*", "DMUL*", "DFMA*", "DSETP*", "DMNMX*"}});
  buckets.push_back({"float-ALU",
                     {"FADD*", "FMUL*", "FFMA*", "FSETP*", "FMNMX*", "FSEL*", "FCHK*", "MUFU*",
                      "FSWZADD*", "HADD2*", "HMUL2*", "HFMA2*", "HSETP2*"}});
  buckets.push_back({"conversion", {"F2F*", "F2I*", "I2F*", "I2I*", "FRND*"}});
  buckets.push_back({"predicate", {"ISETP*", "PSETP*", "PLOP3*", "P2R*", "R2P*", "CSETP*"}});
  buckets.push_back({"shared-memory", {"LDS*", "STS*", "ATOMS*", "LDSM*"}});
  buckets.push_back({"constant-memory", {"LDC*", "ULDC*"}});
  buckets.push_back({"texture", {"TEX*", "TLD*", "TXD*", "TMML*"}});
  buckets.push_back({"global-memory", {"LDG*", "STG*", "LDL*", "STL*", "LD*", "ST*", "ATOM*",
                                       "ATOMG*", "RED*", "MEMBAR*", "CCTL*"}});
  buckets.push_back({"integer-ALU",
                     {"IADD*", "IMAD*", "IMUL*", "LOP*", "SHF*", "SHL*", "SHR*", "MOV*", "SEL*",
                      "IABS*", "IMNMX*", "LEA*", "POPC*", "FLO*", "BREV*", "R2UR*", "S2R*",
                      "S2UR*", "UMOV*", "VOTE*", "SGXT*", "PRMT*", "CS2R*"}});
  buckets.push_back({"control-flow",
                     {"BRA*", "BRX*", "JMP*", "CALL*", "RET*", "EXIT*", "BSSY*", "BSYNC*",
                      "BAR*", "NANOSLEEP*", "YIELD*", "WARPSYNC*", "NOP*", "BPT*"}});
  buckets.push_back({"misc", {"*"}});
  return BucketTaxonomy(std::move(buckets));
}

BucketTaxonomy BucketTaxonomy::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::format, std::string("bucket taxonomy: invalid JSON: ") + e.what());
  }
  if (!doc.is_array())
    throw Error(ErrorKind::format, "bucket taxonomy: top level must be an array");
  std::vector<Bucket> buckets;
  for (const auto& item : doc) {
    if (!item.contains("bucket") || !item.contains("patterns"))
      throw Error(ErrorKind::format, "bucket taxonomy: each entry needs 'bucket' and 'patterns'");
    Bucket bucket;
    bucket.name = item.at("bucket").get<std::string>();
    for (const auto& pattern : item.at("patterns"))
      bucket.patterns.push_back(pattern.get<std::string>());
    buckets.push_back(std::move(bucket));
  }
  return BucketTaxonomy(std::move(buckets));
}

BucketTaxonomy BucketTaxonomy::from_json_file(const std::string& path) {
  return from_json(read_file(path));
}

std::string BucketTaxonomy::to_json() const {
  json doc = json::array();
  for (const auto& bucket : buckets_) {
    json item;
    item["bucket"] = bucket.name;
    item["patterns"] = bucket.patterns;
    doc.push_back(std::move(item));
  }
  return doc.dump(2) + "\n";
}

std::optional<std::string> BucketTaxonomy::bucket_for(const std::string& group_key) const {
  for (const auto& bucket : buckets_) {
    for (const auto& pattern : bucket.patterns) {
      if (glob_match(pattern, group_key)) return bucket.name;
    }
  }
  return std::nullopt;
}

void EnergyTable::insert_entry(EnergyEntry entry) {
  if (entry.energy_j_per_instruction < 0.0)
    throw Error(ErrorKind::value,
                "negative energy for group '" + entry.group_key + "'");
  const std::string key = make_qualified_key(entry.group_key, entry.memory_level);
  auto it = entries.find(key);
  if (it != entries.end() &&
      provenance_rank(entry.provenance) < provenance_rank(it->second.provenance)) {
    return;  // never displace a better-sourced value
  }
  entries[key] = std::move(entry);
}

const EnergyEntry* EnergyTable::find_entry(const std::string& group_key,
                                           std::optional<MemoryLevel> level) const {
  const auto it = entries.find(make_qualified_key(group_key, level));
  return it == entries.end() ? nullptr : &it->second;
}

EnergyTable assign_buckets(EnergyTable table, const BucketTaxonomy& taxonomy) {
  table.taxonomy = taxonomy;
  table.bucket_averages.clear();
  if (taxonomy.empty()) return table;

  std::map<std::string, std::pair<double, std::size_t>> sums;  // bucket -> (sum, count)
  for (const auto& [key, entry] : table.entries) {
    if (!is_known(entry.provenance)) continue;
    const auto bucket = taxonomy.bucket_for(entry.group_key);
    if (!bucket) continue;
    auto& slot = sums[*bucket];
    slot.first += entry.energy_j_per_instruction;
    slot.second += 1;
  }
  for (const auto& bucket : taxonomy.buckets()) {
    const auto it = sums.find(bucket.name);
    if (it == sums.end()) {
      table.warnings.push_back("bucket '" + bucket.name + "' has no known members");
      continue;
    }
    table.bucket_averages[bucket.name] =
        it->second.first / static_cast<double>(it->second.second);
  }
  return table;
}

std::string scaling_factor_key(const std::string& family, MemoryLevel from, MemoryLevel to) {
  return family + ":" + to_string(from) + ":" + to_string(to);
}

std::optional<LookupResult> lookup_energy(const EnergyTable& table,
                                          const std::string& group_key,
                                          std::optional<MemoryLevel> level, LookupMode mode) {
  // Exact entry at the requested level.
  if (const EnergyEntry* entry = table.find_entry(group_key, level)) {
    if (mode == LookupMode::full || is_known(entry->provenance))
      return LookupResult{entry->energy_j_per_instruction, entry->provenance};
  }
  if (mode == LookupMode::direct_only) return std::nullopt;

  const auto family = instruction_family(group_key);

  // Scaled resolution: a sibling level plus a derive-time factor.
  if (level && family) {
    for (MemoryLevel other : kLevels) {
      if (other == *level) continue;
      const EnergyEntry* entry = table.find_entry(group_key, other);
      if (entry == nullptr) continue;
      const auto factor =
          table.scaling_factors.find(scaling_factor_key(*family, other, *level));
      if (factor == table.scaling_factors.end()) continue;
      return LookupResult{entry->energy_j_per_instruction * factor->second,
                          Provenance::scaled};
    }
    // A level-free entry still beats falling through to the bucket average.
    if (const EnergyEntry* entry = table.find_entry(group_key, std::nullopt))
      return LookupResult{entry->energy_j_per_instruction, entry->provenance};
  }

  // Bucket average over known members.
  const auto bucket = table.taxonomy.bucket_for(group_key);
  if (bucket) {
    const auto it = table.bucket_averages.find(*bucket);
    if (it != table.bucket_averages.end())
      return LookupResult{it->second, Provenance::bucketed};
  }
  return std::nullopt;
}

void derive_scaling(EnergyTable& table, const std::string& family, MemoryLevel from,
                    MemoryLevel to) {
  // Reference: lexicographically first instruction of the family known
  // (direct/solved) at both levels. entries is sorted by key.
  auto known_at = [&](const std::string& base, MemoryLevel level) -> const EnergyEntry* {
    const EnergyEntry* entry = table.find_entry(base, level);
    return (entry != nullptr && is_known(entry->provenance)) ? entry : nullptr;
  };

  const EnergyEntry* from_entry = nullptr;
  const EnergyEntry* to_entry = nullptr;
  bool family_has_from = false, family_has_to = false;
  for (const auto& [key, entry] : table.entries) {
    if (!entry.memory_level || !is_known(entry.provenance)) continue;
    if (instruction_family(entry.group_key) != family) continue;
    if (*entry.memory_level == from) family_has_from = true;
    if (*entry.memory_level == to) family_has_to = true;
    if (from_entry == nullptr) {
      const EnergyEntry* at_from = known_at(entry.group_key, from);
      const EnergyEntry* at_to = known_at(entry.group_key, to);
      if (at_from != nullptr && at_to != nullptr) {
        from_entry = at_from;
        to_entry = at_to;
      }
    }
  }
  if (from_entry == nullptr) {
    if (!family_has_from)
      throw Error(ErrorKind::derivation, "family '" + family + "' has no known entry at level " +
                                             std::string(to_string(from)));
    if (!family_has_to)
      throw Error(ErrorKind::derivation, "family '" + family + "' has no known entry at level " +
                                             std::string(to_string(to)));
    throw Error(ErrorKind::derivation,
                "family '" + family + "' has no instruction known at both " +
                    to_string(from) + " and " + to_string(to));
  }
  const double energy_from = from_entry->energy_j_per_instruction;
  const double energy_to = to_entry->energy_j_per_instruction;
  if (energy_from <= 0.0)
    throw Error(ErrorKind::derivation,
                "cannot derive scaling for family '" + family + "': reference energy at " +
                    to_string(from) + " is zero");
  if (energy_to <= 0.0)
    throw Error(ErrorKind::derivation,
                "cannot derive scaling for family '" + family + "': reference energy at " +
                    to_string(to) + " is zero");
  table.scaling_factors[scaling_factor_key(family, from, to)] = energy_to / energy_from;
  table.scaling_factors[scaling_factor_key(family, to, from)] = energy_from / energy_to;
}

void derive_all_scalings(EnergyTable& table) {
  std::vector<std::string> families;
  for (const auto& [key, entry] : table.entries) {
    if (!entry.memory_level || !is_known(entry.provenance)) continue;
    const auto family = instruction_family(entry.group_key);
    if (!family) continue;
    if (std::find(families.begin(), families.end(), *family) == families.end())
      families.push_back(*family);
  }
  std::sort(families.begin(), families.end());
  for (const auto& family : families) {
    for (std::size_t a = 0; a < kLevels.size(); ++a) {
      for (std::size_t b = a + 1; b < kLevels.size(); ++b) {
        try {
          derive_scaling(table, family, kLevels[a], kLevels[b]);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::derivation) throw;
          // Not every level pair has a reference; that is expected.
        }
      }
    }
  }
}

std::string save_table(const EnergyTable& table) {
  json doc;
  doc["schema_version"] =
      std::to_string(kSchemaMajor) + "." + std::to_string(kSchemaMinor);
  doc["architecture_label"] = table.architecture_label;
  doc["p_const_w"] = table.p_const_w;
  doc["p_static_w"] = table.p_static_w;
  doc["grouping_fingerprint"] = fingerprint_hex(table.grouping_fingerprint);

  json entries = json::object();
  for (const auto& [key, entry] : table.entries) {
    json item;
    item["energy_j"] = entry.energy_j_per_instruction;
    item["provenance"] = to_string(entry.provenance);
    if (entry.memory_level) item["memory_level"] = to_string(*entry.memory_level);
    entries[key] = std::move(item);
  }
  doc["entries"] = std::move(entries);

  doc["bucket_averages"] = json::object();
  for (const auto& [bucket, average] : table.bucket_averages)
    doc["bucket_averages"][bucket] = average;

  doc["scaling_factors"] = json::object();
  for (const auto& [key, factor] : table.scaling_factors) doc["scaling_factors"][key] = factor;

  json taxonomy = json::array();
  for (const auto& bucket : table.taxonomy.buckets()) {
    json item;
    item["bucket"] = bucket.name;
    item["patterns"] = bucket.patterns;
    taxonomy.push_back(std::move(item));
  }
  doc["bucket_taxonomy"] = std::move(taxonomy);

  return doc.dump(2) + "\n";
}

EnergyTable load_table(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::format, std::string("energy table: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version"))
    throw Error(ErrorKind::format, "energy table: missing schema_version");
  const std::string version = doc.at("schema_version").get<std::string>();
  const int major = std::atoi(version.c_str());
  if (major != kSchemaMajor)
    throw Error(ErrorKind::format, "energy table: schema version " + version +
                                       " not supported (expected major " +
                                       std::to_string(kSchemaMajor) + ")");

  EnergyTable table;
  table.architecture_label = doc.value("architecture_label", std::string{});
  table.p_const_w = doc.value("p_const_w", 0.0);
  table.p_static_w = doc.value("p_static_w", 0.0);
  if (table.p_const_w < 0.0 || table.p_static_w < 0.0)
    throw Error(ErrorKind::value, "energy table: baseline powers must be non-negative");
  if (doc.contains("grouping_fingerprint"))
    table.grouping_fingerprint =
        fingerprint_from_hex(doc.at("grouping_fingerprint").get<std::string>());

  if (doc.contains("entries")) {
    for (auto it = doc.at("entries").begin(); it != doc.at("entries").end(); ++it) {
      const auto [base, level] = split_qualified_key(it.key());
      EnergyEntry entry;
      entry.group_key = base;
      entry.memory_level = level;
      entry.energy_j_per_instruction = it.value().at("energy_j").get<double>();
      if (entry.energy_j_per_instruction < 0.0)
        throw Error(ErrorKind::value, "energy table: negative energy for '" + it.key() + "'");
      const auto provenance =
          provenance_from_string(it.value().at("provenance").get<std::string>());
      if (!provenance)
        throw Error(ErrorKind::format, "energy table: bad provenance for '" + it.key() + "'");
      entry.provenance = *provenance;
      if (it.value().contains("memory_level")) {
        const auto explicit_level =
            memory_level_from_string(it.value().at("memory_level").get<std::string>());
        if (!explicit_level)
          throw Error(ErrorKind::format,
                      "energy table: bad memory_level for '" + it.key() + "'");
        entry.memory_level = explicit_level;
      }
      table.entries[it.key()] = std::move(entry);
    }
  }

  if (doc.contains("bucket_averages")) {
    for (auto it = doc.at("bucket_averages").begin(); it != doc.at("bucket_averages").end();
         ++it)
      table.bucket_averages[it.key()] = it.value().get<double>();
  }
  if (doc.contains("scaling_factors")) {
    for (auto it = doc.at("scaling_factors").begin(); it != doc.at("scaling_factors").end();
         ++it) {
      const double factor = it.value().get<double>();
      if (factor <= 0.0)
        throw Error(ErrorKind::value,
                    "energy table: scaling factor for '" + it.key() + "' must be positive");
      table.scaling_factors[it.key()] = factor;
    }
  }
  if (doc.contains("bucket_taxonomy"))
    table.taxonomy = BucketTaxonomy::from_json(doc.at("bucket_taxonomy").dump());
  return table;
}

EnergyTable load_table_file(const std::string& path) { return load_table(read_file(path)); }

void save_table_file(const EnergyTable& table, const std::string& path) {
  write_file_atomic(path, save_table(table));
}

}  // namespace wattbench
