#include "wattbench/prediction.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wattbench/csv.hpp"
#include "wattbench/errors.hpp"
#include "wattbench/io.hpp"

using nlohmann::json;

namespace wattbench {

namespace {

// Hit-rate source for a family, with the fallbacks the profiler landscape
// forces: stores fall back to the matching load family, global loads to the
// top-level l1/l2 rates.
std::optional<FamilyHitRates> resolve_hit_rates(const InstructionProfile& profile,
                                                const std::string& family) {
  const auto it = profile.family_hit_rates.find(family);
  if (it != profile.family_hit_rates.end() && (it->second.l1 || it->second.l2))
    return it->second;
  if (family == "global_load") {
    if (profile.l1_load_hit_rate || profile.l2_hit_rate)
      return FamilyHitRates{profile.l1_load_hit_rate, profile.l2_hit_rate};
    return std::nullopt;
  }
  if (family == "global_store") return resolve_hit_rates(profile, "global_load");
  if (family == "local_store") return resolve_hit_rates(profile, "local_load");
  return std::nullopt;
}

constexpr MemoryLevel kLevels[] = {MemoryLevel::l1, MemoryLevel::l2, MemoryLevel::dram};

}  // namespace

const char* to_string(PredictionMode mode) {
  return mode == PredictionMode::direct ? "direct" : "pred";
}

std::optional<PredictionMode> prediction_mode_from_string(std::string_view text) {
  if (text == "direct") return PredictionMode::direct;
  if (text == "pred") return PredictionMode::pred;
  return std::nullopt;
}

SplitCounts split_by_hit_rate(double count, const FamilyHitRates& rates) {
  if (count < 0.0) throw Error(ErrorKind::value, "split count must be non-negative");
  auto checked = [](std::optional<double> rate) {
    const double value = rate.value_or(0.0);
    if (value < 0.0 || value > 1.0)
      throw Error(ErrorKind::value, "hit rate outside [0,1]");
    return value;
  };
  SplitCounts split;
  split.l1 = count * checked(rates.l1);
  split.l2 = (count - split.l1) * checked(rates.l2);
  split.dram = count - split.l1 - split.l2;
  return split;
}

PredictionReport predict_energy(const InstructionProfile& profile, const EnergyTable& table,
                                PredictionMode mode) {
  if (profile.grouping_fingerprint != 0 && table.grouping_fingerprint != 0 &&
      profile.grouping_fingerprint != table.grouping_fingerprint) {
    throw Error(ErrorKind::compatibility,
                "profile and energy table were grouped with different rules "
                "(fingerprint mismatch)");
  }
  if (profile.t_exec_s <= 0.0)
    throw Error(ErrorKind::value, "profile t_exec_s must be positive");

  const LookupMode lookup_mode =
      mode == PredictionMode::direct ? LookupMode::direct_only : LookupMode::full;

  PredictionReport report;
  report.kernel_label = profile.kernel_label;
  report.mode = mode;
  report.const_j = table.p_const_w * profile.t_exec_s;
  report.static_j = table.p_static_w * profile.t_exec_s;

  double total_count = 0.0;
  double uncovered_count = 0.0;

  auto price = [&](const std::string& breakdown_key, const std::string& group_key,
                   std::optional<MemoryLevel> level, double count) {
    const auto hit = lookup_energy(table, group_key, level, lookup_mode);
    if (hit) {
      auto& row = report.dynamic_breakdown[breakdown_key];
      row.count += count;
      row.energy_j += count * hit->energy_j;
      row.provenance = hit->provenance;
    } else {
      uncovered_count += count;
      report.uncovered_keys.push_back(breakdown_key);
    }
  };

  for (const auto& [group_key, count] : profile.grouped_counts) {
    if (count <= 0.0) continue;
    total_count += count;

    const auto family = instruction_family(group_key);
    if (family && is_cache_split_family(*family)) {
      const auto rates = resolve_hit_rates(profile, *family);
      if (rates) {
        const SplitCounts split = split_by_hit_rate(count, *rates);
        const double level_counts[] = {split.l1, split.l2, split.dram};
        for (std::size_t i = 0; i < 3; ++i) {
          if (level_counts[i] <= 0.0) continue;
          price(make_qualified_key(group_key, kLevels[i]), group_key, kLevels[i],
                level_counts[i]);
        }
        continue;
      }
      // No hit-rate data: price the whole count at the level the table
      // measured this instruction at, and say so.
      bool priced = false;
      for (std::optional<MemoryLevel> level :
           {std::optional<MemoryLevel>{}, std::optional<MemoryLevel>{MemoryLevel::l1},
            std::optional<MemoryLevel>{MemoryLevel::l2},
            std::optional<MemoryLevel>{MemoryLevel::dram}}) {
        const EnergyEntry* entry = table.find_entry(group_key, level);
        if (entry == nullptr) continue;
        if (mode == PredictionMode::direct && entry->provenance != Provenance::direct &&
            entry->provenance != Provenance::solved)
          continue;
        price(make_qualified_key(group_key, level), group_key, level, count);
        report.notes.push_back("no hit-rate data for family '" + *family + "'; '" + group_key +
                               "' priced at its measured level");
        priced = true;
        break;
      }
      if (!priced) price(group_key, group_key, std::nullopt, count);
      continue;
    }

    price(group_key, group_key, std::nullopt, count);
  }

  double dynamic_total = 0.0;
  for (const auto& [key, row] : report.dynamic_breakdown) dynamic_total += row.energy_j;
  report.total_j = report.const_j + report.static_j + dynamic_total;
  report.covered_instruction_fraction =
      total_count > 0.0 ? (total_count - uncovered_count) / total_count : 1.0;
  std::sort(report.uncovered_keys.begin(), report.uncovered_keys.end());
  report.uncovered_keys.erase(
      std::unique(report.uncovered_keys.begin(), report.uncovered_keys.end()),
      report.uncovered_keys.end());
  return report;
}

std::string PredictionReport::to_json() const {
  json doc;
  doc["kernel_label"] = kernel_label;
  doc["mode"] = to_string(mode);
  doc["total_j"] = total_j;
  doc["const_j"] = const_j;
  doc["static_j"] = static_j;
  json breakdown = json::object();
  for (const auto& [key, row] : dynamic_breakdown) {
    json item;
    item["count"] = row.count;
    item["energy_j"] = row.energy_j;
    item["provenance"] = to_string(row.provenance);
    breakdown[key] = std::move(item);
  }
  doc["dynamic_breakdown"] = std::move(breakdown);
  doc["covered_instruction_fraction"] = covered_instruction_fraction;
  doc["uncovered_keys"] = uncovered_keys;
  doc["notes"] = notes;
  return doc.dump(2) + "\n";
}

PredictionReport PredictionReport::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::format, std::string("prediction report: invalid JSON: ") + e.what());
  }
  PredictionReport report;
  report.kernel_label = doc.value("kernel_label", std::string{});
  const auto mode = prediction_mode_from_string(doc.value("mode", "pred"));
  if (!mode) throw Error(ErrorKind::format, "prediction report: bad mode");
  report.mode = *mode;
  report.total_j = doc.at("total_j").get<double>();
  report.const_j = doc.value("const_j", 0.0);
  report.static_j = doc.value("static_j", 0.0);
  if (doc.contains("dynamic_breakdown")) {
    for (auto it = doc.at("dynamic_breakdown").begin(); it != doc.at("dynamic_breakdown").end();
         ++it) {
      BreakdownRow row;
      row.count = it.value().at("count").get<double>();
      row.energy_j = it.value().at("energy_j").get<double>();
      const auto provenance =
          provenance_from_string(it.value().at("provenance").get<std::string>());
      if (!provenance)
        throw Error(ErrorKind::format, "prediction report: bad provenance for '" + it.key() + "'");
      row.provenance = *provenance;
      report.dynamic_breakdown[it.key()] = row;
    }
  }
  report.covered_instruction_fraction = doc.value("covered_instruction_fraction", 1.0);
  if (doc.contains("uncovered_keys"))
    report.uncovered_keys = doc.at("uncovered_keys").get<std::vector<std::string>>();
  if (doc.contains("notes")) report.notes = doc.at("notes").get<std::vector<std::string>>();
  return report;
}

PredictionReport PredictionReport::from_json_file(const std::string& path) {
  return from_json(read_file(path));
}

Attribution attribute(const PredictionReport& report, int top_k) {
  if (top_k < 1) throw Error(ErrorKind::value, "top_k must be at least 1");

  struct Candidate {
    std::string label;
    std::string level;
    std::optional<double> count;
    double energy_j;
    std::string provenance;
  };
  std::vector<Candidate> candidates;
  for (const auto& [key, row] : report.dynamic_breakdown) {
    const auto [base, level] = split_qualified_key(key);
    candidates.push_back(Candidate{base, level ? to_string(*level) : "", row.count,
                                   row.energy_j, to_string(row.provenance)});
  }
  candidates.push_back(Candidate{"constant", "", std::nullopt, report.const_j, "constant"});
  candidates.push_back(Candidate{"static", "", std::nullopt, report.static_j, "static"});

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.energy_j != b.energy_j) return a.energy_j > b.energy_j;
    if (a.label != b.label) return a.label < b.label;
    return a.level < b.level;
  });

  Attribution attribution;
  attribution.total_j = report.total_j;
  const double share_scale = report.total_j > 0.0 ? 100.0 / report.total_j : 0.0;

  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(top_k),
                                                 candidates.size());
  for (std::size_t i = 0; i < keep; ++i) {
    const auto& c = candidates[i];
    attribution.rows.push_back(AttributionRow{static_cast<int>(i + 1), c.label, c.level,
                                              c.count, c.energy_j, c.provenance,
                                              c.energy_j * share_scale});
  }
  if (candidates.size() > keep) {
    double remainder = 0.0;
    for (std::size_t i = keep; i < candidates.size(); ++i) remainder += candidates[i].energy_j;
    attribution.rows.push_back(AttributionRow{static_cast<int>(keep + 1), "remainder", "",
                                              std::nullopt, remainder, "aggregate",
                                              remainder * share_scale});
  }
  return attribution;
}

std::string Attribution::to_csv() const {
  std::ostringstream out;
  out << "rank,group_key,level,count,energy_j,provenance,share_pct\n";
  for (const auto& row : rows) {
    out << row.rank << ',' << row.label << ',' << row.level << ',';
    if (row.count) out << csv::format_double(*row.count);
    out << ',' << csv::format_double(row.energy_j) << ',' << row.provenance << ','
        << csv::format_double(row.share_pct) << '\n';
  }
  return out.str();
}

std::string Attribution::to_text() const {
  std::ostringstream out;
  out << std::left << std::setw(4) << "#" << std::setw(28) << "group" << std::setw(6) << "level"
      << std::right << std::setw(16) << "energy_j" << std::setw(10) << "share%" << "  "
      << std::left << "provenance" << '\n';
  for (const auto& row : rows) {
    std::ostringstream energy;
    energy << std::scientific << std::setprecision(4) << row.energy_j;
    std::ostringstream share;
    share << std::fixed << std::setprecision(2) << row.share_pct;
    out << std::left << std::setw(4) << row.rank << std::setw(28) << row.label << std::setw(6)
        << (row.level.empty() ? "-" : row.level) << std::right << std::setw(16) << energy.str()
        << std::setw(10) << share.str() << "  " << std::left << row.provenance << '\n';
  }
  return out.str();
}

}  // namespace wattbench
