#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wattbench/energy_table.hpp"
#include "wattbench/profile.hpp"

namespace wattbench {

enum class PredictionMode { direct, pred };

const char* to_string(PredictionMode mode);
std::optional<PredictionMode> prediction_mode_from_string(std::string_view text);

struct SplitCounts {
  double l1 = 0.0;
  double l2 = 0.0;
  double dram = 0.0;

  double total() const { return l1 + l2 + dram; }
};

// Cascading hit-rate split: L1 hits first, L1 misses flow to L2, the rest to
// DRAM. Absent rates count as zero; counts are conserved exactly.
SplitCounts split_by_hit_rate(double count, const FamilyHitRates& rates);

struct BreakdownRow {
  double count = 0.0;
  double energy_j = 0.0;
  Provenance provenance = Provenance::solved;
};

struct PredictionReport {
  std::string kernel_label;
  PredictionMode mode = PredictionMode::pred;
  double total_j = 0.0;
  double const_j = 0.0;
  double static_j = 0.0;
  // group key, level-qualified where hit-rate splitting applied
  std::map<std::string, BreakdownRow> dynamic_breakdown;
  double covered_instruction_fraction = 1.0;  // dynamic-count-weighted
  std::vector<std::string> uncovered_keys;
  std::vector<std::string> notes;

  std::string to_json() const;
  static PredictionReport from_json(std::string_view text);
  static PredictionReport from_json_file(const std::string& path);
};

// Eq-style prediction: baseline powers times execution time plus count *
// energy over every covered instruction group. Memory-family groups are hit-
// rate split and priced per level; misses contribute zero energy and are
// recorded. Throws on grouping-rules fingerprint mismatch.
PredictionReport predict_energy(const InstructionProfile& profile, const EnergyTable& table,
                                PredictionMode mode = PredictionMode::pred);

struct AttributionRow {
  int rank = 0;
  std::string label;   // group key, "constant", "static", or "remainder"
  std::string level;   // "L1"/"L2"/"DRAM" or empty
  std::optional<double> count;
  double energy_j = 0.0;
  std::string provenance;
  double share_pct = 0.0;
};

struct Attribution {
  std::vector<AttributionRow> rows;
  double total_j = 0.0;

  // `rank,group_key,level,count,energy_j,provenance,share_pct`
  std::string to_csv() const;
  std::string to_text() const;
};

// Rows sorted descending by energy (constant and static participate as their
// own rows), ties broken by label; entries past top_k fold into one
// "remainder" aggregate row.
Attribution attribute(const PredictionReport& report, int top_k);

}  // namespace wattbench
