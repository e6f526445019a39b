#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wattbench {

struct RawOpcodeCount {
  std::string opcode;  // SASS mnemonic with full modifier chain
  double count = 0.0;
};

struct FamilyHitRates {
  std::optional<double> l1;
  std::optional<double> l2;
};

/// Parser output for one profiler export: raw opcode counts plus metadata.
struct RawProfile {
  std::string kernel_label;
  std::vector<RawOpcodeCount> opcode_counts;
  double t_exec_s = 0.0;
  std::optional<double> l1_load_hit_rate;
  std::optional<double> l2_hit_rate;
  std::map<std::string, FamilyHitRates> family_hit_rates;
  std::optional<double> count_scale_factor;
  std::vector<std::string> warnings;
};

struct GroupingRule {
  std::string match;    // glob over the opcode text
  std::string rewrite;  // canonical group key
  std::optional<int> sequence_divisor;
};

/// Ordered, first-match-wins opcode rewrite rules. Rules with a
/// sequence_divisor are applied by collapse_sequences, the rest by
/// apply_grouping; unmatched opcodes pass through as their own group.
class GroupingRules {
 public:
  GroupingRules() = default;
  explicit GroupingRules(std::vector<GroupingRule> rules);

  // Built-in defaults: eviction-hint stripping on global loads/stores,
  // predicate-op canonicalization on ISETP, HMMA step-sequence collapse.
  static GroupingRules defaults();
  static GroupingRules from_json(std::string_view text);
  static GroupingRules from_json_file(const std::string& path);
  std::string to_json() const;

  const std::vector<GroupingRule>& rules() const { return rules_; }

  // FNV-1a over the canonical serialization; identifies the rule set so
  // tables and profiles grouped with different rules cannot be mixed.
  std::uint64_t fingerprint() const;

 private:
  std::vector<GroupingRule> rules_;
};

struct InstructionProfile {
  std::string kernel_label;
  std::map<std::string, double> grouped_counts;
  double t_exec_s = 0.0;
  std::optional<double> l1_load_hit_rate;
  std::optional<double> l2_hit_rate;
  std::map<std::string, FamilyHitRates> family_hit_rates;
  std::uint64_t grouping_fingerprint = 0;
  std::vector<std::string> warnings;

  double total_instruction_count() const;
  std::string to_json() const;  // deterministic, sorted keys
};

// Opcode CSV (`opcode,count`) plus metadata JSON (`kernel_label`, `t_exec_s`,
// optional hit rates and `count_scale_factor`). Duplicate opcode rows are
// summed with a warning; hit rates outside [0,1] are rejected.
RawProfile parse_instruction_profile(std::istream& opcode_csv, std::istream& metadata_json);
RawProfile parse_instruction_profile_files(const std::string& opcode_csv_path,
                                           const std::string& metadata_path);

// Multiplies every grouped count by scale_factor; hit rates are unchanged.
InstructionProfile scale_counts(const InstructionProfile& profile, double scale_factor);

std::map<std::string, double> apply_grouping(const std::vector<RawOpcodeCount>& raw,
                                             const GroupingRules& rules);
std::map<std::string, double> apply_grouping(const std::map<std::string, double>& raw,
                                             const GroupingRules& rules);

// Folds step-modified instruction sequences (e.g. HMMA .STEP0..STEP3) into
// their family key, dividing the accumulated count by the family divisor.
// Non-divisible totals are rounded to nearest with a warning.
std::map<std::string, double> collapse_sequences(const std::map<std::string, double>& grouped,
                                                 const GroupingRules& rules,
                                                 std::vector<std::string>* warnings = nullptr);

// Full ingest: scale raw counts (count_scale_factor), group, collapse, and
// stamp the rules fingerprint.
InstructionProfile build_profile(const RawProfile& raw, const GroupingRules& rules);

}  // namespace wattbench
