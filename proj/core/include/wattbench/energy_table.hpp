#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wattbench {

enum class Provenance { direct, solved, grouped, bucketed, scaled };

enum class MemoryLevel { l1, l2, dram };

const char* to_string(Provenance provenance);
const char* to_string(MemoryLevel level);
std::optional<Provenance> provenance_from_string(std::string_view text);
std::optional<MemoryLevel> memory_level_from_string(std::string_view text);

// Entries for memory instructions measured at a specific hierarchy level are
// keyed `<group_key>@<LEVEL>`, e.g. `LDG.E@L2`.
std::string make_qualified_key(const std::string& group_key,
                               std::optional<MemoryLevel> level);
std::pair<std::string, std::optional<MemoryLevel>> split_qualified_key(const std::string& key);

// Memory-instruction family of a group key (e.g. "global_load" for LDG.*),
// or nullopt for non-memory instructions. Families share hit-rate data and
// hierarchy scaling factors.
std::optional<std::string> instruction_family(const std::string& group_key);

// Families whose accesses cascade through L1/L2/DRAM and are split by hit
// rate; shared and constant memory are not.
bool is_cache_split_family(const std::string& family);

struct EnergyEntry {
  std::string group_key;  // base key, no level qualifier
  double energy_j_per_instruction = 0.0;
  Provenance provenance = Provenance::solved;
  std::optional<MemoryLevel> memory_level;
};

struct Bucket {
  std::string name;
  std::vector<std::string> patterns;
};

/// Ordered, first-match-wins categorization of group keys into
/// microarchitectural-component buckets.
class BucketTaxonomy {
 public:
  BucketTaxonomy() = default;
  explicit BucketTaxonomy(std::vector<Bucket> buckets);

  static BucketTaxonomy defaults();
  static BucketTaxonomy from_json(std::string_view text);
  static BucketTaxonomy from_json_file(const std::string& path);
  std::string to_json() const;

  const std::vector<Bucket>& buckets() const { return buckets_; }
  bool empty() const { return buckets_.empty(); }
  std::optional<std::string> bucket_for(const std::string& group_key) const;

 private:
  std::vector<Bucket> buckets_;
};

/// The trained model: per-group energies with provenance, baseline powers,
/// bucket averages, and memory-hierarchy scaling factors.
struct EnergyTable {
  std::map<std::string, EnergyEntry> entries;  // keyed by qualified key
  double p_const_w = 0.0;
  double p_static_w = 0.0;
  std::map<std::string, double> bucket_averages;
  // "family:FROM:TO" -> ratio, e.g. "global_load:L1:L2" -> 2.5
  std::map<std::string, double> scaling_factors;
  BucketTaxonomy taxonomy;
  std::string architecture_label;
  std::uint64_t grouping_fingerprint = 0;
  std::vector<std::string> warnings;

  // Enforces non-negative energy and the provenance lattice: direct/solved
  // entries are never displaced by grouped/bucketed/scaled ones.
  void insert_entry(EnergyEntry entry);
  const EnergyEntry* find_entry(const std::string& group_key,
                                std::optional<MemoryLevel> level) const;
};

struct LookupResult {
  double energy_j = 0.0;
  Provenance provenance = Provenance::solved;
};

enum class LookupMode {
  direct_only,  // exact direct/solved entries only
  full,         // adds scaled and bucketed resolution
};

// Recomputes bucket averages from direct/solved entries and stores the
// taxonomy for later lookups. Buckets with no known member get a warning
// and no average.
EnergyTable assign_buckets(EnergyTable table, const BucketTaxonomy& taxonomy);

// Resolution order: exact entry (with level if given) -> scaled entry via a
// derive-time factor -> entry at its measured level -> bucket average ->
// miss (nullopt).
std::optional<LookupResult> lookup_energy(const EnergyTable& table,
                                          const std::string& group_key,
                                          std::optional<MemoryLevel> level = std::nullopt,
                                          LookupMode mode = LookupMode::full);

// Stores energy(to)/energy(from) for the family, using its lexicographically
// first instruction known (direct/solved) at both levels; the reciprocal is
// stored for the reverse direction.
void derive_scaling(EnergyTable& table, const std::string& family, MemoryLevel from,
                    MemoryLevel to);

// Derives factors for every family and level pair with a usable reference.
void derive_all_scalings(EnergyTable& table);

std::string scaling_factor_key(const std::string& family, MemoryLevel from, MemoryLevel to);

// Versioned JSON with sorted keys; save is canonical (two saves of the same
// table are byte-identical).
std::string save_table(const EnergyTable& table);
EnergyTable load_table(std::string_view json_text);
EnergyTable load_table_file(const std::string& path);
void save_table_file(const EnergyTable& table, const std::string& path);

}  // namespace wattbench
