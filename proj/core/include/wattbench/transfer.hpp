#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wattbench/energy_table.hpp"

namespace wattbench {

/// Affine map between two systems' per-instruction energies.
struct TransferMap {
  double slope = 1.0;
  double intercept = 0.0;  // joules
  double r_squared = 0.0;
  std::uint64_t seed = 0;
  double fraction = 1.0;
  std::vector<std::string> fitted_on;  // qualified group keys, sorted

  std::string to_json() const;
  static TransferMap from_json(std::string_view text);
  static TransferMap from_json_file(const std::string& path);
};

// Ordinary least squares through (source energy, target energy) pairs. When
// fraction < 1, a seeded uniform draw without replacement picks the pairs to
// fit on. Every target key must exist in the source table.
TransferMap fit_transfer(const EnergyTable& source,
                         const std::map<std::string, double>& target_subset, double fraction,
                         std::uint64_t seed);

// Builds the target table: keys with measured target energies keep them
// (provenance direct); every other source entry maps through the affine fit
// with provenance `scaled`, clamped at zero. Baseline powers must come from
// the target system itself.
EnergyTable apply_transfer(const EnergyTable& source, const TransferMap& map,
                           const std::map<std::string, double>& known_target,
                           double target_p_const_w, double target_p_static_w,
                           std::vector<std::string>* warnings = nullptr);

}  // namespace wattbench
