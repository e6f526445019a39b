#include "wattbench/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wattbench/errors.hpp"
#include "wattbench/io.hpp"

using nlohmann::json;

namespace wattbench {

namespace {

// Fisher-Yates with an explicit mt19937_64 draw, so the selection depends
// only on the seed, not on the standard library's distribution internals.
std::vector<std::string> draw_subset(std::vector<std::string> keys, std::size_t k,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = keys.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(keys[i], keys[j]);
  }
  keys.resize(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

std::string TransferMap::to_json() const {
  json doc;
  doc["slope"] = slope;
  doc["intercept"] = intercept;
  doc["r_squared"] = r_squared;
  doc["seed"] = seed;
  doc["fraction"] = fraction;
  doc["fitted_on"] = fitted_on;
  return doc.dump(2) + "\n";
}

TransferMap TransferMap::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::format, std::string("transfer map: invalid JSON: ") + e.what());
  }
  TransferMap map;
  map.slope = doc.at("slope").get<double>();
  map.intercept = doc.at("intercept").get<double>();
  map.r_squared = doc.at("r_squared").get<double>();
  if (map.r_squared < 0.0 || map.r_squared > 1.0)
    throw Error(ErrorKind::value, "transfer map: r_squared outside [0,1]");
  map.seed = doc.value("seed", std::uint64_t{0});
  map.fraction = doc.value("fraction", 1.0);
  if (doc.contains("fitted_on"))
    map.fitted_on = doc.at("fitted_on").get<std::vector<std::string>>();
  return map;
}

TransferMap TransferMap::from_json_file(const std::string& path) {
  return from_json(read_file(path));
}

TransferMap fit_transfer(const EnergyTable& source,
                         const std::map<std::string, double>& target_subset, double fraction,
                         std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw Error(ErrorKind::value, "transfer fraction must be in (0,1]");
  if (target_subset.size() < 2)
    throw Error(ErrorKind::fit, "transfer fit needs at least 2 target energies");

  std::vector<std::string> keys;
  keys.reserve(target_subset.size());
  for (const auto& [key, energy] : target_subset) {
    if (source.entries.find(key) == source.entries.end())
      throw Error(ErrorKind::value, "target key '" + key + "' not present in source table");
    if (energy < 0.0)
      throw Error(ErrorKind::value, "target energy for '" + key + "' must be non-negative");
    keys.push_back(key);
  }

  std::vector<std::string> selected;
  if (fraction < 1.0) {
    const auto n = static_cast<double>(keys.size());
    const std::size_t k = static_cast<std::size_t>(
        std::clamp<long long>(std::llround(fraction * n), 2, static_cast<long long>(n)));
    selected = draw_subset(std::move(keys), k, seed);
  } else {
    selected = std::move(keys);
  }

  // Centered one-pass OLS with intercept.
  const auto n = static_cast<double>(selected.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& key : selected) {
    mean_x += source.entries.at(key).energy_j_per_instruction;
    mean_y += target_subset.at(key);
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& key : selected) {
    const double dx = source.entries.at(key).energy_j_per_instruction - mean_x;
    const double dy = target_subset.at(key) - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0)
    throw Error(ErrorKind::fit, "degenerate transfer fit: source energies have zero variance");

  TransferMap map;
  map.slope = sxy / sxx;
  map.intercept = mean_y - map.slope * mean_x;
  if (syy <= 0.0) {
    // Flat target: a perfect fit iff the residuals vanish, which they do
    // whenever slope*x+b reproduces the constant.
    map.r_squared = 1.0;
  } else {
    double ss_res = 0.0;
    for (const auto& key : selected) {
      const double predicted =
          map.slope * source.entries.at(key).energy_j_per_instruction + map.intercept;
      const double residual = target_subset.at(key) - predicted;
      ss_res += residual * residual;
    }
    map.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  map.seed = seed;
  map.fraction = fraction;
  map.fitted_on = std::move(selected);
  return map;
}

EnergyTable apply_transfer(const EnergyTable& source, const TransferMap& map,
                           const std::map<std::string, double>& known_target,
                           double target_p_const_w, double target_p_static_w,
                           std::vector<std::string>* warnings) {
  if (target_p_const_w < 0.0 || target_p_static_w < 0.0)
    throw Error(ErrorKind::value,
                "target baseline powers are required and must be non-negative");

  EnergyTable table;
  table.p_const_w = target_p_const_w;
  table.p_static_w = target_p_static_w;
  table.grouping_fingerprint = source.grouping_fingerprint;
  table.architecture_label = source.architecture_label.empty()
                                 ? std::string{}
                                 : source.architecture_label + "-transferred";

  for (const auto& [key, energy] : known_target) {
    if (energy < 0.0)
      throw Error(ErrorKind::value, "measured target energy for '" + key + "' is negative");
    const auto [base, level] = split_qualified_key(key);
    EnergyEntry entry;
    entry.group_key = base;
    entry.memory_level = level;
    entry.energy_j_per_instruction = energy;
    entry.provenance = Provenance::direct;
    table.insert_entry(std::move(entry));
  }

  for (const auto& [key, source_entry] : source.entries) {
    if (known_target.count(key) > 0) continue;
    double transferred =
        map.slope * source_entry.energy_j_per_instruction + map.intercept;
    if (transferred < 0.0) {
      if (warnings != nullptr) {
        std::ostringstream msg;
        msg << "transferred energy for '" << key << "' clamped to 0 (was " << transferred
            << " J)";
        warnings->push_back(msg.str());
      }
      transferred = 0.0;
    }
    EnergyEntry entry;
    entry.group_key = source_entry.group_key;
    entry.memory_level = source_entry.memory_level;
    entry.energy_j_per_instruction = transferred;
    entry.provenance = Provenance::scaled;
    table.insert_entry(std::move(entry));
  }

  derive_all_scalings(table);
  return table;
}

}  // namespace wattbench
