#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "wattbench/calibration.hpp"
#include "wattbench/energy_table.hpp"
#include "wattbench/profile.hpp"

namespace wattbench {

/// Recipe for a ground-truth-known synthetic dataset.
struct SynthSpec {
  int n_instructions = 20;
  int n_benchmarks = 0;  // 0 -> n_instructions (square system)
  int n_apps = 5;
  // Planted energies are drawn on a 1 nJ grid inside this range, which keeps
  // every generated steady power an exact integer in milliwatts.
  double energy_min_j = 1e-9;
  double energy_max_j = 5e-8;
  double p_const_w = 40.0;
  double p_static_w = 40.0;
  double trace_noise_pct = 0.0;  // multiplicative gaussian, percent
  double warmup_s = 5.0;
  double steady_s = 30.0;
  double sample_period_ms = 100.0;
  std::uint64_t seed = 1;
  double primary_fraction = 0.6;  // share of a benchmark's counts on its target
  // Per-instruction issue rates in millions per second; counts are
  // rate * steady_s * 1e6.
  double count_rate_min = 50.0;
  double count_rate_max = 300.0;

  static SynthSpec from_json(std::string_view text);
  static SynthSpec from_json_file(const std::string& path);
  std::string to_json() const;
};

struct SyntheticApp {
  InstructionProfile profile;
  std::string opcode_counts_file;
  std::string metadata_file;
  double true_energy_j = 0.0;
};

struct GeneratedDataset {
  std::string root_dir;
  std::string manifest_file;
  std::string ground_truth_file;
  EnergyTable truth;  // the planted table
  CalibrationManifest manifest;
  std::vector<SyntheticApp> apps;
};

// Writes a complete calibration dataset (idle/active-idle/benchmark traces,
// opcode counts, metadata, manifest) plus application profiles and a
// ground_truth.json. Same seed, same bytes.
GeneratedDataset generate(const SynthSpec& spec, const std::string& output_dir);

// Reference energy: baseline powers times execution time plus counts times
// planted energies. Total over the oracle's own outputs; unknown keys throw.
double true_energy(const InstructionProfile& profile, const EnergyTable& truth);

}  // namespace wattbench
