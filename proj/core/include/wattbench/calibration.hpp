#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wattbench/energy_table.hpp"
#include "wattbench/errors.hpp"
#include "wattbench/profile.hpp"
#include "wattbench/trace.hpp"

namespace wattbench {

/// One calibration row: a microbenchmark's grouped instruction counts and its
/// measured dynamic energy.
struct MicrobenchmarkRecord {
  std::string name;
  std::map<std::string, double> grouped_counts;
  double dynamic_energy_j = 0.0;
  std::string primary_instruction;  // the benchmark's declared target
};

enum class SystemMode { square, overdetermined };

/// rows = microbenchmarks, columns = instruction groups, entries = counts.
struct CalibrationSystem {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> counts;  // row-major n_rows x n_cols
  std::vector<double> rhs;     // dynamic energy per row, joules
  std::vector<std::string> row_labels;
  std::vector<std::string> column_labels;

  double at(std::size_t row, std::size_t col) const { return counts[row * n_cols + col]; }
};

// Rows ordered by benchmark name, columns lexicographic by group key. In
// square mode the number of benchmarks must equal the number of distinct
// instruction groups. Instructions listed in required_instructions but absent
// from every record are a coverage error, as are all-zero columns.
CalibrationSystem build_system(const std::vector<MicrobenchmarkRecord>& records,
                               SystemMode mode,
                               const std::vector<std::string>& required_instructions = {});

struct NnlsOptions {
  double tol = 1e-10;      // KKT tolerance, relative to the normalized system
  int max_iterations = 0;  // 0 -> 3 * n_cols
};

struct SolveResult {
  std::map<std::string, double> energies;  // group key -> joules/instruction
  double residual_norm = 0.0;              // ||A x - b||_2, joules
  std::vector<double> per_row_residuals;   // (A x - b)_i per microbenchmark
  int iterations = 0;
};

/// Thrown when the active-set iteration cap is hit; carries the best iterate.
class SolverFailure : public Error {
 public:
  SolverFailure(const std::string& message, SolveResult best_result)
      : Error(ErrorKind::solver, message), best(std::move(best_result)) {}

  SolveResult best;
};

// Lawson-Hanson active-set NNLS: min ||A x - b||_2 s.t. x >= 0. Columns are
// normalized to unit 2-norm internally and energies rescaled on output.
// Deterministic: the most negative gradient enters first, index order breaks
// ties.
SolveResult solve_nnls(const CalibrationSystem& system, const NnlsOptions& options = {});

struct CalibrationManifest {
  struct Benchmark {
    std::string name;
    std::string trace_file;
    std::string opcode_counts_file;
    std::string metadata_file;
    std::string primary_instruction;
    std::optional<double> count_scale_factor;
    std::optional<MemoryLevel> memory_level;  // level of the primary instruction
  };

  std::string idle_trace;
  std::string active_idle_trace;
  std::string architecture_label;
  SystemMode mode = SystemMode::square;
  std::vector<Benchmark> benchmarks;

  static CalibrationManifest from_json(std::string_view text);
  // Relative paths are resolved against the manifest's directory.
  static CalibrationManifest from_json_file(const std::string& path);
};

struct CalibrateOptions {
  SteadyDetectionOptions steady{};
  NnlsOptions nnls{};
  std::optional<SystemMode> mode_override;
};

struct CalibrationResult {
  EnergyTable table;
  SolveResult solve;
  // benchmark name -> signed residual, aligned with the residual CSV
  std::vector<std::pair<std::string, double>> residuals_by_benchmark;
  std::vector<std::string> warnings;
};

// End-to-end training: traces -> steady windows -> integration ->
// decomposition, profiles -> grouping, then system assembly, NNLS, bucket
// averages, and scaling-factor derivation. Errors are tagged with the
// offending benchmark's name.
CalibrationResult calibrate(const CalibrationManifest& manifest, const GroupingRules& rules,
                            const BucketTaxonomy& taxonomy, const CalibrateOptions& options = {});

// CSV `benchmark,residual_j`.
std::string residuals_csv(const CalibrationResult& result);

}  // namespace wattbench
