#include "wattbench/calibration.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wattbench/csv.hpp"
#include "wattbench/io.hpp"
#include "wattbench/log.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace wattbench {

namespace {

SystemMode mode_from_string(const std::string& text) {
  if (text == "square") return SystemMode::square;
  if (text == "overdetermined") return SystemMode::overdetermined;
  throw Error(ErrorKind::format, "unknown system mode '" + text + "'");
}

// Processing errors keep their kind but gain the benchmark's name.
template <typename Fn>
auto tagged(const std::string& benchmark, Fn&& fn) {
  try {
    return fn();
  } catch (const SolverFailure&) {
    throw;
  } catch (const Error& e) {
    throw Error(e.kind(), "benchmark '" + benchmark + "': " + e.what());
  }
}

}  // namespace

CalibrationSystem build_system(const std::vector<MicrobenchmarkRecord>& records,
                               SystemMode mode,
                               const std::vector<std::string>& required_instructions) {
  if (records.empty()) throw Error(ErrorKind::value, "no microbenchmark records");

  for (const auto& record : records) {
    if (record.dynamic_energy_j < 0.0)
      throw Error(ErrorKind::value,
                  "benchmark '" + record.name + "': negative dynamic energy");
    bool any_nonzero = false;
    for (const auto& [key, count] : record.grouped_counts) {
      if (count < 0.0)
        throw Error(ErrorKind::value,
                    "benchmark '" + record.name + "': negative count for '" + key + "'");
      if (count > 0.0) any_nonzero = true;
    }
    if (!any_nonzero)
      throw Error(ErrorKind::value, "benchmark '" + record.name + "': all counts are zero");
  }

  std::set<std::string> keys(required_instructions.begin(), required_instructions.end());
  for (const auto& record : records)
    for (const auto& [key, count] : record.grouped_counts) keys.insert(key);

  std::vector<const MicrobenchmarkRecord*> ordered;
  ordered.reserve(records.size());
  for (const auto& record : records) ordered.push_back(&record);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const MicrobenchmarkRecord* a, const MicrobenchmarkRecord* b) {
                     return a->name < b->name;
                   });

  CalibrationSystem system;
  system.n_rows = ordered.size();
  system.n_cols = keys.size();
  system.column_labels.assign(keys.begin(), keys.end());

  if (mode == SystemMode::square && system.n_rows != system.n_cols) {
    std::set<std::string> primaries;
    std::vector<std::string> duplicate_primaries;
    for (const auto* record : ordered)
      if (!primaries.insert(record->primary_instruction).second)
        duplicate_primaries.push_back(record->primary_instruction);
    std::ostringstream msg;
    msg << "square system needs benchmarks == instructions, got " << system.n_rows << " x "
        << system.n_cols;
    if (system.n_cols > system.n_rows) {
      msg << "; instructions without a dedicated benchmark:";
      for (const auto& key : system.column_labels)
        if (primaries.count(key) == 0) msg << " '" << key << "'";
    } else if (!duplicate_primaries.empty()) {
      msg << "; duplicate primary instruction '" << duplicate_primaries.front() << "'";
    }
    throw Error(ErrorKind::shape, msg.str());
  }
  if (mode == SystemMode::overdetermined && system.n_rows < system.n_cols)
    throw Error(ErrorKind::shape,
                "overdetermined system needs at least as many benchmarks as instructions");

  std::map<std::string, std::size_t> column_of;
  for (std::size_t j = 0; j < system.column_labels.size(); ++j)
    column_of[system.column_labels[j]] = j;

  system.counts.assign(system.n_rows * system.n_cols, 0.0);
  system.rhs.resize(system.n_rows);
  system.row_labels.resize(system.n_rows);
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const auto& record = *ordered[i];
    system.row_labels[i] = record.name;
    system.rhs[i] = record.dynamic_energy_j;
    for (const auto& [key, count] : record.grouped_counts)
      system.counts[i * system.n_cols + column_of[key]] = count;
  }

  for (std::size_t j = 0; j < system.n_cols; ++j) {
    bool nonzero = false;
    for (std::size_t i = 0; i < system.n_rows && !nonzero; ++i)
      nonzero = system.at(i, j) > 0.0;
    if (!nonzero)
      throw Error(ErrorKind::coverage, "instruction '" + system.column_labels[j] +
                                           "' has no counts in any microbenchmark");
  }
  return system;
}

CalibrationManifest CalibrationManifest::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::format, std::string("calibration manifest: invalid JSON: ") + e.what());
  }
  if (!doc.is_object())
    throw Error(ErrorKind::format, "calibration manifest: top level must be an object");
  for (const char* key : {"idle_trace", "active_idle_trace", "benchmarks"})
    if (!doc.contains(key))
      throw Error(ErrorKind::format,
                  std::string("calibration manifest: missing '") + key + "'");

  CalibrationManifest manifest;
  manifest.idle_trace = doc.at("idle_trace").get<std::string>();
  manifest.active_idle_trace = doc.at("active_idle_trace").get<std::string>();
  manifest.architecture_label = doc.value("architecture_label", std::string{});
  if (doc.contains("mode")) manifest.mode = mode_from_string(doc.at("mode").get<std::string>());

  for (const auto& item : doc.at("benchmarks")) {
    Benchmark bench;
    for (const char* key :
         {"name", "trace_file", "opcode_counts_file", "metadata_file", "primary_instruction"})
      if (!item.contains(key))
        throw Error(ErrorKind::format,
                    std::string("calibration manifest: benchmark missing '") + key + "'");
    bench.name = item.at("name").get<std::string>();
    bench.trace_file = item.at("trace_file").get<std::string>();
    bench.opcode_counts_file = item.at("opcode_counts_file").get<std::string>();
    bench.metadata_file = item.at("metadata_file").get<std::string>();
    bench.primary_instruction = item.at("primary_instruction").get<std::string>();
    if (item.contains("count_scale_factor")) {
      bench.count_scale_factor = item.at("count_scale_factor").get<double>();
      if (*bench.count_scale_factor <= 0.0)
        throw Error(ErrorKind::value, "calibration manifest: benchmark '" + bench.name +
                                          "': count_scale_factor must be positive");
    }
    if (item.contains("memory_level")) {
      const auto level = memory_level_from_string(item.at("memory_level").get<std::string>());
      if (!level)
        throw Error(ErrorKind::format, "calibration manifest: benchmark '" + bench.name +
                                           "': bad memory_level");
      bench.memory_level = level;
    }
    manifest.benchmarks.push_back(std::move(bench));
  }
  if (manifest.benchmarks.empty())
    throw Error(ErrorKind::format, "calibration manifest: no benchmarks listed");
  return manifest;
}

CalibrationManifest CalibrationManifest::from_json_file(const std::string& path) {
  CalibrationManifest manifest = from_json(read_file(path));
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&base](std::string& file) {
    if (!file.empty() && fs::path(file).is_relative()) file = (base / file).string();
  };
  resolve(manifest.idle_trace);
  resolve(manifest.active_idle_trace);
  for (auto& bench : manifest.benchmarks) {
    resolve(bench.trace_file);
    resolve(bench.opcode_counts_file);
    resolve(bench.metadata_file);
  }
  return manifest;
}

CalibrationResult calibrate(const CalibrationManifest& manifest, const GroupingRules& rules,
                            const BucketTaxonomy& taxonomy, const CalibrateOptions& options) {
  CalibrationResult result;

  const PowerTrace idle = parse_power_trace_file(manifest.idle_trace);
  const double p_const = estimate_idle_power(idle);
  const PowerTrace active_idle = parse_power_trace_file(manifest.active_idle_trace);
  const double p_static = estimate_static_power(active_idle, p_const);
  log_info("baseline powers: p_const=" + std::to_string(p_const) +
           " W, p_static=" + std::to_string(p_static) + " W");

  std::vector<MicrobenchmarkRecord> records;
  records.reserve(manifest.benchmarks.size());
  for (const auto& bench : manifest.benchmarks) {
    records.push_back(tagged(bench.name, [&]() -> MicrobenchmarkRecord {
      const PowerTrace trace = parse_power_trace_file(bench.trace_file);
      const SteadyWindow window = detect_steady_window(trace, options.steady);
      const double window_s = (window.end_ms - window.start_ms) / 1000.0;
      const double window_energy_j = integrate_energy(trace, window);
      const EnergyComponents components =
          decompose_energy(window_energy_j, p_const, p_static, window_s);
      if (components.clamped_negative_j) {
        result.warnings.push_back("benchmark '" + bench.name +
                                  "': dynamic energy clamped to 0 (was -" +
                                  std::to_string(*components.clamped_negative_j) + " J)");
      }

      RawProfile raw =
          parse_instruction_profile_files(bench.opcode_counts_file, bench.metadata_file);
      if (bench.count_scale_factor) raw.count_scale_factor = bench.count_scale_factor;
      InstructionProfile profile = build_profile(raw, rules);
      for (const auto& warning : profile.warnings)
        result.warnings.push_back("benchmark '" + bench.name + "': " + warning);

      // The steady window gives the dynamic power; the profiled counts cover
      // the full run, so dynamic energy is rescaled to the run duration.
      const double dynamic_energy_j =
          components.dynamic_j * (profile.t_exec_s / window_s);

      MicrobenchmarkRecord record;
      record.name = bench.name;
      record.dynamic_energy_j = dynamic_energy_j;
      record.primary_instruction =
          make_qualified_key(bench.primary_instruction, bench.memory_level);
      record.grouped_counts = std::move(profile.grouped_counts);
      if (bench.memory_level) {
        // A benchmark that pins its primary instruction to one hierarchy
        // level contributes that count under the level-qualified key.
        auto it = record.grouped_counts.find(bench.primary_instruction);
        if (it == record.grouped_counts.end())
          throw Error(ErrorKind::coverage, "primary instruction '" +
                                               bench.primary_instruction +
                                               "' not present in profile");
        const double count = it->second;
        record.grouped_counts.erase(it);
        record.grouped_counts[record.primary_instruction] += count;
      } else if (record.grouped_counts.count(bench.primary_instruction) == 0) {
        throw Error(ErrorKind::coverage, "primary instruction '" + bench.primary_instruction +
                                             "' not present in profile");
      }
      return record;
    }));
  }

  const SystemMode mode = options.mode_override.value_or(manifest.mode);
  const CalibrationSystem system = build_system(records, mode);
  result.solve = solve_nnls(system, options.nnls);

  std::set<std::string> primaries;
  for (const auto& record : records) primaries.insert(record.primary_instruction);

  EnergyTable table;
  table.p_const_w = p_const;
  table.p_static_w = p_static;
  table.architecture_label = manifest.architecture_label;
  table.grouping_fingerprint = rules.fingerprint();
  for (const auto& [key, energy] : result.solve.energies) {
    const auto [base, level] = split_qualified_key(key);
    EnergyEntry entry;
    entry.group_key = base;
    entry.memory_level = level;
    entry.energy_j_per_instruction = energy;
    entry.provenance = primaries.count(key) > 0 ? Provenance::direct : Provenance::solved;
    table.insert_entry(std::move(entry));
  }
  table.warnings = result.warnings;
  table = assign_buckets(std::move(table), taxonomy);
  derive_all_scalings(table);

  for (std::size_t i = 0; i < system.n_rows; ++i)
    result.residuals_by_benchmark.emplace_back(system.row_labels[i],
                                               result.solve.per_row_residuals[i]);
  result.warnings = table.warnings;
  result.table = std::move(table);
  return result;
}

std::string residuals_csv(const CalibrationResult& result) {
  std::ostringstream out;
  out << "benchmark,residual_j\n";
  for (const auto& [name, residual] : result.residuals_by_benchmark)
    out << name << ',' << csv::format_double(residual) << '\n';
  return out.str();
}

}  // namespace wattbench
