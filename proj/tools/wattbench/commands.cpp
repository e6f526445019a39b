#include "commands.hpp"

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wattbench/calibration.hpp"
#include "wattbench/csv.hpp"
#include "wattbench/energy_table.hpp"
#include "wattbench/errors.hpp"
#include "wattbench/evaluation.hpp"
#include "wattbench/io.hpp"
#include "wattbench/log.hpp"
#include "wattbench/prediction.hpp"
#include "wattbench/profile.hpp"
#include "wattbench/synthetic.hpp"
#include "wattbench/trace.hpp"
#include "wattbench/transfer.hpp"

using nlohmann::json;

namespace wattbench::cli {

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return kExitUsage;
    case ErrorKind::solver:
    case ErrorKind::fit: return kExitSolver;
    default: return kExitData;
  }
}

// Single-line machine-parseable error record, always the last stderr line.
void emit_error_record(int code, std::string detail) {
  for (char& c : detail)
    if (c == '\n' || c == '\r') c = ' ';
  std::cerr << "error_code=" << code << " detail=" << detail << std::endl;
}

GroupingRules load_rules(const std::string& path) {
  if (path.empty()) return GroupingRules::defaults();
  return GroupingRules::from_json_file(path);
}

BucketTaxonomy load_taxonomy(const std::string& path) {
  if (path.empty()) return BucketTaxonomy::defaults();
  return BucketTaxonomy::from_json_file(path);
}

struct TrainArgs {
  std::string manifest_path;
  std::string out_path;
  std::string rules_path;
  std::string taxonomy_path;
  std::string residuals_path;
  std::string mode;
  std::string architecture;
  double tol = 1e-10;
  double min_window_ms = 5000.0;
  double cv_threshold = 0.02;
};

int cmd_train(const TrainArgs& args) {
  CalibrationManifest manifest = CalibrationManifest::from_json_file(args.manifest_path);
  const GroupingRules rules = load_rules(args.rules_path);
  const BucketTaxonomy taxonomy = load_taxonomy(args.taxonomy_path);

  CalibrateOptions options;
  options.nnls.tol = args.tol;
  options.steady.min_duration_ms = args.min_window_ms;
  options.steady.cv_threshold = args.cv_threshold;
  if (args.mode == "square") options.mode_override = SystemMode::square;
  else if (args.mode == "overdetermined") options.mode_override = SystemMode::overdetermined;
  else if (!args.mode.empty())
    throw Error(ErrorKind::usage, "unknown mode '" + args.mode + "'");
  if (!args.architecture.empty()) manifest.architecture_label = args.architecture;

  CalibrationResult result = calibrate(manifest, rules, taxonomy, options);
  for (const auto& warning : result.warnings) log_warn(warning);

  save_table_file(result.table, args.out_path);
  const std::string residuals_path =
      args.residuals_path.empty() ? args.out_path + ".residuals.csv" : args.residuals_path;
  write_file_atomic(residuals_path, residuals_csv(result));

  std::cout << "trained " << result.table.entries.size() << " instruction energies ("
            << result.solve.iterations << " solver iterations, residual "
            << csv::format_double(result.solve.residual_norm) << " J)\n"
            << "table: " << args.out_path << "\nresiduals: " << residuals_path << '\n';
  return kExitOk;
}

struct PredictArgs {
  std::string table_path;
  std::string profile_path;
  std::string metadata_path;
  std::string rules_path;
  std::string out_path;
  std::string mode = "pred";
};

int cmd_predict(const PredictArgs& args) {
  const EnergyTable table = load_table_file(args.table_path);
  const GroupingRules rules = load_rules(args.rules_path);
  const RawProfile raw =
      parse_instruction_profile_files(args.profile_path, args.metadata_path);
  const InstructionProfile profile = build_profile(raw, rules);
  for (const auto& warning : profile.warnings) log_warn(warning);

  const auto mode = prediction_mode_from_string(args.mode);
  if (!mode) throw Error(ErrorKind::usage, "mode must be 'direct' or 'pred'");

  const PredictionReport report = predict_energy(profile, table, *mode);
  write_file_atomic(args.out_path, report.to_json());
  std::cout << "predicted " << csv::format_double(report.total_j) << " J for '"
            << report.kernel_label << "' (coverage "
            << csv::format_double(100.0 * report.covered_instruction_fraction)
            << "%)\nreport: " << args.out_path << '\n';
  return kExitOk;
}

struct AttributeArgs {
  std::string report_path;
  std::string out_path;
  int top_k = 10;
};

int cmd_attribute(const AttributeArgs& args) {
  const PredictionReport report = PredictionReport::from_json_file(args.report_path);
  const Attribution attribution = attribute(report, args.top_k);
  std::cout << attribution.to_text();
  if (!args.out_path.empty()) {
    write_file_atomic(args.out_path, attribution.to_csv());
    std::cout << "csv: " << args.out_path << '\n';
  }
  return kExitOk;
}

struct EvaluateArgs {
  std::string input_path;
  std::string out_path;
};

int cmd_evaluate(const EvaluateArgs& args) {
  const std::vector<EvaluationRow> rows = load_evaluation_input(args.input_path);
  const std::string csv_text = evaluation_csv(rows);
  write_file_atomic(args.out_path, csv_text);
  std::cout << "MAPE," << csv::format_double(mape(rows)) << '\n'
            << "scored: " << args.out_path << '\n';
  return kExitOk;
}

struct TransferArgs {
  std::string source_path;
  std::string target_subset_path;
  std::string out_map_path;
  std::string out_table_path;
  std::string taxonomy_path;
  std::string architecture;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  double target_p_const = -1.0;
  double target_p_static = -1.0;
};

std::map<std::string, double> load_energy_map(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::format, std::string("target subset: invalid JSON: ") + e.what());
  }
  if (!doc.is_object())
    throw Error(ErrorKind::format, "target subset: expected an object of key -> joules");
  std::map<std::string, double> energies;
  for (auto it = doc.begin(); it != doc.end(); ++it)
    energies[it.key()] = it.value().get<double>();
  return energies;
}

int cmd_transfer(const TransferArgs& args) {
  const EnergyTable source = load_table_file(args.source_path);
  const std::map<std::string, double> subset = load_energy_map(args.target_subset_path);

  const TransferMap map = fit_transfer(source, subset, args.fraction, args.seed);
  write_file_atomic(args.out_map_path, map.to_json());
  std::cout << "fit: slope " << csv::format_double(map.slope) << ", intercept "
            << csv::format_double(map.intercept) << " J, R^2 "
            << csv::format_double(map.r_squared) << " over " << map.fitted_on.size()
            << " instructions\nmap: " << args.out_map_path << '\n';

  if (!args.out_table_path.empty()) {
    if (args.target_p_const < 0.0 || args.target_p_static < 0.0)
      throw Error(ErrorKind::value,
                  "--target-p-const and --target-p-static are required to emit a "
                  "transferred table (the target system's own baseline powers)");
    std::map<std::string, double> known;
    for (const auto& key : map.fitted_on) known[key] = subset.at(key);
    std::vector<std::string> warnings;
    EnergyTable table = apply_transfer(source, map, known, args.target_p_const,
                                       args.target_p_static, &warnings);
    for (const auto& warning : warnings) log_warn(warning);
    if (!args.architecture.empty()) table.architecture_label = args.architecture;
    const BucketTaxonomy taxonomy = args.taxonomy_path.empty()
                                        ? source.taxonomy
                                        : load_taxonomy(args.taxonomy_path);
    if (!taxonomy.empty()) table = assign_buckets(std::move(table), taxonomy);
    save_table_file(table, args.out_table_path);
    std::cout << "table: " << args.out_table_path << '\n';
  }
  return kExitOk;
}

struct SynthArgs {
  std::string spec_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& args) {
  SynthSpec spec;
  if (!args.spec_path.empty()) spec = SynthSpec::from_json_file(args.spec_path);
  if (args.seed) spec.seed = *args.seed;
  const GeneratedDataset dataset = generate(spec, args.out_dir);
  std::cout << "dataset: " << dataset.root_dir << "\nmanifest: " << dataset.manifest_file
            << "\nground truth: " << dataset.ground_truth_file << "\nbenchmarks: "
            << dataset.manifest.benchmarks.size() << ", apps: " << dataset.apps.size() << '\n';
  return kExitOk;
}

struct InspectArgs {
  std::string table_path;
};

int cmd_inspect(const InspectArgs& args) {
  const EnergyTable table = load_table_file(args.table_path);
  std::map<std::string, int> by_provenance;
  for (const auto& [key, entry] : table.entries)
    by_provenance[to_string(entry.provenance)] += 1;

  std::cout << "architecture: "
            << (table.architecture_label.empty() ? "(unlabeled)" : table.architecture_label)
            << '\n'
            << "p_const: " << csv::format_double(table.p_const_w)
            << " W, p_static: " << csv::format_double(table.p_static_w) << " W\n"
            << "entries: " << table.entries.size() << '\n';
  for (const auto& [provenance, count] : by_provenance)
    std::cout << "  " << provenance << ": " << count << '\n';
  if (!table.bucket_averages.empty()) {
    std::cout << "bucket averages (J/instruction):\n";
    for (const auto& [bucket, average] : table.bucket_averages)
      std::cout << "  " << bucket << ": " << csv::format_double(average) << '\n';
  }
  if (!table.scaling_factors.empty()) {
    std::cout << "scaling factors:\n";
    for (const auto& [key, factor] : table.scaling_factors)
      std::cout << "  " << key << ": " << csv::format_double(factor) << '\n';
  }
  char fingerprint[32];
  std::snprintf(fingerprint, sizeof(fingerprint), "%016llx",
                static_cast<unsigned long long>(table.grouping_fingerprint));
  std::cout << "grouping fingerprint: " << fingerprint << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"instruction-level GPU energy model: train, predict, attribute, transfer"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand(
      "train", "calibrate per-instruction energies from a microbenchmark manifest");
  train_cmd->add_option("--manifest", train.manifest_path, "calibration manifest JSON")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out_path, "energy table output path")->required();
  train_cmd->add_option("--rules", train.rules_path, "grouping rules JSON (default: built-in)")
      ->check(CLI::ExistingFile);
  train_cmd
      ->add_option("--taxonomy", train.taxonomy_path, "bucket taxonomy JSON (default: built-in)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--residuals", train.residuals_path,
                        "residual CSV path (default: <out>.residuals.csv)");
  train_cmd->add_option("--mode", train.mode, "square|overdetermined (default: manifest)");
  train_cmd->add_option("--tol", train.tol, "NNLS KKT tolerance");
  train_cmd->add_option("--min-window-ms", train.min_window_ms, "steady window minimum");
  train_cmd->add_option("--cv-threshold", train.cv_threshold, "steady window CV threshold");
  train_cmd->add_option("--arch", train.architecture, "architecture label override");

  PredictArgs predict;
  auto* predict_cmd =
      app.add_subcommand("predict", "predict a kernel's energy from its profile");
  predict_cmd->add_option("--table", predict.table_path, "trained energy table")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--profile", predict.profile_path, "opcode counts CSV")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--metadata", predict.metadata_path, "profile metadata JSON")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--rules", predict.rules_path, "grouping rules JSON")
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--mode", predict.mode, "direct|pred (default pred)");
  predict_cmd->add_option("--out", predict.out_path, "prediction report path")->required();

  AttributeArgs attribute_args;
  auto* attribute_cmd =
      app.add_subcommand("attribute", "rank a prediction report's energy consumers");
  attribute_cmd->add_option("--report", attribute_args.report_path, "prediction report JSON")
      ->required()
      ->check(CLI::ExistingFile);
  attribute_cmd->add_option("--top-k", attribute_args.top_k, "rows before aggregation");
  attribute_cmd->add_option("--out", attribute_args.out_path, "attribution CSV path");

  EvaluateArgs evaluate;
  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "score predictions against measured energies (MAPE)");
  evaluate_cmd
      ->add_option("--input", evaluate.input_path,
                   "CSV: workload,measured_j,prediction_report_file")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--out", evaluate.out_path, "scored CSV path")->required();

  TransferArgs transfer;
  auto* transfer_cmd =
      app.add_subcommand("transfer", "fit and apply an affine cross-system energy map");
  transfer_cmd->add_option("--source", transfer.source_path, "source energy table")
      ->required()
      ->check(CLI::ExistingFile);
  transfer_cmd
      ->add_option("--target-subset", transfer.target_subset_path,
                   "JSON map of group key -> measured target joules")
      ->required()
      ->check(CLI::ExistingFile);
  transfer_cmd->add_option("--fraction", transfer.fraction, "fraction of the subset to fit on");
  transfer_cmd->add_option("--seed", transfer.seed, "seed for the subset draw");
  transfer_cmd->add_option("--out-map", transfer.out_map_path, "transfer map path")->required();
  transfer_cmd->add_option("--out-table", transfer.out_table_path, "transferred table path");
  transfer_cmd->add_option("--target-p-const", transfer.target_p_const,
                           "target system constant power, watts");
  transfer_cmd->add_option("--target-p-static", transfer.target_p_static,
                           "target system static power, watts");
  transfer_cmd->add_option("--taxonomy", transfer.taxonomy_path, "bucket taxonomy for re-bucketing")
      ->check(CLI::ExistingFile);
  transfer_cmd->add_option("--arch", transfer.architecture, "target architecture label");

  SynthArgs synth;
  auto* synth_cmd =
      app.add_subcommand("synth", "generate a ground-truth-known synthetic dataset");
  synth_cmd->add_option("--spec", synth.spec_path, "synth spec JSON (default: built-in)")
      ->check(CLI::ExistingFile);
  synth_cmd->add_option("--out-dir", synth.out_dir, "dataset output directory")->required();
  std::uint64_t seed_value = 0;
  auto* seed_opt = synth_cmd->add_option("--seed", seed_value, "seed override");

  InspectArgs inspect;
  auto* inspect_cmd = app.add_subcommand("inspect", "summarize a trained energy table");
  inspect_cmd->add_option("--table", inspect.table_path, "energy table JSON")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    emit_error_record(kExitUsage, e.what());
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train);
    if (*predict_cmd) return cmd_predict(predict);
    if (*attribute_cmd) return cmd_attribute(attribute_args);
    if (*evaluate_cmd) return cmd_evaluate(evaluate);
    if (*transfer_cmd) return cmd_transfer(transfer);
    if (*synth_cmd) {
      if (seed_opt->count() > 0) synth.seed = seed_value;
      return cmd_synth(synth);
    }
    if (*inspect_cmd) return cmd_inspect(inspect);
    emit_error_record(kExitUsage, "no subcommand given");
    return kExitUsage;
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    emit_error_record(code, e.what());
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    emit_error_record(kExitData, e.what());
    return kExitData;
  }
}

}  // namespace wattbench::cli
