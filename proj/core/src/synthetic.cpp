#include "wattbench/synthetic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wattbench/csv.hpp"
#include "wattbench/errors.hpp"
#include "wattbench/io.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace wattbench {

namespace {

std::string zero_padded(const char* prefix, int index, int width) {
  std::string text = std::to_string(index);
  if (static_cast<int>(text.size()) < width)
    text.insert(0, static_cast<std::size_t>(width) - text.size(), '0');
  return prefix + text;
}

std::string instruction_name(int index, int width) {
  return zero_padded("SOP_", index, width);
}

long long uniform_int(std::mt19937_64& rng, long long lo, long long hi) {
  // Modulo draw: biased in principle, but stable across standard libraries,
  // which matters more for reproducible datasets.
  return lo + static_cast<long long>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + unit * (hi - lo);
}

// Box-Muller from two uniform draws; avoids std::normal_distribution's
// unspecified state handling.
double gaussian(std::mt19937_64& rng) {
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform_real(rng, 0.0, 1.0);
  const double u2 = uniform_real(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

struct TraceShape {
  double warmup_s = 0.0;
  double steady_s = 0.0;
  double sample_period_ms = 100.0;
  long long start_mw = 0;   // power at t = 0
  long long steady_mw = 0;  // plateau power
  double noise_pct = 0.0;
  bool active = false;  // drives the utilization column
};

std::string render_trace_csv(const TraceShape& shape, std::mt19937_64& rng) {
  std::ostringstream out;
  out << "timestamp_ms,power_mw,utilization_pct\n";
  const double warmup_ms = shape.warmup_s * 1000.0;
  const double total_ms = warmup_ms + shape.steady_s * 1000.0;
  for (double t = 0.0; t <= total_ms + 1e-9; t += shape.sample_period_ms) {
    double power_mw;
    int utilization;
    if (t < warmup_ms) {
      const double f = t / warmup_ms;
      power_mw = static_cast<double>(shape.start_mw) +
                 f * static_cast<double>(shape.steady_mw - shape.start_mw);
      utilization = shape.active ? static_cast<int>(std::lround(f * 100.0)) : 0;
    } else {
      power_mw = static_cast<double>(shape.steady_mw);
      utilization = shape.active ? 100 : 0;
    }
    if (shape.noise_pct > 0.0) {
      power_mw *= 1.0 + shape.noise_pct / 100.0 * gaussian(rng);
      if (power_mw < 0.0) power_mw = 0.0;
    }
    out << csv::format_double(t) << ',' << std::llround(power_mw) << ',' << utilization
        << '\n';
  }
  return out.str();
}

std::string opcode_csv(const std::map<std::string, double>& counts) {
  std::ostringstream out;
  out << "opcode,count\n";
  for (const auto& [opcode, count] : counts)
    out << opcode << ',' << csv::format_double(count) << '\n';
  return out.str();
}

void validate(const SynthSpec& spec) {
  if (spec.n_instructions < 1)
    throw Error(ErrorKind::value, "synth spec: n_instructions must be >= 1");
  if (spec.n_benchmarks != 0 && spec.n_benchmarks < spec.n_instructions)
    throw Error(ErrorKind::value, "synth spec: n_benchmarks must be >= n_instructions");
  if (spec.n_apps < 0) throw Error(ErrorKind::value, "synth spec: n_apps must be >= 0");
  if (spec.energy_min_j <= 0.0 || spec.energy_max_j < spec.energy_min_j)
    throw Error(ErrorKind::value, "synth spec: energy range must be positive and ordered");
  if (spec.p_const_w < 0.0 || spec.p_static_w < 0.0)
    throw Error(ErrorKind::value, "synth spec: baseline powers must be non-negative");
  if (spec.trace_noise_pct < 0.0)
    throw Error(ErrorKind::value, "synth spec: trace_noise_pct must be >= 0");
  if (spec.steady_s <= 0.0) throw Error(ErrorKind::value, "synth spec: steady_s must be > 0");
  if (spec.warmup_s < 0.0) throw Error(ErrorKind::value, "synth spec: warmup_s must be >= 0");
  if (spec.steady_s <= spec.warmup_s)
    throw Error(ErrorKind::value,
                "synth spec: steady_s must exceed warmup_s so medians land on the plateau");
  if (spec.sample_period_ms <= 0.0)
    throw Error(ErrorKind::value, "synth spec: sample_period_ms must be > 0");
  if (spec.primary_fraction <= 0.0 || spec.primary_fraction > 1.0)
    throw Error(ErrorKind::value, "synth spec: primary_fraction must be in (0,1]");
  if (spec.count_rate_min < 1.0 || spec.count_rate_max < spec.count_rate_min)
    throw Error(ErrorKind::value, "synth spec: count rate range must be ordered and >= 1");
}

}  // namespace

SynthSpec SynthSpec::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::format, std::string("synth spec: invalid JSON: ") + e.what());
  }
  SynthSpec spec;
  spec.n_instructions = doc.value("n_instructions", spec.n_instructions);
  spec.n_benchmarks = doc.value("n_benchmarks", spec.n_benchmarks);
  spec.n_apps = doc.value("n_apps", spec.n_apps);
  if (doc.contains("energy_range_j")) {
    const auto& range = doc.at("energy_range_j");
    if (!range.is_array() || range.size() != 2)
      throw Error(ErrorKind::format, "synth spec: energy_range_j must be [min, max]");
    spec.energy_min_j = range[0].get<double>();
    spec.energy_max_j = range[1].get<double>();
  }
  spec.p_const_w = doc.value("p_const_w", spec.p_const_w);
  spec.p_static_w = doc.value("p_static_w", spec.p_static_w);
  spec.trace_noise_pct = doc.value("trace_noise_pct", spec.trace_noise_pct);
  spec.warmup_s = doc.value("warmup_s", spec.warmup_s);
  spec.steady_s = doc.value("steady_s", spec.steady_s);
  spec.sample_period_ms = doc.value("sample_period_ms", spec.sample_period_ms);
  spec.seed = doc.value("seed", spec.seed);
  spec.primary_fraction = doc.value("primary_fraction", spec.primary_fraction);
  if (doc.contains("count_rate_range")) {
    const auto& range = doc.at("count_rate_range");
    if (!range.is_array() || range.size() != 2)
      throw Error(ErrorKind::format, "synth spec: count_rate_range must be [min, max]");
    spec.count_rate_min = range[0].get<double>();
    spec.count_rate_max = range[1].get<double>();
  }
  validate(spec);
  return spec;
}

SynthSpec SynthSpec::from_json_file(const std::string& path) {
  return from_json(read_file(path));
}

std::string SynthSpec::to_json() const {
  json doc;
  doc["n_instructions"] = n_instructions;
  doc["n_benchmarks"] = n_benchmarks;
  doc["n_apps"] = n_apps;
  doc["energy_range_j"] = {energy_min_j, energy_max_j};
  doc["p_const_w"] = p_const_w;
  doc["p_static_w"] = p_static_w;
  doc["trace_noise_pct"] = trace_noise_pct;
  doc["warmup_s"] = warmup_s;
  doc["steady_s"] = steady_s;
  doc["sample_period_ms"] = sample_period_ms;
  doc["seed"] = seed;
  doc["primary_fraction"] = primary_fraction;
  doc["count_rate_range"] = {count_rate_min, count_rate_max};
  return doc.dump(2) + "\n";
}

GeneratedDataset generate(const SynthSpec& spec, const std::string& output_dir) {
  validate(spec);
  const int n = spec.n_instructions;
  const int nb = spec.n_benchmarks == 0 ? n : spec.n_benchmarks;
  const int name_width = std::max(2, static_cast<int>(std::to_string(std::max(n, nb) - 1).size()));

  std::mt19937_64 rng(spec.seed);

  // Planted energies on a 1 nJ grid.
  const long long m_min = std::max(1ll, std::llround(spec.energy_min_j / 1e-9));
  const long long m_max = std::llround(spec.energy_max_j / 1e-9);
  if (m_max < m_min)
    throw Error(ErrorKind::generation,
                "energy range is below the 1 nJ grid the generator uses");
  std::vector<long long> energy_nj(n);
  std::vector<std::string> names(n);
  for (int i = 0; i < n; ++i) {
    names[i] = instruction_name(i, name_width);
    energy_nj[i] = uniform_int(rng, m_min, m_max);
  }

  // Counts are issue-rate (M/s) times steady seconds; with 1 nJ energies the
  // plateau dynamic power is then sum(rate * nJ) — an exact milliwatt count.
  const long long steady_us = std::llround(spec.steady_s * 1e6);
  const long long rate_min = std::max(1ll, std::llround(spec.count_rate_min));
  const long long rate_max = std::llround(spec.count_rate_max);

  struct BenchDraw {
    std::vector<std::pair<int, long long>> rates;  // instruction -> M/s
    long long dynamic_mw = 0;
  };
  std::vector<BenchDraw> draws(nb);

  const int max_redraws = 100;
  bool nonsingular = false;
  for (int attempt = 0; attempt < max_redraws && !nonsingular; ++attempt) {
    for (int b = 0; b < nb; ++b) {
      BenchDraw draw;
      const int primary = b % n;
      const long long primary_rate = uniform_int(rng, rate_min, rate_max);
      draw.rates.emplace_back(primary, primary_rate);

      if (spec.primary_fraction < 1.0 && n > 1) {
        const long long ancillary_total = std::llround(
            static_cast<double>(primary_rate) * (1.0 - spec.primary_fraction) /
            spec.primary_fraction);
        int n_ancillary = std::min<int>(4, n - 1);
        if (ancillary_total < n_ancillary) n_ancillary = static_cast<int>(ancillary_total);
        if (n_ancillary > 0) {
          std::vector<int> others;
          others.reserve(n - 1);
          for (int i = 0; i < n; ++i)
            if (i != primary) others.push_back(i);
          for (std::size_t i = others.size() - 1; i > 0; --i)
            std::swap(others[i], others[static_cast<std::size_t>(
                                     uniform_int(rng, 0, static_cast<long long>(i)))]);
          const long long base = ancillary_total / n_ancillary;
          for (int k = 0; k < n_ancillary; ++k) {
            const long long jitter = base >= 5 ? uniform_int(rng, -base / 5, base / 5) : 0;
            draw.rates.emplace_back(others[k], std::max(1ll, base + jitter));
          }
        }
      }
      for (const auto& [instr, rate] : draw.rates) draw.dynamic_mw += rate * energy_nj[instr];
      draws[b] = std::move(draw);
    }

    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(nb, n);
    for (int b = 0; b < nb; ++b)
      for (const auto& [instr, rate] : draws[b].rates)
        counts(b, instr) += static_cast<double>(rate) * static_cast<double>(steady_us);
    nonsingular = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(counts).rank() == n;
  }
  if (!nonsingular)
    throw Error(ErrorKind::generation,
                "generated count matrix stayed singular after 100 redraws; raise "
                "primary_fraction");

  // Lay the dataset down.
  const fs::path root(output_dir);
  std::error_code ec;
  fs::create_directories(root / "benchmarks", ec);
  fs::create_directories(root / "apps", ec);
  if (ec) throw Error(ErrorKind::io, "cannot create dataset directories under " + output_dir);

  const long long p_const_mw = std::llround(spec.p_const_w * 1000.0);
  const long long p_static_mw = std::llround(spec.p_static_w * 1000.0);

  auto write = [&](const fs::path& path, const std::string& content) {
    write_file_atomic(path.string(), content);
  };

  {
    TraceShape idle;
    idle.warmup_s = 0.0;
    idle.steady_s = spec.steady_s;
    idle.sample_period_ms = spec.sample_period_ms;
    idle.start_mw = idle.steady_mw = p_const_mw;
    idle.noise_pct = spec.trace_noise_pct;
    idle.active = false;
    write(root / "idle.csv", render_trace_csv(idle, rng));

    TraceShape active_idle = idle;
    active_idle.warmup_s = spec.warmup_s;
    active_idle.steady_mw = p_const_mw + p_static_mw;
    active_idle.active = true;
    write(root / "active_idle.csv", render_trace_csv(active_idle, rng));
  }

  GeneratedDataset dataset;
  dataset.root_dir = root.string();
  dataset.manifest.idle_trace = (root / "idle.csv").string();
  dataset.manifest.active_idle_trace = (root / "active_idle.csv").string();
  dataset.manifest.architecture_label = "synthetic";
  dataset.manifest.mode = nb == n ? SystemMode::square : SystemMode::overdetermined;

  json manifest_json;
  manifest_json["idle_trace"] = "idle.csv";
  manifest_json["active_idle_trace"] = "active_idle.csv";
  manifest_json["architecture_label"] = "synthetic";
  manifest_json["mode"] = nb == n ? "square" : "overdetermined";
  manifest_json["benchmarks"] = json::array();

  for (int b = 0; b < nb; ++b) {
    const std::string bench_name = zero_padded("bench_", b, name_width);
    const std::string trace_rel = "benchmarks/" + bench_name + ".trace.csv";
    const std::string counts_rel = "benchmarks/" + bench_name + ".opcodes.csv";
    const std::string meta_rel = "benchmarks/" + bench_name + ".meta.json";

    TraceShape shape;
    shape.warmup_s = spec.warmup_s;
    shape.steady_s = spec.steady_s;
    shape.sample_period_ms = spec.sample_period_ms;
    shape.start_mw = p_const_mw;
    shape.steady_mw = p_const_mw + p_static_mw + draws[b].dynamic_mw;
    shape.noise_pct = spec.trace_noise_pct;
    shape.active = true;
    write(root / trace_rel, render_trace_csv(shape, rng));

    // Every third benchmark exercises the short-profiling-run path: the CSV
    // holds scaled-down counts and the metadata carries the factor.
    const bool scaled = (b % 3 == 2) && steady_us % 10 == 0;
    std::map<std::string, double> file_counts;
    for (const auto& [instr, rate] : draws[b].rates) {
      const double count = static_cast<double>(rate) * static_cast<double>(steady_us);
      file_counts[names[instr]] += scaled ? count / 10.0 : count;
    }
    write(root / counts_rel, opcode_csv(file_counts));

    json meta;
    meta["kernel_label"] = bench_name;
    meta["t_exec_s"] = spec.steady_s;
    if (scaled) meta["count_scale_factor"] = 10.0;
    write(root / meta_rel, meta.dump(2) + "\n");

    CalibrationManifest::Benchmark bench;
    bench.name = bench_name;
    bench.trace_file = (root / trace_rel).string();
    bench.opcode_counts_file = (root / counts_rel).string();
    bench.metadata_file = (root / meta_rel).string();
    bench.primary_instruction = names[b % n];
    dataset.manifest.benchmarks.push_back(bench);

    json bench_json;
    bench_json["name"] = bench_name;
    bench_json["trace_file"] = trace_rel;
    bench_json["opcode_counts_file"] = counts_rel;
    bench_json["metadata_file"] = meta_rel;
    bench_json["primary_instruction"] = names[b % n];
    manifest_json["benchmarks"].push_back(std::move(bench_json));
  }

  // Planted table.
  dataset.truth.p_const_w = spec.p_const_w;
  dataset.truth.p_static_w = spec.p_static_w;
  dataset.truth.architecture_label = "synthetic";
  dataset.truth.grouping_fingerprint = GroupingRules::defaults().fingerprint();
  for (int i = 0; i < n; ++i) {
    EnergyEntry entry;
    entry.group_key = names[i];
    entry.energy_j_per_instruction = static_cast<double>(energy_nj[i]) * 1e-9;
    entry.provenance = Provenance::direct;
    dataset.truth.insert_entry(std::move(entry));
  }

  // Application profiles: arbitrary mixes over the planted instructions.
  json apps_json = json::array();
  for (int a = 0; a < spec.n_apps; ++a) {
    const std::string app_name = zero_padded("app_", a, name_width);
    const std::string counts_rel = "apps/" + app_name + ".opcodes.csv";
    const std::string meta_rel = "apps/" + app_name + ".meta.json";

    const int k = static_cast<int>(
        uniform_int(rng, std::min<long long>(5, n), static_cast<long long>(n)));
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<std::size_t>(
                              uniform_int(rng, 0, static_cast<long long>(i)))]);

    SyntheticApp app;
    app.profile.kernel_label = app_name;
    app.profile.t_exec_s = uniform_real(rng, 1.0, 20.0);
    app.profile.l1_load_hit_rate = uniform_real(rng, 0.0, 1.0);
    app.profile.l2_hit_rate = uniform_real(rng, 0.0, 1.0);
    app.profile.grouping_fingerprint = dataset.truth.grouping_fingerprint;
    for (int i = 0; i < k; ++i) {
      const double count = static_cast<double>(uniform_int(rng, 1000000ll, 1000000000ll));
      app.profile.grouped_counts[names[order[static_cast<std::size_t>(i)]]] = count;
    }
    app.true_energy_j = true_energy(app.profile, dataset.truth);
    app.opcode_counts_file = (root / counts_rel).string();
    app.metadata_file = (root / meta_rel).string();

    write(root / counts_rel, opcode_csv(app.profile.grouped_counts));
    json meta;
    meta["kernel_label"] = app_name;
    meta["t_exec_s"] = app.profile.t_exec_s;
    meta["l1_load_hit_rate"] = *app.profile.l1_load_hit_rate;
    meta["l2_hit_rate"] = *app.profile.l2_hit_rate;
    write(root / meta_rel, meta.dump(2) + "\n");

    json app_json;
    app_json["kernel_label"] = app_name;
    app_json["opcode_counts_file"] = counts_rel;
    app_json["metadata_file"] = meta_rel;
    app_json["true_energy_j"] = app.true_energy_j;
    apps_json.push_back(std::move(app_json));
    dataset.apps.push_back(std::move(app));
  }

  write(root / "manifest.json", manifest_json.dump(2) + "\n");
  json truth_json;
  truth_json["table"] = json::parse(save_table(dataset.truth));
  truth_json["apps"] = std::move(apps_json);
  write(root / "ground_truth.json", truth_json.dump(2) + "\n");

  dataset.manifest_file = (root / "manifest.json").string();
  dataset.ground_truth_file = (root / "ground_truth.json").string();
  return dataset;
}

double true_energy(const InstructionProfile& profile, const EnergyTable& truth) {
  if (profile.t_exec_s <= 0.0)
    throw Error(ErrorKind::value, "profile t_exec_s must be positive");
  double energy = (truth.p_const_w + truth.p_static_w) * profile.t_exec_s;
  for (const auto& [key, count] : profile.grouped_counts) {
    const auto it = truth.entries.find(key);
    if (it == truth.entries.end())
      throw Error(ErrorKind::coverage,
                  "instruction '" + key + "' not present in the ground-truth table");
    energy += count * it->second.energy_j_per_instruction;
  }
  return energy;
}

}  // namespace wattbench
