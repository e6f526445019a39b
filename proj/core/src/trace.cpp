#include "wattbench/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

#include "wattbench/csv.hpp"
#include "wattbench/errors.hpp"

namespace wattbench {

namespace {

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Power at an arbitrary time inside the trace, linear between samples.
double power_at(const std::vector<PowerSample>& s, double t_ms) {
  auto it = std::lower_bound(s.begin(), s.end(), t_ms,
                             [](const PowerSample& a, double t) { return a.timestamp_ms < t; });
  if (it == s.begin()) return it->power_w;
  if (it == s.end()) return s.back().power_w;
  if (it->timestamp_ms == t_ms) return it->power_w;
  const PowerSample& hi = *it;
  const PowerSample& lo = *(it - 1);
  const double f = (t_ms - lo.timestamp_ms) / (hi.timestamp_ms - lo.timestamp_ms);
  return lo.power_w + f * (hi.power_w - lo.power_w);
}

}  // namespace

double PowerTrace::duration_ms() const {
  if (samples.size() < 2) return 0.0;
  return samples.back().timestamp_ms - samples.front().timestamp_ms;
}

PowerTrace parse_power_trace(std::istream& in, std::string session_label) {
  const std::string what = "power trace";
  csv::Table table = csv::read_table(in, what);

  const auto& header = table.header;
  if (header.empty() || header[0] != "timestamp_ms")
    throw Error(ErrorKind::format, what + ": missing column 'timestamp_ms'");
  if (header.size() < 2 || header[1] != "power_mw")
    throw Error(ErrorKind::format, what + ": missing column 'power_mw'");
  bool has_utilization = false;
  if (header.size() >= 3) {
    if (header[2] != "utilization_pct")
      throw Error(ErrorKind::format, what + ": unexpected third column '" + header[2] +
                                         "', expected 'utilization_pct'");
    has_utilization = true;
  }
  if (header.size() > 3)
    throw Error(ErrorKind::format, what + ": too many columns in header");

  PowerTrace trace;
  trace.session_label = std::move(session_label);
  trace.samples.reserve(table.rows.size());

  for (const auto& row : table.rows) {
    if (row.cells.size() < 2)
      throw Error(ErrorKind::format,
                  what + ": too few cells at line " + std::to_string(row.line_number));
    PowerSample sample;
    sample.timestamp_ms = csv::parse_double(row.cells[0], row.line_number, what);
    if (sample.timestamp_ms < 0.0)
      throw Error(ErrorKind::value, what + ": negative timestamp at line " +
                                        std::to_string(row.line_number));
    const double power_mw = csv::parse_double(row.cells[1], row.line_number, what);
    if (power_mw < 0.0)
      throw Error(ErrorKind::value,
                  what + ": negative power at line " + std::to_string(row.line_number));
    sample.power_w = power_mw / 1000.0;
    if (has_utilization && row.cells.size() >= 3 && !row.cells[2].empty()) {
      const double util = csv::parse_double(row.cells[2], row.line_number, what);
      if (util < 0.0 || util > 100.0)
        throw Error(ErrorKind::value, what + ": utilization outside [0,100] at line " +
                                          std::to_string(row.line_number));
      sample.utilization_pct = util;
    }
    trace.samples.push_back(sample);
  }

  if (!std::is_sorted(trace.samples.begin(), trace.samples.end(),
                      [](const PowerSample& a, const PowerSample& b) {
                        return a.timestamp_ms < b.timestamp_ms;
                      })) {
    std::stable_sort(trace.samples.begin(), trace.samples.end(),
                     [](const PowerSample& a, const PowerSample& b) {
                       return a.timestamp_ms < b.timestamp_ms;
                     });
    trace.warnings.push_back("rows out of order; sorted by timestamp");
  }

  // Collapse duplicate timestamps, keeping the sample that appeared last.
  std::size_t collapsed = 0;
  std::vector<PowerSample> unique;
  unique.reserve(trace.samples.size());
  for (const auto& sample : trace.samples) {
    if (!unique.empty() && unique.back().timestamp_ms == sample.timestamp_ms) {
      unique.back() = sample;
      ++collapsed;
    } else {
      unique.push_back(sample);
    }
  }
  if (collapsed > 0) {
    trace.warnings.push_back(std::to_string(collapsed) +
                             " duplicate timestamp(s) collapsed, keeping the last sample");
  }
  trace.samples = std::move(unique);
  return trace;
}

PowerTrace parse_power_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open trace file: " + path);
  PowerTrace trace = parse_power_trace(in, path);
  return trace;
}

SteadyWindow detect_steady_window(const PowerTrace& trace, const SteadyDetectionOptions& opts) {
  const auto& s = trace.samples;
  const std::size_t n = s.size();
  if (n < 2 || trace.duration_ms() < opts.min_duration_ms)
    throw Error(ErrorKind::insufficient_data,
                "trace shorter than min_duration_ms (" + std::to_string(opts.min_duration_ms) +
                    " ms) for steady-state detection");
  if (opts.cv_threshold < 0.0)
    throw Error(ErrorKind::value, "cv_threshold must be non-negative");

  std::vector<double> sum1(n + 1, 0.0), sum2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    sum1[i + 1] = sum1[i] + s[i].power_w;
    sum2[i + 1] = sum2[i] + s[i].power_w * s[i].power_w;
  }
  // Population CV of samples in [i, j], guarded against cancellation noise.
  auto window_cv = [&](std::size_t i, std::size_t j, double* mean_out) {
    const double count = static_cast<double>(j - i + 1);
    const double mean = (sum1[j + 1] - sum1[i]) / count;
    double var = (sum2[j + 1] - sum2[i]) / count - mean * mean;
    if (var < 0.0) var = 0.0;
    if (mean_out != nullptr) *mean_out = mean;
    if (mean <= 0.0) return var > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return std::sqrt(var) / mean;
  };

  bool found = false;
  std::size_t best_i = 0, best_j = 0;
  double best_duration = -1.0;
  double best_cv_seen = std::numeric_limits<double>::infinity();

  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = n - 1; j > i; --j) {
      const double duration = s[j].timestamp_ms - s[i].timestamp_ms;
      if (duration < opts.min_duration_ms) break;
      const double cv = window_cv(i, j, nullptr);
      best_cv_seen = std::min(best_cv_seen, cv);
      if (cv <= opts.cv_threshold) {
        // Longest window for this start; prefer later starts on duration ties.
        if (duration > best_duration ||
            (duration == best_duration && s[i].timestamp_ms > s[best_i].timestamp_ms)) {
          best_duration = duration;
          best_i = i;
          best_j = j;
          found = true;
        }
        break;
      }
    }
  }

  if (!found) {
    std::ostringstream msg;
    msg << "no steady state: best coefficient of variation " << best_cv_seen
        << " exceeds threshold " << opts.cv_threshold;
    throw Error(ErrorKind::no_steady_state, msg.str());
  }

  // Trim ramp stragglers: samples whose power sits far from the window median
  // belong to the warmup (or cool-down), not the plateau. The tolerance is a
  // robust sigma estimate so noisy plateaus are left alone.
  {
    std::vector<double> window_powers;
    window_powers.reserve(best_j - best_i + 1);
    for (std::size_t k = best_i; k <= best_j; ++k) window_powers.push_back(s[k].power_w);
    const double med = median_of(window_powers);
    std::vector<double> deviations;
    deviations.reserve(window_powers.size());
    for (double p : window_powers) deviations.push_back(std::fabs(p - med));
    const double mad = median_of(std::move(deviations));
    const double tolerance = std::max(3.0 * 1.4826 * mad, 1e-9 * std::fabs(med));

    std::size_t i = best_i, j = best_j;
    while (i < j && std::fabs(s[i].power_w - med) > tolerance) ++i;
    while (j > i && std::fabs(s[j].power_w - med) > tolerance) --j;
    if (s[j].timestamp_ms - s[i].timestamp_ms >= opts.min_duration_ms) {
      best_i = i;
      best_j = j;
    }
  }

  SteadyWindow window;
  window.start_ms = s[best_i].timestamp_ms;
  window.end_ms = s[best_j].timestamp_ms;
  window.coefficient_of_variation = window_cv(best_i, best_j, &window.mean_power_w);
  return window;
}

double integrate_energy(const PowerTrace& trace) {
  if (trace.samples.size() < 2)
    throw Error(ErrorKind::insufficient_data, "integration requires at least 2 samples");
  return integrate_energy(trace, trace.samples.front().timestamp_ms,
                          trace.samples.back().timestamp_ms);
}

double integrate_energy(const PowerTrace& trace, double start_ms, double end_ms) {
  const auto& s = trace.samples;
  if (s.size() < 2)
    throw Error(ErrorKind::insufficient_data, "integration requires at least 2 samples");
  if (start_ms >= end_ms)
    throw Error(ErrorKind::range, "window start must precede window end");
  if (start_ms < s.front().timestamp_ms || end_ms > s.back().timestamp_ms)
    throw Error(ErrorKind::range, "window outside trace bounds");

  std::size_t inside = 0;
  for (const auto& sample : s)
    if (sample.timestamp_ms >= start_ms && sample.timestamp_ms <= end_ms) ++inside;
  if (inside < 2)
    throw Error(ErrorKind::insufficient_data, "fewer than 2 samples inside window");

  double energy_wm = 0.0;  // watt-milliseconds
  double prev_t = start_ms;
  double prev_p = power_at(s, start_ms);
  auto it = std::upper_bound(s.begin(), s.end(), start_ms,
                             [](double t, const PowerSample& a) { return t < a.timestamp_ms; });
  for (; it != s.end() && it->timestamp_ms < end_ms; ++it) {
    energy_wm += 0.5 * (prev_p + it->power_w) * (it->timestamp_ms - prev_t);
    prev_t = it->timestamp_ms;
    prev_p = it->power_w;
  }
  const double end_p = power_at(s, end_ms);
  energy_wm += 0.5 * (prev_p + end_p) * (end_ms - prev_t);
  return energy_wm / 1000.0;
}

double integrate_energy(const PowerTrace& trace, const SteadyWindow& window) {
  return integrate_energy(trace, window.start_ms, window.end_ms);
}

double estimate_idle_power(const PowerTrace& idle_trace) {
  if (idle_trace.samples.size() < 5)
    throw Error(ErrorKind::insufficient_data,
                "idle power estimation requires at least 5 samples, got " +
                    std::to_string(idle_trace.samples.size()));
  std::vector<double> powers;
  powers.reserve(idle_trace.samples.size());
  for (const auto& sample : idle_trace.samples) powers.push_back(sample.power_w);
  return median_of(std::move(powers));
}

double estimate_static_power(const PowerTrace& active_idle_trace, double p_const_w) {
  if (p_const_w < 0.0) throw Error(ErrorKind::value, "p_const must be non-negative");
  const double active_idle_w = estimate_idle_power(active_idle_trace);
  return std::max(0.0, active_idle_w - p_const_w);
}

EnergyComponents decompose_energy(double total_j, double p_const_w, double p_static_w,
                                  double t_exec_s) {
  if (t_exec_s <= 0.0) throw Error(ErrorKind::value, "t_exec must be positive");
  if (total_j < 0.0 || p_const_w < 0.0 || p_static_w < 0.0)
    throw Error(ErrorKind::value, "energy decomposition inputs must be non-negative");

  EnergyComponents components;
  components.total_j = total_j;
  components.p_const_w = p_const_w;
  components.p_static_w = p_static_w;
  components.t_exec_s = t_exec_s;
  components.const_j = p_const_w * t_exec_s;
  components.static_j = p_static_w * t_exec_s;
  const double raw_dynamic = total_j - components.const_j - components.static_j;
  if (raw_dynamic < 0.0) {
    components.dynamic_j = 0.0;
    components.clamped_negative_j = -raw_dynamic;
  } else {
    components.dynamic_j = raw_dynamic;
  }
  return components;
}

}  // namespace wattbench
