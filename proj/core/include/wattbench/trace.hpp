#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace wattbench {

struct PowerSample {
  double timestamp_ms = 0.0;
  double power_w = 0.0;
  std::optional<double> utilization_pct;
};

/// Timestamped power samples from one measurement session. Parsing guarantees
/// strictly increasing timestamps (duplicates collapsed, keeping the last).
struct PowerTrace {
  std::vector<PowerSample> samples;
  std::string session_label;
  std::vector<std::string> warnings;  // canonicalization notes from parsing

  double duration_ms() const;
};

struct SteadyWindow {
  double start_ms = 0.0;
  double end_ms = 0.0;
  double mean_power_w = 0.0;
  double coefficient_of_variation = 0.0;
};

struct EnergyComponents {
  double total_j = 0.0;
  double const_j = 0.0;
  double static_j = 0.0;
  double dynamic_j = 0.0;
  double p_const_w = 0.0;
  double p_static_w = 0.0;
  double t_exec_s = 0.0;
  // Magnitude of the pre-clamp negative dynamic energy, set when measurement
  // noise pushed total below the baseline and dynamic was clamped to 0.
  std::optional<double> clamped_negative_j;
};

// CSV with header `timestamp_ms,power_mw,utilization_pct`; the utilization
// column may be absent entirely or empty per row. Power is integer milliwatts
// on disk and watts in memory. Out-of-order rows are sorted (warning),
// duplicate timestamps keep the last sample.
PowerTrace parse_power_trace(std::istream& in, std::string session_label = "");
PowerTrace parse_power_trace_file(const std::string& path);

struct SteadyDetectionOptions {
  double min_duration_ms = 5000.0;
  double cv_threshold = 0.02;
};

// Longest window whose power coefficient of variation stays at or below the
// threshold, preferring later windows on duration ties; leading/trailing
// samples far from the window median (warmup ramp stragglers) are trimmed.
SteadyWindow detect_steady_window(const PowerTrace& trace,
                                  const SteadyDetectionOptions& opts = {});

// Trapezoidal integral of power over time, in joules. The windowed overloads
// interpolate power linearly at window boundaries that fall between samples,
// so adjacent windows add up exactly.
double integrate_energy(const PowerTrace& trace);
double integrate_energy(const PowerTrace& trace, double start_ms, double end_ms);
double integrate_energy(const PowerTrace& trace, const SteadyWindow& window);

// Median of sample powers over an idle recording; this is P_const.
double estimate_idle_power(const PowerTrace& idle_trace);

// Median power of an active-but-idle recording (sleep-kernel style) minus
// P_const, floored at zero; this is P_static.
double estimate_static_power(const PowerTrace& active_idle_trace, double p_const_w);

EnergyComponents decompose_energy(double total_j, double p_const_w,
                                  double p_static_w, double t_exec_s);

}  // namespace wattbench
