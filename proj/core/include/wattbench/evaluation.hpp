#pragma once

#include <string>
#include <vector>

#include "wattbench/profile.hpp"
#include "wattbench/trace.hpp"

namespace wattbench {

struct EvaluationRow {
  std::string workload;
  double measured_j = 0.0;
  double predicted_j = 0.0;
  double abs_pct_error = 0.0;  // 100 * |predicted - measured| / measured
};

EvaluationRow make_evaluation_row(std::string workload, double measured_j, double predicted_j);

// Mean absolute percent error over the rows.
double mape(const std::vector<EvaluationRow>& rows);

struct GuserEstimate {
  double energy_j = 0.0;           // max trace power * t_exec
  double per_instruction_j = 0.0;  // uniform amortization over all counts
};

// Max-power baseline: no integration, no constant/static subtraction; the
// whole energy is amortized uniformly over the profile's instruction count.
GuserEstimate guser_baseline(const PowerTrace& trace, double t_exec_s,
                             const InstructionProfile& profile);

// Input CSV `workload,measured_j,prediction_report_file`; report paths are
// resolved against the CSV's directory and predicted_j comes from each
// report's total.
std::vector<EvaluationRow> load_evaluation_input(const std::string& csv_path);

// Output CSV `workload,measured_j,predicted_j,abs_pct_error` plus a final
// `MAPE,<value>` line.
std::string evaluation_csv(const std::vector<EvaluationRow>& rows);

}  // namespace wattbench
