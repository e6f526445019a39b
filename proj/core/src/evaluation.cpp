#include "wattbench/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wattbench/csv.hpp"
#include "wattbench/errors.hpp"
#include "wattbench/prediction.hpp"

namespace fs = std::filesystem;

namespace wattbench {

EvaluationRow make_evaluation_row(std::string workload, double measured_j, double predicted_j) {
  if (measured_j <= 0.0)
    throw Error(ErrorKind::value,
                "workload '" + workload + "': measured energy must be positive");
  if (predicted_j < 0.0)
    throw Error(ErrorKind::value,
                "workload '" + workload + "': predicted energy must be non-negative");
  EvaluationRow row;
  row.workload = std::move(workload);
  row.measured_j = measured_j;
  row.predicted_j = predicted_j;
  row.abs_pct_error = 100.0 * std::fabs(predicted_j - measured_j) / measured_j;
  return row;
}

double mape(const std::vector<EvaluationRow>& rows) {
  if (rows.empty()) throw Error(ErrorKind::insufficient_data, "MAPE over zero workloads");
  double sum = 0.0;
  for (const auto& row : rows) {
    if (row.measured_j <= 0.0)
      throw Error(ErrorKind::value,
                  "workload '" + row.workload + "': measured energy must be positive");
    sum += row.abs_pct_error;
  }
  return sum / static_cast<double>(rows.size());
}

GuserEstimate guser_baseline(const PowerTrace& trace, double t_exec_s,
                             const InstructionProfile& profile) {
  if (trace.samples.empty())
    throw Error(ErrorKind::insufficient_data, "max-power baseline needs a non-empty trace");
  if (t_exec_s <= 0.0) throw Error(ErrorKind::value, "t_exec must be positive");
  double max_power = 0.0;
  for (const auto& sample : trace.samples) max_power = std::max(max_power, sample.power_w);

  GuserEstimate estimate;
  estimate.energy_j = max_power * t_exec_s;
  const double total_count = profile.total_instruction_count();
  estimate.per_instruction_j = total_count > 0.0 ? estimate.energy_j / total_count : 0.0;
  return estimate;
}

std::vector<EvaluationRow> load_evaluation_input(const std::string& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open evaluation input: " + csv_path);
  const std::string what = "evaluation input";
  csv::Table table = csv::read_table(in, what);
  if (table.header != std::vector<std::string>{"workload", "measured_j",
                                               "prediction_report_file"})
    throw Error(ErrorKind::format,
                what + ": header must be 'workload,measured_j,prediction_report_file'");

  const fs::path base = fs::path(csv_path).parent_path();
  std::vector<EvaluationRow> rows;
  for (const auto& row : table.rows) {
    if (row.cells.size() != 3)
      throw Error(ErrorKind::format,
                  what + ": expected 3 cells at line " + std::to_string(row.line_number));
    const std::string& workload = row.cells[0];
    const double measured = csv::parse_double(row.cells[1], row.line_number, what);
    fs::path report_path(row.cells[2]);
    if (report_path.is_relative()) report_path = base / report_path;
    const PredictionReport report = PredictionReport::from_json_file(report_path.string());
    rows.push_back(make_evaluation_row(workload, measured, report.total_j));
  }
  return rows;
}

std::string evaluation_csv(const std::vector<EvaluationRow>& rows) {
  std::ostringstream out;
  out << "workload,measured_j,predicted_j,abs_pct_error\n";
  for (const auto& row : rows) {
    out << row.workload << ',' << csv::format_double(row.measured_j) << ','
        << csv::format_double(row.predicted_j) << ',' << csv::format_double(row.abs_pct_error)
        << '\n';
  }
  out << "MAPE," << csv::format_double(mape(rows)) << '\n';
  return out.str();
}

}  // namespace wattbench
