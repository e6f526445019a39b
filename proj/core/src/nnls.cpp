#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "wattbench/calibration.hpp"

namespace wattbench {

namespace {

SolveResult package_result(const CalibrationSystem& system, const Eigen::VectorXd& x_original,
                           int iterations) {
  const auto rows = static_cast<Eigen::Index>(system.n_rows);
  const auto cols = static_cast<Eigen::Index>(system.n_cols);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(
      system.counts.data(), rows, cols);
  Eigen::Map<const Eigen::VectorXd> b(system.rhs.data(), rows);

  SolveResult result;
  const Eigen::VectorXd residual = a * x_original - b;
  result.residual_norm = residual.norm();
  result.per_row_residuals.assign(residual.data(), residual.data() + residual.size());
  result.iterations = iterations;
  for (std::size_t j = 0; j < system.n_cols; ++j)
    result.energies[system.column_labels[j]] = x_original(static_cast<Eigen::Index>(j));
  return result;
}

}  // namespace

SolveResult solve_nnls(const CalibrationSystem& system, const NnlsOptions& options) {
  const auto rows = static_cast<Eigen::Index>(system.n_rows);
  const auto cols = static_cast<Eigen::Index>(system.n_cols);
  if (rows == 0 || cols == 0)
    throw Error(ErrorKind::value, "cannot solve an empty calibration system");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      a_raw(system.counts.data(), rows, cols);
  Eigen::Map<const Eigen::VectorXd> b(system.rhs.data(), rows);

  // Counts span many orders of magnitude; unit-norm columns keep the Gram
  // matrix well scaled. Energies are rescaled on output.
  Eigen::VectorXd column_norms(cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    column_norms(j) = a_raw.col(j).norm();
    if (column_norms(j) <= 0.0)
      throw Error(ErrorKind::coverage,
                  "instruction '" + system.column_labels[static_cast<std::size_t>(j)] +
                      "' has no counts in any microbenchmark");
  }
  const Eigen::MatrixXd a = a_raw * column_norms.cwiseInverse().asDiagonal();

  const Eigen::MatrixXd gram = a.transpose() * a;
  const Eigen::VectorXd atb = a.transpose() * b;

  const double dual_scale = atb.cwiseAbs().maxCoeff();
  const double dual_tolerance = options.tol * std::max(dual_scale, 1e-300);
  const int max_outer = options.max_iterations > 0
                            ? options.max_iterations
                            : 3 * static_cast<int>(system.n_cols);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(cols);
  std::vector<bool> passive(static_cast<std::size_t>(cols), false);
  std::vector<Eigen::Index> passive_list;
  int outer_iterations = 0;

  auto solve_passive = [&](const std::vector<Eigen::Index>& set) -> Eigen::VectorXd {
    const auto k = static_cast<Eigen::Index>(set.size());
    Eigen::MatrixXd gram_p(k, k);
    Eigen::VectorXd atb_p(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      atb_p(r) = atb(set[static_cast<std::size_t>(r)]);
      for (Eigen::Index c = 0; c < k; ++c)
        gram_p(r, c) = gram(set[static_cast<std::size_t>(r)], set[static_cast<std::size_t>(c)]);
    }
    return gram_p.ldlt().solve(atb_p);
  };

  while (true) {
    // Dual (negated gradient): w = A^T (b - A x).
    const Eigen::VectorXd w = atb - gram * x;
    Eigen::Index candidate = -1;
    double best_w = dual_tolerance;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (passive[static_cast<std::size_t>(j)]) continue;
      if (w(j) > best_w) {  // strict: index order breaks exact ties
        best_w = w(j);
        candidate = j;
      }
    }
    if (candidate < 0) break;  // KKT satisfied within tolerance

    if (++outer_iterations > max_outer) {
      Eigen::VectorXd x_original = x.cwiseQuotient(column_norms);
      SolveResult best = package_result(system, x_original, outer_iterations);
      std::ostringstream msg;
      msg << "NNLS did not converge after " << max_outer
          << " iterations; best residual " << best.residual_norm << " J";
      throw SolverFailure(msg.str(), std::move(best));
    }

    passive[static_cast<std::size_t>(candidate)] = true;
    passive_list.push_back(candidate);
    std::sort(passive_list.begin(), passive_list.end());

    // Inner loop: retreat to the feasible boundary until the passive
    // least-squares solution is non-negative.
    while (true) {
      const Eigen::VectorXd z_p = solve_passive(passive_list);
      bool all_positive = true;
      for (Eigen::Index r = 0; r < z_p.size(); ++r) {
        if (z_p(r) <= 0.0) {
          all_positive = false;
          break;
        }
      }
      if (all_positive) {
        x.setZero();
        for (Eigen::Index r = 0; r < z_p.size(); ++r)
          x(passive_list[static_cast<std::size_t>(r)]) = z_p(r);
        break;
      }

      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index r = 0; r < z_p.size(); ++r) {
        if (z_p(r) > 0.0) continue;
        const Eigen::Index j = passive_list[static_cast<std::size_t>(r)];
        const double denom = x(j) - z_p(r);
        if (denom > 0.0) alpha = std::min(alpha, x(j) / denom);
      }
      if (!std::isfinite(alpha)) alpha = 0.0;

      Eigen::VectorXd z_full = Eigen::VectorXd::Zero(cols);
      for (Eigen::Index r = 0; r < z_p.size(); ++r)
        z_full(passive_list[static_cast<std::size_t>(r)]) = z_p(r);
      x += alpha * (z_full - x);

      const double boundary = 1e-12 * std::max(x.cwiseAbs().maxCoeff(), 1e-300);
      std::vector<Eigen::Index> next;
      for (Eigen::Index j : passive_list) {
        if (x(j) <= boundary) {
          x(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = false;
        } else {
          next.push_back(j);
        }
      }
      if (next.size() == passive_list.size()) {
        // Numerical stalemate: drop the smallest coordinate to make progress.
        Eigen::Index drop = next.front();
        for (Eigen::Index j : next)
          if (x(j) < x(drop)) drop = j;
        x(drop) = 0.0;
        passive[static_cast<std::size_t>(drop)] = false;
        next.erase(std::find(next.begin(), next.end(), drop));
      }
      passive_list = std::move(next);
      if (passive_list.empty()) {
        x.setZero();
        break;
      }
    }
  }

  const Eigen::VectorXd x_original = x.cwiseQuotient(column_norms);
  return package_result(system, x_original, outer_iterations);
}

}  // namespace wattbench
