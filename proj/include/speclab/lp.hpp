#pragma once

#include <vector>

#include <Eigen/Dense>

namespace speclab {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double value = 0.0;
  Eigen::VectorXd x;     // primal solution
  Eigen::VectorXd dual;  // multipliers y with A^T y <= c, b^T y = value
  int iterations = 0;
};

/// min c^T x subject to A x = b, x >= 0, by a dense two-phase tableau simplex
/// with a lexicographic ratio test against cycling. Redundant equality rows are tolerated.
LpResult solve_standard_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                           const Eigen::VectorXd& c, double tol = 1e-10);

}  // namespace speclab
