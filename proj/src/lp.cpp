#include "speclab/lp.hpp"

#include <cmath>
#include <limits>

#include "speclab/error.hpp"

namespace speclab {

namespace {

struct Tableau {
  // rows 0..m-1 constraints; columns: structural, then the m artificial
  // (initial basis) columns, then the rhs.
  Eigen::MatrixXd t;
  std::vector<int> basis;
  int structural = 0;

  int rows() const { return static_cast<int>(basis.size()); }
  int cols() const { return static_cast<int>(t.cols()) - 1; }

  void pivot(int r, int c) {
    t.row(r) /= t(r, c);
    for (int i = 0; i < t.rows(); ++i)
      if (i != r && t(i, c) != 0.0) t.row(i) -= t(i, c) * t.row(r);
    basis[r] = c;
    // Flush round-off so degenerate ties are recognized.
    for (int i = 0; i < t.rows(); ++i)
      for (int j = 0; j < t.cols(); ++j)
        if (std::abs(t(i, j)) < 1e-14) t(i, j) = 0.0;
  }
};

// Minimizes `cost` from the current basic feasible tableau with Dantzig
// pricing and the lexicographic ratio test (rows compared on rhs then on the
// artificial columns), which cannot cycle. Columns >= `limit` may not enter.
LpStatus run_simplex(Tableau& tab, const Eigen::VectorXd& cost, int limit, double tol,
                     int& iterations) {
  const int m = tab.rows();
  const int rhs = tab.cols();
  const int art = tab.structural;
  for (;;) {
    if (++iterations > 100000)
      fail(ErrorKind::numerical_failure, "simplex exceeded its iteration budget");
    Eigen::VectorXd cb(m);
    for (int i = 0; i < m; ++i) cb(i) = cost(tab.basis[i]);
    int enter = -1;
    double most = -tol;
    for (int j = 0; j < limit; ++j) {
      const double reduced = cost(j) - cb.dot(tab.t.col(j).head(m));
      if (reduced < most) {
        most = reduced;
        enter = j;
      }
    }
    if (enter < 0) return LpStatus::optimal;

    int leave = -1;
    auto lex_less = [&](int i, int k) {
      const double ai = tab.t(i, enter), ak = tab.t(k, enter);
      const double ri = tab.t(i, rhs) / ai, rk = tab.t(k, rhs) / ak;
      if (std::abs(ri - rk) > 1e-12 * (1.0 + std::abs(ri) + std::abs(rk))) return ri < rk;
      for (int j = art; j < art + m; ++j) {
        const double qi = tab.t(i, j) / ai, qk = tab.t(k, j) / ak;
        if (std::abs(qi - qk) > 1e-12 * (1.0 + std::abs(qi) + std::abs(qk))) return qi < qk;
      }
      return ai > ak;
    };
    for (int i = 0; i < m; ++i) {
      if (tab.t(i, enter) <= tol) continue;
      if (leave < 0 || lex_less(i, leave)) leave = i;
    }
    if (leave < 0) return LpStatus::unbounded;
    tab.pivot(leave, enter);
  }
}

}  // namespace

LpResult solve_standard_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                           const Eigen::VectorXd& c, double tol) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  require(b.size() == m && c.size() == n, ErrorKind::invalid_argument, "LP dimensions disagree");

  // Phase 1 tableau [A | I | b] with rows flipped so b >= 0.
  Tableau tab;
  tab.structural = n;
  tab.t = Eigen::MatrixXd::Zero(m, n + m + 1);
  tab.basis.resize(m);
  std::vector<double> sign(m, 1.0);
  for (int i = 0; i < m; ++i) {
    sign[i] = b(i) < 0.0 ? -1.0 : 1.0;
    tab.t.row(i).head(n) = sign[i] * A.row(i);
    tab.t(i, n + i) = 1.0;
    tab.t(i, n + m) = sign[i] * b(i);
    tab.basis[i] = n + i;
  }
  LpResult result;
  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
  phase1.tail(m).setOnes();
  run_simplex(tab, phase1, n + m, tol, result.iterations);
  double infeas = 0.0;
  for (int i = 0; i < m; ++i)
    if (tab.basis[i] >= n) infeas += tab.t(i, n + m);
  const double scale = 1.0 + b.cwiseAbs().maxCoeff();
  if (infeas > 1e-8 * scale) {
    result.status = LpStatus::infeasible;
    return result;
  }

  // Drive remaining artificials out; rows where that is impossible are redundant.
  std::vector<int> keep;
  for (int i = 0; i < m; ++i) {
    if (tab.basis[i] >= n) {
      int col = -1;
      for (int j = 0; j < n; ++j) {
        if (std::abs(tab.t(i, j)) > 1e-9) {
          col = j;
          break;
        }
      }
      if (col < 0) continue;
      tab.pivot(i, col);
    }
    keep.push_back(i);
  }
  Tableau reduced;
  reduced.structural = n;
  const int k = static_cast<int>(keep.size());
  reduced.t = Eigen::MatrixXd::Zero(k, n + m + 1);
  for (int r = 0; r < k; ++r) {
    reduced.t.row(r) = tab.t.row(keep[r]);
    reduced.basis.push_back(tab.basis[keep[r]]);
  }

  Eigen::VectorXd cost = Eigen::VectorXd::Zero(n + m);
  cost.head(n) = c;
  const LpStatus status = run_simplex(reduced, cost, n, tol, result.iterations);
  result.status = status;
  if (status != LpStatus::optimal) return result;

  result.x = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < reduced.rows(); ++r) result.x(reduced.basis[r]) = reduced.t(r, n + m);
  result.value = c.dot(result.x);

  // Multipliers from B^T y = c_B on the original rows.
  Eigen::MatrixXd B(m, k);
  Eigen::VectorXd cb(k);
  for (int r = 0; r < k; ++r) {
    B.col(r) = A.col(reduced.basis[r]);
    cb(r) = c(reduced.basis[r]);
  }
  result.dual = B.transpose().completeOrthogonalDecomposition().solve(cb);
  return result;
}

}  // namespace speclab
