#include "speclab/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SparseCholesky>

#include "speclab/error.hpp"
#include "speclab/fit.hpp"

namespace speclab {

Spectrum::Spectrum(std::shared_ptr<const DiscreteOperator> op, Eigen::VectorXd eigenvalues,
                   Eigen::MatrixXd vectors)
    : op_(std::move(op)), eigenvalues_(std::move(eigenvalues)), vectors_(std::move(vectors)) {
  require(op_ != nullptr, ErrorKind::invalid_argument, "spectrum needs an operator");
  require(vectors_.rows() == op_->size() && vectors_.cols() == eigenvalues_.size(),
          ErrorKind::invalid_argument, "eigenvector block has the wrong shape");
  frequencies_ = eigenvalues_.cwiseMax(0.0).cwiseSqrt();
}

int Spectrum::count_below(double cutoff) const {
  const double limit = cutoff * (1.0 + 1e-12) + 1e-300;
  int n = 0;
  while (n < size() && frequencies_(n) <= limit) ++n;
  return n;
}

Eigen::VectorXd Spectrum::coefficients(const Eigen::VectorXd& field) const {
  require(field.size() == op_->size(), ErrorKind::invalid_argument,
          "field length does not match the unknown count");
  return vectors_.transpose() * (field.array() * op_->weights().array()).matrix();
}

Eigen::VectorXd Spectrum::synthesize(const Eigen::VectorXd& c) const {
  require(c.size() <= size(), ErrorKind::invalid_argument, "more coefficients than modes");
  return vectors_.leftCols(c.size()) * c;
}

namespace {

// Fixes the sign of each column so that its first clearly nonzero entry is
// positive; keeps dense and iterative output comparable and reproducible.
void normalize_signs(Eigen::MatrixXd& vectors) {
  for (int k = 0; k < vectors.cols(); ++k) {
    auto col = vectors.col(k);
    const double scale = col.cwiseAbs().maxCoeff();
    for (int i = 0; i < col.size(); ++i) {
      if (std::abs(col(i)) > 1e-6 * scale) {
        if (col(i) < 0.0) col *= -1.0;
        break;
      }
    }
  }
}

// Neumann problems have the constants as exact kernel; pin it.
void pin_constant_mode(const DiscreteOperator& op, Eigen::VectorXd& values,
                       Eigen::MatrixXd& vectors) {
  if (op.bc() != BoundaryCondition::neumann || values.size() == 0) return;
  const double scale = std::max(1.0, std::abs(values(values.size() - 1)));
  if (std::abs(values(0)) > 1e-9 * scale) return;
  values(0) = 0.0;
  vectors.col(0).setConstant(1.0 / std::sqrt(op.weights().sum()));
}

int select_count(const Eigen::VectorXd& values, const SpectrumRequest& request) {
  int keep = static_cast<int>(values.size());
  if (request.count) {
    require(*request.count >= 1, ErrorKind::invalid_argument, "mode count must be positive");
    keep = std::min(keep, *request.count);
  }
  if (request.lambda_max) {
    require(*request.lambda_max >= 0.0, ErrorKind::invalid_argument,
            "frequency cutoff must be non-negative");
    const double limit = *request.lambda_max * (1.0 + 1e-12);
    int n = 0;
    while (n < keep && std::sqrt(std::max(values(n), 0.0)) <= limit) ++n;
    keep = n;
  }
  return keep;
}

}  // namespace

Spectrum compute_spectrum(std::shared_ptr<const DiscreteOperator> op,
                          const SpectrumRequest& request) {
  require(op != nullptr, ErrorKind::invalid_argument, "spectrum needs an operator");
  const Eigen::VectorXd inv_sqrt_w = op->weights().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd A = Eigen::MatrixXd(op->stiffness());
  A = inv_sqrt_w.asDiagonal() * A * inv_sqrt_w.asDiagonal();
  A = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(A);
  if (solver.info() != Eigen::Success)
    fail(ErrorKind::numerical_failure, "dense symmetric eigensolver did not converge");

  Eigen::VectorXd values = solver.eigenvalues();
  Eigen::MatrixXd vectors = inv_sqrt_w.asDiagonal() * solver.eigenvectors();
  pin_constant_mode(*op, values, vectors);
  if (values.size() > 0 && values(0) < 0.0 && values(0) > -1e-9) values(0) = 0.0;

  const int keep = select_count(values, request);
  Eigen::VectorXd kept_values = values.head(keep);
  Eigen::MatrixXd kept_vectors = vectors.leftCols(keep);
  normalize_signs(kept_vectors);
  Spectrum out(std::move(op), std::move(kept_values), std::move(kept_vectors));
  const double residual = max_residual(out);
  if (!(residual <= 1e-8))
    fail(ErrorKind::numerical_failure,
         "eigenpair residual " + std::to_string(residual) + " exceeds 1e-8");
  return out;
}

Spectrum compute_spectrum_lanczos(std::shared_ptr<const DiscreteOperator> op, int count,
                                  double shift) {
  require(op != nullptr, ErrorKind::invalid_argument, "spectrum needs an operator");
  const int n = op->size();
  require(count >= 1 && count <= n, ErrorKind::invalid_argument,
          "Lanczos mode count must lie in [1, unknowns]");
  require(shift > 0.0, ErrorKind::invalid_argument, "Lanczos shift must be positive");

  const Eigen::VectorXd& w = op->weights();
  Eigen::SparseMatrix<double> shifted = op->stiffness();
  for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) += shift * w(i);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor(shifted);
  if (factor.info() != Eigen::Success)
    fail(ErrorKind::numerical_failure, "factorization of K + shift W failed");

  auto winner = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a.array() * b.array() * w.array()).sum();
  };

  std::mt19937_64 rng(0x5eed1a2c);
  std::normal_distribution<double> normal;
  auto random_vector = [&] {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
  };

  int m = std::min(n, 2 * count + 30);
  for (;;) {
    // Krylov basis with full reorthogonalization; the projected matrix is
    // formed explicitly (Rayleigh-Ritz), which tolerates restarts on breakdown.
    Eigen::MatrixXd Q(n, m), R(n, m);
    Eigen::VectorXd q = random_vector();
    q /= std::sqrt(winner(q, q));
    for (int j = 0; j < m; ++j) {
      Q.col(j) = q;
      R.col(j) = factor.solve((w.array() * q.array()).matrix());
      if (j + 1 == m) break;
      Eigen::VectorXd r = R.col(j);
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= j; ++i) r -= winner(Q.col(i), r) * Q.col(i);
      double beta = std::sqrt(std::max(winner(r, r), 0.0));
      if (beta < 1e-10 * std::sqrt(winner(R.col(j), R.col(j)))) {
        r = random_vector();
        for (int pass = 0; pass < 2; ++pass)
          for (int i = 0; i <= j; ++i) r -= winner(Q.col(i), r) * Q.col(i);
        beta = std::sqrt(winner(r, r));
      }
      q = r / beta;
    }
    Eigen::MatrixXd T = Q.transpose() * w.asDiagonal() * R;
    T = 0.5 * (T + T.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(T);
    // Largest theta of the inverse operator are the smallest lambda^2.
    Eigen::VectorXd values(count);
    Eigen::MatrixXd vectors(n, count);
    for (int k = 0; k < count; ++k) {
      const int idx = m - 1 - k;
      const double theta = small.eigenvalues()(idx);
      values(k) = 1.0 / theta - shift;
      Eigen::VectorXd x = Q * small.eigenvectors().col(idx);
      vectors.col(k) = x / std::sqrt(winner(x, x));
    }
    pin_constant_mode(*op, values, vectors);
    if (values(0) < 0.0 && values(0) > -1e-9) values(0) = 0.0;
    normalize_signs(vectors);
    Spectrum out(op, values, vectors);
    const double residual = max_residual(out);
    if (residual <= 1e-9) return out;
    if (m == n)
      fail(ErrorKind::numerical_failure,
           "Lanczos residual " + std::to_string(residual) + " after a full Krylov space");
    m = std::min(n, 2 * m);
  }
}

double max_residual(const Spectrum& spectrum) {
  const DiscreteOperator& op = spectrum.op();
  double worst = 0.0;
  for (int k = 0; k < spectrum.size(); ++k) {
    const Eigen::VectorXd e = spectrum.vectors().col(k);
    const Eigen::VectorXd r =
        op.stiffness() * e - spectrum.eigenvalue(k) * (op.weights().array() * e.array()).matrix();
    worst = std::max(worst, r.norm() / e.norm());
  }
  return worst;
}

double orthonormality_defect(const Spectrum& spectrum) {
  const Eigen::MatrixXd& E = spectrum.vectors();
  const Eigen::MatrixXd G = E.transpose() * spectrum.op().weights().asDiagonal() * E;
  return (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

Eigen::VectorXd project_low(const Spectrum& spectrum, const Eigen::VectorXd& field,
                            double cutoff) {
  require(cutoff >= 0.0, ErrorKind::invalid_argument, "projection cutoff must be non-negative");
  const int n = spectrum.count_below(cutoff);
  if (n == spectrum.size() && spectrum.complete()) return field;
  const Eigen::VectorXd c = spectrum.coefficients(field);
  return spectrum.synthesize(c.head(n));
}

Eigen::VectorXd heat_propagate(const Spectrum& spectrum, const Eigen::VectorXd& field, double t) {
  require(t >= 0.0, ErrorKind::invalid_argument, "heat propagation needs t >= 0");
  const Eigen::VectorXd c = spectrum.coefficients(field);
  const Eigen::VectorXd decay = (-t * spectrum.eigenvalues().array()).exp().matrix();
  return spectrum.synthesize(c.cwiseProduct(decay));
}

Eigen::MatrixXd elliptic_lift(const Spectrum& spectrum, const Eigen::VectorXd& coefficients,
                              double cutoff, const std::vector<double>& t_grid) {
  require(coefficients.size() <= spectrum.size(), ErrorKind::invalid_argument,
          "more coefficients than modes");
  const int n = std::min<int>(spectrum.count_below(cutoff), static_cast<int>(coefficients.size()));
  Eigen::MatrixXd out(t_grid.size(), spectrum.op().size());
  for (std::size_t r = 0; r < t_grid.size(); ++r) {
    const double t = t_grid[r];
    Eigen::VectorXd c(n);
    for (int k = 0; k < n; ++k) {
      const double lam = spectrum.frequency(k);
      c(k) = coefficients(k) * (lam > 0.0 ? std::sinh(lam * t) / lam : t);
    }
    out.row(r) = spectrum.synthesize(c).transpose();
  }
  return out;
}

std::vector<int> resolved_band(const Spectrum& spectrum) {
  const double h = spectrum.op().domain().max_width();
  std::vector<int> band;
  for (int k = 0; k < spectrum.size(); ++k) {
    const double lam = spectrum.frequency(k);
    if (lam <= 1e-8) continue;
    if (lam * h > 1.0) break;
    band.push_back(k);
  }
  return band;
}

namespace {

ExponentFit fit_band(const Spectrum& spectrum, bool sup_norm) {
  const std::vector<int> band = resolved_band(spectrum);
  require(band.size() >= 30, ErrorKind::insufficient_data,
          "only " + std::to_string(band.size()) + " resolved nonzero modes (need 30)");
  std::vector<double> x, y;
  for (std::size_t r = 0; r < band.size(); ++r) {
    const int k = band[r];
    if (sup_norm) {
      x.push_back(std::log1p(spectrum.frequency(k)));
      y.push_back(std::log(spectrum.vectors().col(k).cwiseAbs().maxCoeff()));
    } else {
      x.push_back(std::log(static_cast<double>(r + 1)));
      y.push_back(std::log(spectrum.frequency(k)));
    }
  }
  const LineFit line = fit_line(x, y);
  return {line.slope, line.intercept, line.r2, static_cast<int>(band.size())};
}

}  // namespace

ExponentFit weyl_exponent(const Spectrum& spectrum) { return fit_band(spectrum, false); }
ExponentFit eigen_sup_exponent(const Spectrum& spectrum) { return fit_band(spectrum, true); }

double sobolev_constant(const Spectrum& spectrum, double sigma) {
  const Eigen::ArrayXd scale =
      (1.0 + spectrum.frequencies().array()).pow(-2.0 * sigma);
  const Eigen::MatrixXd& E = spectrum.vectors();
  double worst = 0.0;
  for (int i = 0; i < E.rows(); ++i) {
    const double s = (E.row(i).transpose().array().square() * scale).sum();
    worst = std::max(worst, s);
  }
  return std::sqrt(worst);
}

}  // namespace speclab
