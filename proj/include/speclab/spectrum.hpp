#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "speclab/operator.hpp"

namespace speclab {

struct SpectrumRequest {
  std::optional<double> lambda_max;  // keep frequencies lambda_k <= lambda_max
  std::optional<int> count;          // or the first `count` modes
};

/// Ordered eigenpairs (lambda_k^2, e_k) of an assembled operator, orthonormal
/// in the weighted inner product <u, v>_w = sum w_i u_i v_i.
class Spectrum {
 public:
  Spectrum(std::shared_ptr<const DiscreteOperator> op, Eigen::VectorXd eigenvalues,
           Eigen::MatrixXd vectors);

  const DiscreteOperator& op() const noexcept { return *op_; }
  std::shared_ptr<const DiscreteOperator> op_ptr() const noexcept { return op_; }

  int size() const noexcept { return static_cast<int>(eigenvalues_.size()); }
  /// True when every eigenpair of the discrete operator is present.
  bool complete() const noexcept { return size() == op_->size(); }

  double eigenvalue(int k) const { return eigenvalues_(k); }  // lambda_k^2
  double frequency(int k) const { return frequencies_(k); }   // lambda_k
  const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
  const Eigen::VectorXd& frequencies() const noexcept { return frequencies_; }
  const Eigen::MatrixXd& vectors() const noexcept { return vectors_; }
  Eigen::VectorXd vector(int k) const { return vectors_.col(k); }

  /// Number of modes with lambda_k <= cutoff (relative slack 1e-12).
  int count_below(double cutoff) const;

  /// u_k = <field, e_k>_w for every stored mode.
  Eigen::VectorXd coefficients(const Eigen::VectorXd& field) const;
  /// sum_k c_k e_k over the first c.size() modes.
  Eigen::VectorXd synthesize(const Eigen::VectorXd& coefficients) const;

 private:
  std::shared_ptr<const DiscreteOperator> op_;
  Eigen::VectorXd eigenvalues_;
  Eigen::VectorXd frequencies_;
  Eigen::MatrixXd vectors_;
};

/// Dense solve of the symmetrized problem W^{-1/2} K W^{-1/2}.
Spectrum compute_spectrum(std::shared_ptr<const DiscreteOperator> op,
                          const SpectrumRequest& request = {});

/// Shift-invert Lanczos on (K + shift W)^{-1} W with full reorthogonalization.
/// Returns the lowest `count` eigenpairs; intended to agree with the dense
/// path wherever both are computed.
Spectrum compute_spectrum_lanczos(std::shared_ptr<const DiscreteOperator> op, int count,
                                  double shift = 1.0);

/// Largest relative generalized residual ||K e - lambda^2 w e|| / ||e||.
double max_residual(const Spectrum& spectrum);
/// max |<e_j, e_k>_w - delta_jk|.
double orthonormality_defect(const Spectrum& spectrum);

/// Orthogonal projector onto span{e_k : lambda_k <= cutoff}. On a truncated
/// spectrum the field is first projected onto the stored modes.
Eigen::VectorXd project_low(const Spectrum& spectrum, const Eigen::VectorXd& field,
                            double cutoff);

/// e^{t Delta} field; components outside a truncated basis are dropped.
Eigen::VectorXd heat_propagate(const Spectrum& spectrum, const Eigen::VectorXd& field, double t);

/// u(t, .) = sum_{lambda_k <= cutoff} u_k sinh(lambda_k t)/lambda_k e_k, with t
/// in place of the ratio when lambda_k = 0. Row r of the result is u(t_grid[r]).
Eigen::MatrixXd elliptic_lift(const Spectrum& spectrum, const Eigen::VectorXd& coefficients,
                              double cutoff, const std::vector<double>& t_grid);

struct ExponentFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int modes = 0;
};

/// Indices of nonzero modes with lambda_k * h_max <= 1.
std::vector<int> resolved_band(const Spectrum& spectrum);

/// Slope of log lambda_k against log k over the resolved band.
ExponentFit weyl_exponent(const Spectrum& spectrum);
/// Slope of log ||e_k||_inf against log(1 + lambda_k) over the resolved band.
ExponentFit eigen_sup_exponent(const Spectrum& spectrum);

/// Smallest C with ||sum u_k e_k||_inf <= C (sum (1+lambda_k)^{2 sigma} u_k^2)^{1/2}
/// over the stored modes: max_x (sum_k e_k(x)^2 (1+lambda_k)^{-2 sigma})^{1/2}.
double sobolev_constant(const Spectrum& spectrum, double sigma);

}  // namespace speclab
