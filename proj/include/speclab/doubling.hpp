#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "speclab/domain.hpp"
#include "speclab/operator.hpp"
#include "speclab/spectrum.hpp"

namespace speclab {

struct BoundaryNormal {
  Eigen::VectorXd normal;  // first component along the inward coordinate y
  double lambda = 1.0;     // e_1^T a^{-1} e_1
};

/// n = lambda^{-1/2} a^{-1} e_1: the inward unit normal of {y = 0} for the metric a.
BoundaryNormal boundary_normal(const Eigen::MatrixXd& a);

/// Cell-integrated Poisson kernel weight of a tangential cell of width h
/// centred at offset delta, at height s > 0.
double poisson_weight(double delta, double h, double s);

/// m(s, z) = Poisson smoothing of the sampled field v(z) at every s in s_grid,
/// with v taken as zero outside the z grid. Offsets whose kernel tail mass
/// is below `truncation` are skipped. Row is of the result is s_grid[is].
std::vector<std::vector<Eigen::Vector2d>> smooth_normal(const std::vector<Eigen::Vector2d>& field,
                                                        double hz,
                                                        const std::vector<double>& s_grid,
                                                        double truncation = 1e-6);

/// Discrete kernel mass seen from z-node iz at height s (1 away from the edges).
double poisson_mass(int nz, int iz, double hz, double s, double truncation = 1e-6);

/// C-infinity cutoff: 1 for |z| <= inner, 0 for |z| >= outer.
double smooth_cutoff(double z, double inner, double outer);

using ChartMetric = std::function<Eigen::Matrix2d(double y, double x)>;

/// Half-space chart {y >= 0} sampled on s in [0, s_max] and z in [z_lo, z_hi].
struct BoundaryChart {
  std::vector<double> s;
  std::vector<double> z;
  ChartMetric metric;
  std::vector<double> chi;
  std::vector<Eigen::Vector2d> normal;
  std::vector<double> lambda;
  std::vector<std::vector<Eigen::Vector2d>> m;  // m[is][iz]

  double hs() const { return s[1] - s[0]; }
  double hz() const { return z[1] - z[0]; }
  /// phi(s, z) = (0, z) + s m(s, z), as (y, x).
  Eigen::Vector2d phi(int is, int iz) const;
};

BoundaryChart make_chart(ChartMetric metric, const std::function<double(double)>& chi,
                         double s_max, int ns, double z_lo, double z_hi, int nz);

struct ChartDiagnostics {
  double unit_residual = 0.0;        // max |n^T a n - 1|
  double orthogonality_residual = 0.0;  // max |n^T a e_2|
  double smoothing_error = 0.0;      // max |m(0, z) - chi n|
  double min_abs_det = 0.0;          // over the chi > 1/2 region
  double jacobian_error = 0.0;       // FD Jacobian at s = 0 against the closed form
  double max_b12 = 0.0;              // |b_12(0, z)| on chi = 1
  double max_b11_error = 0.0;        // |b_11(0, z) - 1| on chi = 1
  double min_b22 = 0.0;              // b'(z) on chi = 1
  double phi_ss = 0.0, phi_sz = 0.0, phi_zz = 0.0;  // max FD second derivatives of phi
  double m_second = 0.0;             // max FD second derivative of m
  double m_second_weighted = 0.0;    // max s |FD second derivative of m|
  double m_sup = 0.0, m_sdz = 0.0;   // sup |m| and sup s |d_z m|
  std::vector<std::vector<Eigen::Matrix2d>> b;  // pulled-back metric b[is][iz]
};

/// Checks the map at s = 0, pulls a back through phi with second-order
/// differences, and measures second differences. Fails with degenerate-chart
/// when the Jacobian is singular on the chi > 1/2 region (or that region is empty).
ChartDiagnostics pseudo_geodesic_diag(const BoundaryChart& chart);

/// Flat side to double across: the side at coordinate 0 of `axis`. A
/// non-constant `profile` (offsets of the side along the tangential grid)
/// describes a curved side, which is out of scope.
struct DoublingInterface {
  int axis = 0;
  std::vector<double> profile;
};

struct DoubledSystem {
  Domain original;
  Domain doubled;
  std::shared_ptr<const CoefficientField> coefficients;
  std::shared_ptr<const DiscreteOperator> op;
  int axis = 0;
  std::vector<int> mirror;  // doubled node -> original node
  std::vector<int> side;    // +1 original copy, -1 reflected copy, 0 on the interface
};

DoubledSystem double_domain(const Domain& domain, const CoefficientField& coeffs,
                            const DoublingInterface& interface = {});

enum class Parity { odd, even };

struct Extension {
  Eigen::VectorXd field;  // on the doubled unknowns
  double residual = 0.0;  // ||W^{-1} K e - lambda^2 e||_w / ||e||_w
  double bulk_residual = 0.0;
  double interface_residual = 0.0;
  bool parity_mismatch = false;
};

/// Reflects a one-sided eigenfunction (values on the original unknowns) onto
/// the double: odd for Dirichlet, even for Neumann unless `parity` overrides.
Extension extend_eigenfunction(const DoubledSystem& doubled, const Eigen::VectorXd& values,
                               double eigenvalue, BoundaryCondition bc,
                               std::optional<Parity> parity = std::nullopt);

/// Distance from each of the first `count` one-sided eigenvalues to the
/// nearest doubled eigenvalue.
std::vector<double> spectral_inclusion(const Spectrum& one_sided, const Spectrum& doubled,
                                       int count);

}  // namespace speclab
