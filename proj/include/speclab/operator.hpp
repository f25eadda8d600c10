#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <type_traits>

#include "speclab/domain.hpp"
#include "speclab/error.hpp"

namespace speclab {

/// Discrete weighted Laplacian on the unknowns of a domain.
///
/// K is the P1 stiffness matrix of the flux tensor kappa * g^{-1}, with the
/// tensor averaged over the vertices of each simplex (the edge mean in 1-D).
/// w is the lumped mass kappa_i * control_volume_i. The generalized problem
/// K e = lambda^2 (w o e) is the discrete eigenproblem of -Delta.
class DiscreteOperator {
 public:
  DiscreteOperator(Domain domain, std::vector<double> node_density,
                   Eigen::SparseMatrix<double> stiffness, Eigen::VectorXd weights);

  const Domain& domain() const noexcept { return domain_; }
  BoundaryCondition bc() const noexcept { return domain_.bc(); }
  int size() const noexcept { return static_cast<int>(weights_.size()); }

  const Eigen::SparseMatrix<double>& stiffness() const noexcept { return stiffness_; }
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  /// kappa at every grid node (including eliminated ones).
  const std::vector<double>& node_density() const noexcept { return node_density_; }

  double inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
  double norm(const Eigen::VectorXd& u) const;

 private:
  Domain domain_;
  std::vector<double> node_density_;
  Eigen::SparseMatrix<double> stiffness_;
  Eigen::VectorXd weights_;
};

DiscreteOperator assemble(const Domain& domain, const CoefficientField& coeffs);

/// -Delta_h u = W^{-1} K u. On sin(kx) samples of a unit-coefficient interval
/// this returns (2 - 2 cos kh) / h^2 times the input.
Eigen::VectorXd apply(const DiscreteOperator& op, const Eigen::VectorXd& u);

/// K u (the stiffness action, without the mass inverse).
Eigen::VectorXd apply_stiffness(const DiscreteOperator& op, const Eigen::VectorXd& u);

/// Quadratic form <K u, u>.
double energy(const DiscreteOperator& op, const Eigen::VectorXd& u);

/// Samples f at the unknown nodes; f takes x in 1-D and (x, y) in 2-D.
template <class F>
Eigen::VectorXd sample(const Domain& domain, F&& f) {
  constexpr bool planar = std::is_invocable_v<F, double, double>;
  require(domain.dimension() == (planar ? 2 : 1), ErrorKind::invalid_argument,
          "sampled function does not match the domain dimension");
  Eigen::VectorXd out(domain.unknown_count());
  for (int k = 0; k < domain.unknown_count(); ++k) {
    const Eigen::Vector2d p = domain.node_position(domain.node_of_unknown(k));
    if constexpr (planar)
      out[k] = f(p.x(), p.y());
    else
      out[k] = f(p.x());
  }
  return out;
}

}  // namespace speclab
