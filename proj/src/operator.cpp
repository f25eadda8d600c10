#include "speclab/operator.hpp"

#include <cmath>

#include "speclab/error.hpp"

namespace speclab {

DiscreteOperator::DiscreteOperator(Domain domain, std::vector<double> node_density,
                                   Eigen::SparseMatrix<double> stiffness,
                                   Eigen::VectorXd weights)
    : domain_(std::move(domain)),
      node_density_(std::move(node_density)),
      stiffness_(std::move(stiffness)),
      weights_(std::move(weights)) {}

double DiscreteOperator::inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  require(u.size() == size() && v.size() == size(), ErrorKind::invalid_argument,
          "field length does not match the unknown count");
  return (u.array() * v.array() * weights_.array()).sum();
}

double DiscreteOperator::norm(const Eigen::VectorXd& u) const { return std::sqrt(inner(u, u)); }

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void scatter(const Domain& domain, const int* nodes, int count, const Eigen::MatrixXd& local,
             Triplets& out) {
  for (int a = 0; a < count; ++a) {
    const int ia = domain.unknown_of_node(nodes[a]);
    if (ia < 0) continue;
    for (int b = 0; b < count; ++b) {
      const int ib = domain.unknown_of_node(nodes[b]);
      if (ib < 0) continue;
      out.emplace_back(ia, ib, local(a, b));
    }
  }
}

void assemble_1d(const Domain& domain, const CoefficientField& coeffs, Triplets& out) {
  const double h = domain.width(0);
  Eigen::Matrix2d unit;
  unit << 1.0, -1.0, -1.0, 1.0;
  for (int c = 0; c < domain.cells(0); ++c) {
    const int nodes[2] = {c, c + 1};
    const double a = 0.5 * (coeffs.flux_tensor(c)(0, 0) + coeffs.flux_tensor(c + 1)(0, 0));
    scatter(domain, nodes, 2, (a / h) * unit, out);
  }
}

// Each cell is split along its (i,j)-(i+1,j+1) diagonal into two triangles.
void assemble_2d(const Domain& domain, const CoefficientField& coeffs, Triplets& out) {
  const double hx = domain.width(0), hy = domain.width(1);
  const double area = 0.5 * hx * hy;
  for (int j = 0; j < domain.cells(1); ++j) {
    for (int i = 0; i < domain.cells(0); ++i) {
      const int n00 = domain.node_index(i, j), n10 = domain.node_index(i + 1, j);
      const int n01 = domain.node_index(i, j + 1), n11 = domain.node_index(i + 1, j + 1);
      const int tris[2][3] = {{n00, n10, n11}, {n00, n11, n01}};
      for (const auto& tri : tris) {
        Eigen::Matrix<double, 3, 2> corners;
        for (int v = 0; v < 3; ++v) corners.row(v) = domain.node_position(tri[v]).transpose();
        Eigen::Matrix2d edges;
        edges.col(0) = (corners.row(1) - corners.row(0)).transpose();
        edges.col(1) = (corners.row(2) - corners.row(0)).transpose();
        // Barycentric gradients: rows of [ -1 -1 ; I ] * edges^{-1}.
        const Eigen::Matrix2d inv = edges.inverse();
        Eigen::Matrix<double, 3, 2> grads;
        grads.row(1) = inv.row(0);
        grads.row(2) = inv.row(1);
        grads.row(0) = -grads.row(1) - grads.row(2);
        const Eigen::Matrix2d flux =
            (coeffs.flux_tensor(tri[0]) + coeffs.flux_tensor(tri[1]) + coeffs.flux_tensor(tri[2])) /
            3.0;
        const Eigen::Matrix3d local = area * grads * flux * grads.transpose();
        scatter(domain, tri, 3, local, out);
      }
    }
  }
}

}  // namespace

DiscreteOperator assemble(const Domain& domain, const CoefficientField& coeffs) {
  require(coeffs.dimension() == domain.dimension() && coeffs.node_count() == domain.node_count(),
          ErrorKind::invalid_argument, "coefficient field does not match the domain");
  Triplets triplets;
  if (domain.dimension() == 1)
    assemble_1d(domain, coeffs, triplets);
  else
    assemble_2d(domain, coeffs, triplets);

  const int n = domain.unknown_count();
  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(triplets.begin(), triplets.end());
  K.makeCompressed();

  Eigen::VectorXd w(n);
  std::vector<double> density(domain.node_count());
  for (int node = 0; node < domain.node_count(); ++node) density[node] = coeffs.density(node);
  for (int k = 0; k < n; ++k) {
    const int node = domain.node_of_unknown(k);
    w[k] = density[node] * domain.control_volume(node);
  }
  return DiscreteOperator(domain, std::move(density), std::move(K), std::move(w));
}

Eigen::VectorXd apply_stiffness(const DiscreteOperator& op, const Eigen::VectorXd& u) {
  require(u.size() == op.size(), ErrorKind::invalid_argument,
          "field has " + std::to_string(u.size()) + " entries, operator has " +
              std::to_string(op.size()) + " unknowns");
  return op.stiffness() * u;
}

Eigen::VectorXd apply(const DiscreteOperator& op, const Eigen::VectorXd& u) {
  return (apply_stiffness(op, u).array() / op.weights().array()).matrix();
}

double energy(const DiscreteOperator& op, const Eigen::VectorXd& u) {
  return u.dot(apply_stiffness(op, u));
}

}  // namespace speclab
