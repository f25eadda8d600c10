#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace speclab {

enum class BoundaryCondition { dirichlet, neumann };

const char* to_string(BoundaryCondition bc) noexcept;
BoundaryCondition parse_boundary_condition(const std::string& name);

/// Uniform tensor-product grid on (0, L) or (0, Lx) x (0, Ly).
///
/// Nodes are numbered x-fastest. Dirichlet grids eliminate boundary nodes,
/// so the unknown numbering is a compressed view of the interior nodes;
/// Neumann grids carry an unknown at every node.
class Domain {
 public:
  static Domain interval(double length, int n_cells, BoundaryCondition bc);
  static Domain rectangle(double lx, double ly, int nx, int ny, BoundaryCondition bc);

  int dimension() const noexcept { return dim_; }
  BoundaryCondition bc() const noexcept { return bc_; }

  int cells(int axis) const { return n_cells_.at(axis); }
  double width(int axis) const { return h_.at(axis); }
  double extent(int axis) const { return extent_.at(axis); }
  const std::vector<double>& nodes(int axis) const { return coords_.at(axis); }
  double max_width() const noexcept;

  int node_count() const noexcept { return node_count_; }
  int node_index(int i, int j = 0) const noexcept { return j * (n_cells_[0] + 1) + i; }
  std::array<int, 2> node_ij(int node) const noexcept;
  Eigen::Vector2d node_position(int node) const;
  bool is_boundary_node(int node) const noexcept;

  int unknown_count() const noexcept { return static_cast<int>(node_of_unknown_.size()); }
  /// -1 for nodes eliminated by a Dirichlet condition.
  int unknown_of_node(int node) const { return unknown_of_node_.at(node); }
  int node_of_unknown(int unknown) const { return node_of_unknown_.at(unknown); }

  int cell_count() const noexcept;
  int cell_index(int i, int j = 0) const noexcept { return j * n_cells_[0] + i; }
  std::array<int, 2> cell_ij(int cell) const noexcept;
  double cell_volume() const noexcept;
  Eigen::Vector2d cell_center(int cell) const;
  /// Node indices of the corners of a cell (2 in 1-D, 4 in 2-D).
  std::vector<int> cell_nodes(int cell) const;

  /// Volume of the dual cell around a node (half widths at the boundary).
  double control_volume(int node) const;
  double volume() const noexcept;

 private:
  Domain() = default;
  void finalize();

  int dim_ = 1;
  BoundaryCondition bc_ = BoundaryCondition::dirichlet;
  std::array<int, 2> n_cells_{0, 0};
  std::array<double, 2> h_{0.0, 0.0};
  std::array<double, 2> extent_{0.0, 0.0};
  std::array<std::vector<double>, 2> coords_;
  int node_count_ = 0;
  std::vector<int> unknown_of_node_;
  std::vector<int> node_of_unknown_;
};

/// Per-node metric g (d x d SPD) and density kappa with declared Lipschitz
/// constants. Construction verifies positivity and the declared constants by
/// scanning difference quotients over every pair of axis-adjacent nodes.
///
/// The metric Lipschitz constant is measured in the max-entry norm.
class CoefficientField {
 public:
  CoefficientField(const Domain& domain, std::vector<Eigen::MatrixXd> metric,
                   std::vector<double> density, double lip_metric, double lip_density);

  int dimension() const noexcept { return dim_; }
  int node_count() const noexcept { return static_cast<int>(density_.size()); }
  const Eigen::MatrixXd& metric(int node) const { return metric_.at(node); }
  double density(int node) const { return density_.at(node); }
  /// kappa * g^{-1}, the flux tensor of the operator at a node.
  const Eigen::MatrixXd& flux_tensor(int node) const { return flux_.at(node); }

  double declared_lip_metric() const noexcept { return lip_metric_; }
  double declared_lip_density() const noexcept { return lip_density_; }
  double measured_lip_metric() const noexcept { return measured_lip_metric_; }
  double measured_lip_density() const noexcept { return measured_lip_density_; }
  double min_metric_eigenvalue() const noexcept { return min_metric_eig_; }
  double min_density() const noexcept { return min_density_; }

 private:
  int dim_;
  std::vector<Eigen::MatrixXd> metric_;
  std::vector<Eigen::MatrixXd> flux_;
  std::vector<double> density_;
  double lip_metric_;
  double lip_density_;
  double measured_lip_metric_ = 0.0;
  double measured_lip_density_ = 0.0;
  double min_metric_eig_ = 0.0;
  double min_density_ = 0.0;
};

struct ConstantCoefficients {
  double metric = 1.0;  // g = metric * I unless metric_matrix is set
  double density = 1.0;
  std::optional<Eigen::MatrixXd> metric_matrix;
};

/// Random piecewise-linear fields with knot slopes bounded by the declared
/// constants; values stay in [0.5, 1.5] (diagonals) so positivity is automatic.
struct PiecewiseLinearCoefficients {
  double lip_metric = 1.0;
  double lip_density = 1.0;
  std::uint64_t seed = 0;
  int knots = 8;
};

struct SampledCoefficients {
  std::vector<Eigen::MatrixXd> metric;
  std::vector<double> density;
  double lip_metric = 0.0;
  double lip_density = 0.0;
};

using CoefficientSpec =
    std::variant<ConstantCoefficients, PiecewiseLinearCoefficients, SampledCoefficients>;

CoefficientField make_coefficients(const Domain& domain, const CoefficientSpec& spec);

/// CSV rows: node index, g entries row-major (d*d values), kappa.
/// Lines starting with '#' and a non-numeric header row are skipped.
SampledCoefficients load_coefficient_table(const std::string& path, const Domain& domain,
                                           double lip_metric, double lip_density);

}  // namespace speclab
