#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "speclab/domain.hpp"
#include "speclab/operator.hpp"

namespace speclab {

enum class SetKind { cell_mask, point_cloud };

const char* to_string(SetKind kind) noexcept;

/// Where a Cantor construction sits: the interval [lo, hi] along `axis`, and
/// in 2-D the transverse segment [transverse_lo, transverse_hi].
struct CantorPlacement {
  double lo = 0.0;
  double hi = 1.0;
  int axis = 0;
  double transverse_lo = 0.0;
  double transverse_hi = 0.0;
};

struct CantorMetadata {
  double ratio = 1.0 / 3.0;
  int levels = 1;
  CantorPlacement placement;
  /// The 2^levels closed intervals of the last construction level.
  std::vector<std::pair<double, double>> intervals;
};

/// Observation set on a grid: either a union of cells (positive measure) or a
/// finite point cloud snapped to grid nodes (zero measure).
class ObservationSet {
 public:
  static ObservationSet from_cells(const Domain& domain, std::vector<int> cells);
  static ObservationSet from_points(const Domain& domain, std::vector<Eigen::Vector2d> points,
                                    double declared_exponent, double declared_content);

  SetKind kind() const noexcept { return kind_; }
  int dimension() const noexcept { return dim_; }

  const std::vector<int>& cells() const noexcept { return cells_; }
  double measure() const noexcept { return measure_; }

  const std::vector<Eigen::Vector2d>& points() const noexcept { return points_; }
  /// Distinct unknown indices the points snap to (boundary snaps dropped).
  const std::vector<int>& unknowns() const noexcept { return unknowns_; }
  double max_snap_distance() const noexcept { return max_snap_; }
  int dropped_points() const noexcept { return dropped_; }

  double declared_exponent() const noexcept { return exponent_; }
  double declared_content() const noexcept { return content_; }
  const std::optional<CantorMetadata>& cantor() const noexcept { return cantor_; }

  /// Smallest distance from a member (cell corner or point) to the domain boundary.
  double boundary_distance() const noexcept { return boundary_distance_; }

  /// Per-unknown quadrature weights of the set. Each member cell gives
  /// vol/2^d to its corners; `with_density` multiplies by kappa. For point
  /// clouds this is the 0/1 indicator of the snapped unknowns.
  Eigen::VectorXd unknown_weights(const DiscreteOperator& op, bool with_density = true) const;

 private:
  ObservationSet() = default;

  SetKind kind_ = SetKind::cell_mask;
  int dim_ = 1;
  std::vector<int> cells_;
  double measure_ = 0.0;
  std::vector<Eigen::Vector2d> points_;
  std::vector<int> unknowns_;
  double max_snap_ = 0.0;
  int dropped_ = 0;
  double exponent_ = 0.0;
  double content_ = 0.0;
  double boundary_distance_ = 0.0;
  std::optional<CantorMetadata> cantor_;

  friend ObservationSet cantor_set(const Domain&, double, int, const CantorPlacement&);
};

/// Union of the cells with mask[c] true.
ObservationSet set_from_mask(const Domain& domain, const std::vector<bool>& mask);

/// Cells whose centers lie in the box [x0, x1] x [y0, y1] (y ignored in 1-D).
ObservationSet set_from_box(const Domain& domain, double x0, double x1, double y0 = 0.0,
                            double y1 = 0.0);

/// Centers of the 2^levels level intervals of the ratio-r Cantor construction
/// on the placement interval. In 2-D every transverse grid line crossing the
/// placement segment is included, giving a product with a segment.
ObservationSet cantor_set(const Domain& domain, double ratio, int levels,
                          const CantorPlacement& placement);

/// Ratio r with log 2 / log(1/r) = s.
double cantor_ratio_for_exponent(double s);

/// Random union of cells whose measure is within one cell of the target.
ObservationSet random_set(const Domain& domain, double target_measure, std::uint64_t seed);

double lebesgue_measure(const ObservationSet& set);

struct ContentBound {
  double value = 0.0;
  std::string method;
};

/// Certified lower bound on the s-dimensional Hausdorff content.
ContentBound hausdorff_content(const ObservationSet& set, double s, int depth = 12);

/// Lower bound for a set of Lebesgue measure `measure` in R^d: (measure/omega_d)^{s/d}.
double measure_content_bound(double measure, int d, double s);

/// Lower bound for the limit set of a ratio-r Cantor construction on an
/// interval of the given length, from the uniform Cantor measure; zero for s
/// above the natural exponent. transverse > 0 takes the product with a
/// segment of that length (natural exponent 1 + log2/log(1/r)).
double cantor_content_bound(double ratio, double length, double s, double transverse = 0.0);

/// Cheapest cover of a point cloud by dyadic cubes of the bounding square,
/// refined at most `depth` times; each cube of side a costs (a sqrt(d)/2)^s.
double dyadic_cover_cost(const std::vector<Eigen::Vector2d>& points, int d, double s, int depth);

/// dyadic_cover_cost / (2^d (2 sqrt d)^s): a ball of radius r meets at most
/// 2^d dyadic cubes of side in [2r, 4r).
double dyadic_content_bound(const std::vector<Eigen::Vector2d>& points, int d, double s,
                            int depth);

}  // namespace speclab
