#include "speclab/obsets.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "speclab/error.hpp"

namespace speclab {

const char* to_string(SetKind kind) noexcept {
  return kind == SetKind::cell_mask ? "cell_mask" : "point_cloud";
}

namespace {

double distance_to_boundary(const Domain& domain, const Eigen::Vector2d& p) {
  double d = std::min(p.x(), domain.extent(0) - p.x());
  if (domain.dimension() == 2) d = std::min({d, p.y(), domain.extent(1) - p.y()});
  return d;
}

int nearest_node(const Domain& domain, const Eigen::Vector2d& p) {
  auto snap = [&](int axis, double v) {
    const int i = static_cast<int>(std::lround(v / domain.width(axis)));
    return std::clamp(i, 0, domain.cells(axis));
  };
  return domain.dimension() == 1 ? domain.node_index(snap(0, p.x()))
                                 : domain.node_index(snap(0, p.x()), snap(1, p.y()));
}

}  // namespace

ObservationSet ObservationSet::from_cells(const Domain& domain, std::vector<int> cells) {
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  require(!cells.empty(), ErrorKind::empty_set, "observation mask selects no cells");
  for (int c : cells)
    require(c >= 0 && c < domain.cell_count(), ErrorKind::invalid_argument,
            "cell index " + std::to_string(c) + " outside the domain");
  ObservationSet set;
  set.kind_ = SetKind::cell_mask;
  set.dim_ = domain.dimension();
  set.cells_ = std::move(cells);
  set.measure_ = domain.cell_volume() * static_cast<double>(set.cells_.size());
  set.exponent_ = domain.dimension();
  set.content_ = measure_content_bound(set.measure_, set.dim_, set.dim_);
  set.boundary_distance_ = std::numeric_limits<double>::infinity();
  for (int c : set.cells_)
    for (int node : domain.cell_nodes(c))
      set.boundary_distance_ =
          std::min(set.boundary_distance_, distance_to_boundary(domain, domain.node_position(node)));
  return set;
}

ObservationSet ObservationSet::from_points(const Domain& domain,
                                           std::vector<Eigen::Vector2d> points,
                                           double declared_exponent, double declared_content) {
  require(!points.empty(), ErrorKind::empty_set, "point cloud is empty");
  require(declared_exponent > 0.0 && declared_exponent <= domain.dimension(),
          ErrorKind::invalid_argument, "declared exponent must lie in (0, d]");
  require(declared_content > 0.0, ErrorKind::invalid_argument,
          "declared content must be positive");
  ObservationSet set;
  set.kind_ = SetKind::point_cloud;
  set.dim_ = domain.dimension();
  set.exponent_ = declared_exponent;
  set.content_ = declared_content;
  set.boundary_distance_ = std::numeric_limits<double>::infinity();
  std::set<int> unknowns;
  for (const auto& p : points) {
    const bool inside = p.x() >= 0.0 && p.x() <= domain.extent(0) &&
                        (domain.dimension() == 1 || (p.y() >= 0.0 && p.y() <= domain.extent(1)));
    require(inside, ErrorKind::invalid_argument, "point outside the domain");
    set.boundary_distance_ = std::min(set.boundary_distance_, distance_to_boundary(domain, p));
    const int node = nearest_node(domain, p);
    Eigen::Vector2d q = domain.node_position(node);
    if (domain.dimension() == 1) q.y() = p.y();
    set.max_snap_ = std::max(set.max_snap_, (q - p).norm());
    const int u = domain.unknown_of_node(node);
    if (u < 0)
      ++set.dropped_;
    else
      unknowns.insert(u);
  }
  require(!unknowns.empty(), ErrorKind::empty_set, "every point snapped onto the boundary");
  set.points_ = std::move(points);
  set.unknowns_.assign(unknowns.begin(), unknowns.end());
  return set;
}

Eigen::VectorXd ObservationSet::unknown_weights(const DiscreteOperator& op,
                                                bool with_density) const {
  const Domain& domain = op.domain();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(op.size());
  if (kind_ == SetKind::point_cloud) {
    for (int u : unknowns_) out(u) = 1.0;
    return out;
  }
  const double share = domain.cell_volume() / (domain.dimension() == 2 ? 4.0 : 2.0);
  for (int c : cells_) {
    for (int node : domain.cell_nodes(c)) {
      const int u = domain.unknown_of_node(node);
      if (u < 0) continue;
      out(u) += with_density ? share * op.node_density()[node] : share;
    }
  }
  return out;
}

ObservationSet set_from_mask(const Domain& domain, const std::vector<bool>& mask) {
  require(static_cast<int>(mask.size()) == domain.cell_count(), ErrorKind::invalid_argument,
          "mask length does not match the cell count");
  std::vector<int> cells;
  for (int c = 0; c < domain.cell_count(); ++c)
    if (mask[c]) cells.push_back(c);
  return ObservationSet::from_cells(domain, std::move(cells));
}

ObservationSet set_from_box(const Domain& domain, double x0, double x1, double y0, double y1) {
  std::vector<bool> mask(domain.cell_count(), false);
  const double tol = 1e-12 * domain.max_width();
  for (int c = 0; c < domain.cell_count(); ++c) {
    const Eigen::Vector2d p = domain.cell_center(c);
    bool in = p.x() >= x0 - tol && p.x() <= x1 + tol;
    if (domain.dimension() == 2) in = in && p.y() >= y0 - tol && p.y() <= y1 + tol;
    mask[c] = in;
  }
  return set_from_mask(domain, mask);
}

ObservationSet cantor_set(const Domain& domain, double ratio, int levels,
                          const CantorPlacement& placement) {
  require(ratio > 0.0 && ratio < 0.5, ErrorKind::invalid_argument,
          "Cantor ratio must lie in (0, 1/2)");
  require(levels >= 1 && levels <= 20, ErrorKind::invalid_argument,
          "Cantor level count must lie in [1, 20]");
  require(placement.hi > placement.lo, ErrorKind::invalid_argument, "empty Cantor placement");
  require(placement.axis == 0 || (placement.axis == 1 && domain.dimension() == 2),
          ErrorKind::invalid_argument, "Cantor axis outside the domain");
  const int d = domain.dimension();
  if (d == 2)
    require(placement.transverse_hi >= placement.transverse_lo, ErrorKind::invalid_argument,
            "transverse segment is reversed");

  CantorMetadata meta;
  meta.ratio = ratio;
  meta.levels = levels;
  meta.placement = placement;
  meta.intervals = {{placement.lo, placement.hi}};
  for (int l = 0; l < levels; ++l) {
    std::vector<std::pair<double, double>> next;
    next.reserve(2 * meta.intervals.size());
    for (const auto& [a, b] : meta.intervals) {
      const double piece = ratio * (b - a);
      next.emplace_back(a, a + piece);
      next.emplace_back(b - piece, b);
    }
    meta.intervals = std::move(next);
  }

  const double s0 = std::log(2.0) / std::log(1.0 / ratio);
  const double length = placement.hi - placement.lo;
  std::vector<Eigen::Vector2d> points;
  if (d == 1) {
    for (const auto& [a, b] : meta.intervals) points.emplace_back(0.5 * (a + b), 0.0);
  } else {
    const int t = 1 - placement.axis;
    std::vector<double> transverse;
    for (double v : domain.nodes(t))
      if (v >= placement.transverse_lo - 1e-12 && v <= placement.transverse_hi + 1e-12)
        transverse.push_back(v);
    require(!transverse.empty(), ErrorKind::empty_set, "transverse segment misses every grid line");
    for (double v : transverse) {
      for (const auto& [a, b] : meta.intervals) {
        Eigen::Vector2d p;
        p[placement.axis] = 0.5 * (a + b);
        p[t] = v;
        points.push_back(p);
      }
    }
  }
  const double seg = d == 2 ? placement.transverse_hi - placement.transverse_lo : 0.0;
  const double exponent = d == 2 ? 1.0 + s0 : s0;
  double content = cantor_content_bound(ratio, length, exponent, seg);
  if (!(content > 0.0)) content = std::numeric_limits<double>::min();  // degenerate segment
  ObservationSet set = ObservationSet::from_points(domain, std::move(points), exponent, content);
  set.cantor_ = std::move(meta);
  return set;
}

double cantor_ratio_for_exponent(double s) {
  require(s > 0.0 && s < 1.0, ErrorKind::invalid_argument, "Cantor exponent must lie in (0, 1)");
  return std::pow(2.0, -1.0 / s);
}

ObservationSet random_set(const Domain& domain, double target_measure, std::uint64_t seed) {
  require(target_measure > 0.0 && target_measure <= domain.volume() * (1.0 + 1e-12),
          ErrorKind::invalid_argument, "target measure must lie in (0, volume]");
  const int total = domain.cell_count();
  int k = static_cast<int>(std::lround(target_measure / domain.cell_volume()));
  k = std::clamp(k, 1, total);
  std::vector<int> cells(total);
  std::iota(cells.begin(), cells.end(), 0);
  // Fisher-Yates with raw engine output: identical sequences across standard libraries.
  std::mt19937_64 rng(seed);
  for (int i = total - 1; i > 0; --i) std::swap(cells[i], cells[rng() % (i + 1)]);
  cells.resize(k);
  return ObservationSet::from_cells(domain, std::move(cells));
}

double lebesgue_measure(const ObservationSet& set) {
  return set.kind() == SetKind::cell_mask ? set.measure() : 0.0;
}

double measure_content_bound(double measure, int d, double s) {
  const double omega = d == 1 ? 2.0 : M_PI;
  return std::pow(measure / omega, s / d);
}

double cantor_content_bound(double ratio, double length, double s, double transverse) {
  const double s0 = std::log(2.0) / std::log(1.0 / ratio);
  // Uniform Cantor measure: a ball of radius rho carries mass <= rho^{s0} / c.
  double c = std::pow(0.5 * (1.0 - 2.0 * ratio) * length, s0);
  double natural = s0;
  if (transverse > 0.0) {
    // Normalized product with the segment: extra factor 2 rho / transverse.
    c *= 0.5 * transverse;
    natural += 1.0;
  }
  if (s > natural + 1e-12) return 0.0;
  // Below the natural exponent the unit total mass caps large balls, so the
  // bound becomes c^{s / natural}.
  return std::pow(c, s / natural);
}

double dyadic_cover_cost(const std::vector<Eigen::Vector2d>& points, int d, double s, int depth) {
  require(!points.empty(), ErrorKind::empty_set, "cannot cover an empty cloud");
  require(depth >= 0 && depth <= 12, ErrorKind::invalid_argument, "dyadic depth must lie in [0, 12]");
  Eigen::Vector2d lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  double side = (hi - lo).head(d).maxCoeff();
  if (!(side > 0.0)) side = 1.0;
  side *= 1.0 + 1e-12;
  const double diag = std::sqrt(static_cast<double>(d)) / 2.0;

  std::vector<int> all(points.size());
  std::iota(all.begin(), all.end(), 0);
  std::function<double(const std::vector<int>&, Eigen::Vector2d, double, int)> best =
      [&](const std::vector<int>& idx, Eigen::Vector2d corner, double a, int level) -> double {
    const double own = std::pow(a * diag, s);
    if (level == depth || idx.size() == 0) return idx.empty() ? 0.0 : own;
    const int children = d == 2 ? 4 : 2;
    std::vector<std::vector<int>> parts(children);
    const double half = 0.5 * a;
    for (int i : idx) {
      const int bx = points[i].x() - corner.x() >= half ? 1 : 0;
      const int by = d == 2 && points[i].y() - corner.y() >= half ? 1 : 0;
      parts[bx + 2 * by].push_back(i);
    }
    double split = 0.0;
    for (int c = 0; c < children && split < own; ++c) {
      if (parts[c].empty()) continue;
      Eigen::Vector2d sub = corner;
      sub.x() += (c & 1) ? half : 0.0;
      sub.y() += (c & 2) ? half : 0.0;
      split += best(parts[c], sub, half, level + 1);
    }
    return std::min(own, split);
  };
  return best(all, lo, side, 0);
}

double dyadic_content_bound(const std::vector<Eigen::Vector2d>& points, int d, double s,
                            int depth) {
  const double factor = std::pow(2.0, d) * std::pow(2.0 * std::sqrt(static_cast<double>(d)), s);
  return dyadic_cover_cost(points, d, s, depth) / factor;
}

ContentBound hausdorff_content(const ObservationSet& set, double s, int depth) {
  const int d = set.dimension();
  require(s > 0.0 && s <= d, ErrorKind::invalid_argument, "content exponent must lie in (0, d]");
  if (set.kind() == SetKind::cell_mask)
    return {measure_content_bound(set.measure(), d, s), "lebesgue"};
  if (set.cantor()) {
    const auto& meta = *set.cantor();
    const double length = meta.placement.hi - meta.placement.lo;
    const double seg = d == 2 ? meta.placement.transverse_hi - meta.placement.transverse_lo : 0.0;
    return {cantor_content_bound(meta.ratio, length, s, seg), "cantor-mass-distribution"};
  }
  return {dyadic_content_bound(set.points(), d, s, depth),
          "dyadic-depth-" + std::to_string(depth)};
}

}  // namespace speclab
