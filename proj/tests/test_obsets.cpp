#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "speclab/error.hpp"
#include "speclab/obsets.hpp"
#include "support.hpp"

using namespace speclab;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::invalid_argument;
}

// Cumulative uniform Cantor measure on [0, 1], resolved to `depth` levels.
double cantor_cdf(double x, double r, int depth) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double lo = 0.0, len = 1.0, mass = 1.0, acc = 0.0;
  for (int k = 0; k < depth; ++k) {
    const double piece = r * len;
    mass *= 0.5;
    if (x <= lo + piece) {
      len = piece;
    } else if (x < lo + len - piece) {
      return acc + mass;
    } else {
      acc += mass;
      lo = lo + len - piece;
      len = piece;
    }
  }
  return acc + mass * std::clamp((x - lo) / len, 0.0, 1.0);
}

// Best mass-distribution constant sup mu(B(c, rho)) / rho^s found by scanning.
double mass_distribution_bound(double r, double s, int depth) {
  double worst = 0.0;
  for (int k = 0; k < 7; ++k) {
    for (int f = 0; f < 24; ++f) {
      const double rho = std::pow(r, k) * (0.3 + 0.05 * f);
      const double step = rho / 6.0;
      for (double c = -rho; c <= 1.0 + rho; c += step) {
        const double mu = cantor_cdf(c + rho, r, depth) - cantor_cdf(c - rho, r, depth);
        worst = std::max(worst, mu / std::pow(rho, s));
      }
    }
  }
  return 1.0 / worst;
}

}  // namespace

TEST_CASE("cell masks measure exactly") {
  const Domain pi = Domain::interval(M_PI, 40, BoundaryCondition::dirichlet);
  CHECK(lebesgue_measure(set_from_mask(pi, std::vector<bool>(40, true))) == doctest::Approx(M_PI).epsilon(1e-14));
  const Domain unit = Domain::interval(1.0, 100, BoundaryCondition::dirichlet);
  std::vector<bool> half(100, false);
  for (int i = 0; i < 50; ++i) half[i] = true;
  const ObservationSet h = set_from_mask(unit, half);
  CHECK(h.measure() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(h.kind() == SetKind::cell_mask);
  CHECK(kind_of([&] { set_from_mask(unit, std::vector<bool>(100, false)); }) == ErrorKind::empty_set);
  CHECK(set_from_box(unit, 0.0, 0.5).measure() == doctest::Approx(0.5));
  const Domain sq = Domain::rectangle(2.0, 1.0, 20, 10, BoundaryCondition::neumann);
  CHECK(set_from_box(sq, 0.0, 1.0, 0.0, 1.0).measure() == doctest::Approx(1.0));
}

TEST_CASE("full mask weights equal the lumped mass") {
  const Domain d = Domain::rectangle(1.0, 1.0, 9, 7, BoundaryCondition::dirichlet);
  const auto op = testing::make_op(d, PiecewiseLinearCoefficients{1.0, 1.0, 2, 3});
  const ObservationSet full = set_from_mask(d, std::vector<bool>(d.cell_count(), true));
  CHECK((full.unknown_weights(*op) - op->weights()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("Cantor construction arithmetic") {
  const Domain d = Domain::interval(1.0, 3 * 243, BoundaryCondition::dirichlet);
  const ObservationSet c = cantor_set(d, 1.0 / 3.0, 5, {0.0, 1.0, 0, 0.0, 0.0});
  REQUIRE(c.cantor());
  CHECK(c.cantor()->intervals.size() == 32);
  double total = 0.0;
  for (const auto& [a, b] : c.cantor()->intervals) total += b - a;
  CHECK(total == doctest::Approx(std::pow(2.0 / 3.0, 5)).epsilon(1e-12));
  CHECK(c.declared_exponent() == doctest::Approx(std::log(2.0) / std::log(3.0)).epsilon(1e-14));
  CHECK(lebesgue_measure(c) == 0.0);
  CHECK(c.max_snap_distance() <= 0.5 * d.width(0) + 1e-15);
  CHECK(kind_of([&] { cantor_set(d, 0.6, 3, {0.0, 1.0, 0, 0.0, 0.0}); }) == ErrorKind::invalid_argument);
  for (double delta : {0.1, 0.25, 0.5}) {
    const double r = cantor_ratio_for_exponent(1.0 - delta);
    CHECK(r == doctest::Approx(std::pow(2.0, -1.0 / (1.0 - delta))).epsilon(1e-14));
    CHECK(std::log(2.0) / std::log(1.0 / r) == doctest::Approx(1.0 - delta).epsilon(1e-12));
  }
}

TEST_CASE("2-D Cantor product has exponent 1 + s") {
  const Domain d = Domain::rectangle(1.0, 1.0, 81, 20, BoundaryCondition::dirichlet);
  const ObservationSet c = cantor_set(d, 1.0 / 3.0, 3, {0.0, 1.0, 0, 0.25, 0.75});
  CHECK(c.declared_exponent() == doctest::Approx(1.0 + std::log(2.0) / std::log(3.0)));
  CHECK(c.points().size() == 8 * 11);
  CHECK(c.declared_content() > 0.0);
}

TEST_CASE("random sets") {
  const Domain d = Domain::interval(1.0, 1000, BoundaryCondition::dirichlet);
  const ObservationSet a = random_set(d, 0.3, 5), b = random_set(d, 0.3, 5);
  CHECK(a.measure() >= 0.299);
  CHECK(a.measure() <= 0.301);
  CHECK(a.cells() == b.cells());
  CHECK(random_set(d, 0.3, 6).cells() != a.cells());
  CHECK(kind_of([&] { random_set(d, 2.0, 1); }) == ErrorKind::invalid_argument);
}

TEST_CASE("point clouds snap to nodes and drop boundary snaps") {
  const Domain d = Domain::interval(1.0, 10, BoundaryCondition::dirichlet);
  const ObservationSet p = ObservationSet::from_points(
      d, {Eigen::Vector2d(0.01, 0), Eigen::Vector2d(0.52, 0), Eigen::Vector2d(0.49, 0)}, 0.5, 1.0);
  CHECK(p.unknowns().size() == 1);  // 0.52 and 0.49 share node 0.5; 0.01 snaps to the boundary
  CHECK(p.dropped_points() == 1);
  CHECK(p.max_snap_distance() == doctest::Approx(0.02));
  CHECK(kind_of([&] { ObservationSet::from_points(d, {Eigen::Vector2d(1.5, 0)}, 0.5, 1.0); }) ==
        ErrorKind::invalid_argument);
}

TEST_CASE("content lower bounds") {
  SUBCASE("middle-thirds Cantor at its natural exponent") {
    const Domain d = Domain::interval(1.0, 729, BoundaryCondition::dirichlet);
    const ObservationSet c = cantor_set(d, 1.0 / 3.0, 6, {0.0, 1.0, 0, 0.0, 0.0});
    const double s = std::log(2.0) / std::log(3.0);
    const ContentBound b = hausdorff_content(c, s);
    CHECK(b.value >= 0.25);
    // Never stronger than the natural covers by level-k intervals.
    CHECK(b.value <= std::pow(0.5, s) + 1e-12);
    // Consistent with a scanned mass-distribution constant at three depths.
    for (int depth : {8, 10, 12}) CHECK(b.value <= mass_distribution_bound(1.0 / 3.0, s, depth) * (1 + 1e-9));
  }
  SUBCASE("interval at s = 1") {
    const Domain d = Domain::interval(1.0, 50, BoundaryCondition::dirichlet);
    CHECK(hausdorff_content(set_from_mask(d, std::vector<bool>(50, true)), 1.0).value >= 0.5);
  }
  SUBCASE("finite clouds at s = d vanish as covers refine") {
    const Domain d = Domain::interval(1.0, 200, BoundaryCondition::dirichlet);
    std::vector<Eigen::Vector2d> pts;
    for (int i = 1; i < 12; ++i) pts.emplace_back(i / 12.0 + 0.001 * i, 0.0);
    double prev = std::numeric_limits<double>::infinity();
    for (int depth : {2, 5, 8, 12}) {
      const double v = dyadic_content_bound(pts, 1, 1.0, depth);
      CHECK(v <= prev);
      prev = v;
    }
    CHECK(prev <= 1e-2);
  }
  SUBCASE("exponent outside (0, d]") {
    const Domain d = Domain::interval(1.0, 10, BoundaryCondition::dirichlet);
    const ObservationSet full = set_from_mask(d, std::vector<bool>(10, true));
    CHECK(kind_of([&] { hausdorff_content(full, 1.5); }) == ErrorKind::invalid_argument);
  }
}

TEST_CASE("content bounds transform correctly under bi-Lipschitz affine maps") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < 40; ++i) pts.emplace_back(u(rng), u(rng));
  for (double a : {0.5, 2.0, 3.0}) {
    std::vector<Eigen::Vector2d> mapped;
    for (const auto& p : pts) mapped.push_back(a * p + Eigen::Vector2d(0.3, -0.2));
    const double lip = std::max(a, 1.0 / a);
    for (double s : {0.5, 1.0, 1.5}) {
      const double before = dyadic_content_bound(pts, 2, s, 8);
      const double after = dyadic_content_bound(mapped, 2, s, 8);
      CHECK(after >= std::pow(lip, -s) * before * (1 - 1e-12));
    }
  }
  // Cantor placements: rescaling the placement interval.
  const Domain d = Domain::interval(4.0, 800, BoundaryCondition::dirichlet);
  const double s = std::log(2.0) / std::log(3.0);
  const double small = hausdorff_content(cantor_set(d, 1.0 / 3.0, 5, {0.5, 1.5, 0, 0, 0}), s).value;
  const double large = hausdorff_content(cantor_set(d, 1.0 / 3.0, 5, {0.5, 3.5, 0, 0, 0}), s).value;
  CHECK(large >= std::pow(3.0, -s) * small);
  CHECK(small >= std::pow(3.0, -s) * large);
}

TEST_CASE("content bound is subadditive on random mask pairs") {
  const Domain d = Domain::rectangle(1.0, 1.0, 16, 16, BoundaryCondition::dirichlet);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ObservationSet a = random_set(d, 0.2, seed), b = random_set(d, 0.3, seed + 50);
    std::vector<bool> mask(d.cell_count(), false);
    for (int c : a.cells()) mask[c] = true;
    for (int c : b.cells()) mask[c] = true;
    const ObservationSet both = set_from_mask(d, mask);
    for (double s : {0.5, 1.0, 2.0}) {
      CHECK(hausdorff_content(both, s).value <=
            hausdorff_content(a, s).value + hausdorff_content(b, s).value + 1e-12);
    }
  }
}
