#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "speclab/doubling.hpp"
#include "speclab/error.hpp"
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

ChartMetric constant_metric(const Eigen::Matrix2d& a) {
  return [a](double, double) { return a; };
}

double extension_residual(int cells, int k) {
  const Domain d = Domain::interval(M_PI, cells, BoundaryCondition::dirichlet);
  const DoubledSystem ds = double_domain(d, make_coefficients(d, ConstantCoefficients{}));
  const Eigen::VectorXd v = sample(d, [k](double x) { return std::sin(k * x); });
  return extend_eigenfunction(ds, v, double(k * k), BoundaryCondition::dirichlet).residual;
}

}  // namespace

TEST_CASE("boundary normal of simple metrics") {
  const BoundaryNormal id = boundary_normal(Eigen::Matrix2d::Identity());
  CHECK(id.lambda == doctest::Approx(1.0));
  CHECK((id.normal - Eigen::Vector2d(1, 0)).norm() <= 1e-15);

  const BoundaryNormal d41 = boundary_normal(Eigen::Vector2d(4, 1).asDiagonal().toDenseMatrix());
  CHECK(d41.lambda == doctest::Approx(0.25).epsilon(1e-15));
  CHECK((d41.normal - Eigen::Vector2d(0.5, 0)).norm() <= 1e-15);

  Eigen::Matrix2d indefinite;
  indefinite << 1, 0, 0, -1;
  CHECK(kind_of([&] { boundary_normal(indefinite); }) == ErrorKind::invalid_argument);
  Eigen::Matrix2d skew;
  skew << 1, 0.5, 0, 1;
  CHECK(kind_of([&] { boundary_normal(skew); }) == ErrorKind::invalid_argument);
}

TEST_CASE("boundary normal is the unique inward unit conormal") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Matrix2d r;
    r << normal(rng), normal(rng), normal(rng), normal(rng);
    const Eigen::Matrix2d a = r * r.transpose() + 0.1 * Eigen::Matrix2d::Identity();
    const BoundaryNormal bn = boundary_normal(a);
    const Eigen::Vector2d n = bn.normal;
    CHECK(std::abs(n.dot(a * n) - 1.0) <= 1e-12);
    CHECK(std::abs(n.dot(a * Eigen::Vector2d(0, 1))) <= 1e-12);
    CHECK(n(0) > 0.0);
    // Independent construction: a-orthogonal complement of e_2, a-normalized.
    const Eigen::Vector2d ae2 = a.col(1);
    Eigen::Vector2d v(ae2(1), -ae2(0));
    if (v(0) < 0) v = -v;
    v /= std::sqrt(v.dot(a * v));
    CHECK((v - n).norm() <= 1e-12);
  }
}

TEST_CASE("Poisson kernel weights") {
  const double hz = 0.01;
  for (double s : {0.05, 0.2}) {
    double total = 0.0;
    for (int j = -200000; j <= 200000; ++j) total += poisson_weight(j * hz, hz, s);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(poisson_weight(0.0, hz, s) > poisson_weight(hz, hz, s));
  }
  CHECK(poisson_mass(100001, 50000, 0.025, 0.5) == doctest::Approx(1.0).epsilon(1e-3));
  // Near an edge only about half of the kernel is visible.
  CHECK(poisson_mass(100001, 0, 0.025, 0.5) == doctest::Approx(0.5).epsilon(1e-2));
}

TEST_CASE("smoothing leaves constant fields alone away from the edges") {
  const int nz = 2001;
  const std::vector<Eigen::Vector2d> field(nz, Eigen::Vector2d(0.5, -0.25));
  const std::vector<double> s_grid = {0.0, 0.01, 0.05};
  const auto m = smooth_normal(field, 0.01, s_grid);
  for (int iz = 0; iz < nz; ++iz) CHECK((m[0][iz] - field[iz]).norm() == 0.0);
  // Away from the edges the result is the field scaled by the visible kernel mass.
  for (int is = 1; is < 3; ++is)
    for (int iz : {nz / 4, nz / 2, 3 * nz / 4})
      CHECK((m[is][iz] - poisson_mass(nz, iz, 0.01, s_grid[is]) * field[iz]).norm() <= 1e-14);
}

TEST_CASE("flat and diagonal charts pull back to the identity") {
  for (const Eigen::Vector2d diag : {Eigen::Vector2d(1, 1), Eigen::Vector2d(4, 1)}) {
    const Eigen::Matrix2d a = diag.asDiagonal();
    const BoundaryChart c = make_chart(constant_metric(a), [](double) { return 1.0; }, 0.1, 11, -20, 20, 401);
    for (std::size_t iz = 0; iz < c.z.size(); ++iz)
      CHECK((c.m[0][iz] - c.normal[iz]).norm() <= 1e-15);
    const ChartDiagnostics diag_out = pseudo_geodesic_diag(c);
    CHECK(diag_out.unit_residual <= 1e-12);
    CHECK(diag_out.orthogonality_residual <= 1e-12);
    CHECK(diag_out.max_b12 <= 1e-10);
    const int mid = static_cast<int>(c.z.size()) / 2;
    CHECK((diag_out.b[0][mid] - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 1e-3);
    CHECK(c.phi(0, mid)(1) == doctest::Approx(c.z[mid]));
  }
}

TEST_CASE("smooth cutoff") {
  CHECK(smooth_cutoff(0.3, 0.5, 1.0) == 1.0);
  CHECK(smooth_cutoff(-1.2, 0.5, 1.0) == 0.0);
  CHECK(smooth_cutoff(0.75, 0.5, 1.0) == doctest::Approx(0.5));
  CHECK(smooth_cutoff(0.7, 0.5, 1.0) + smooth_cutoff(0.8, 0.5, 1.0) == doctest::Approx(1.0));
  CHECK(kind_of([] { smooth_cutoff(0.0, 1.0, 1.0); }) == ErrorKind::invalid_argument);
}

TEST_CASE("a vanishing cutoff is a degenerate chart") {
  const BoundaryChart c =
      make_chart(constant_metric(Eigen::Matrix2d::Identity()), [](double) { return 0.0; }, 0.1, 5, -1, 1, 21);
  CHECK(kind_of([&] { pseudo_geodesic_diag(c); }) == ErrorKind::degenerate_chart);
  CHECK(kind_of([&] {
          make_chart(constant_metric(Eigen::Matrix2d::Identity()), [](double) { return 1.0; }, 0.1, 2, -1, 1, 21);
        }) == ErrorKind::invalid_argument);
}

TEST_CASE("second differences of the chart stay bounded under refinement") {
  auto metric = [](double y, double x) {
    Eigen::Matrix2d a;
    a << 2.0 + 0.5 * std::sin(x), 0.2 * std::cos(x) * (1 - y), 0.2 * std::cos(x) * (1 - y), 1.0 + 0.1 * x * x;
    return a;
  };
  auto chi = [](double z) { return smooth_cutoff(z, 0.5, 1.0); };
  std::vector<double> second;
  for (int refine = 0; refine < 3; ++refine) {
    const int f = 1 << refine;
    const BoundaryChart c = make_chart(metric, chi, 0.5, 10 * f + 1, -1, 1, 40 * f + 1);
    const ChartDiagnostics d = pseudo_geodesic_diag(c);
    CHECK(d.unit_residual <= 1e-12);
    CHECK(d.orthogonality_residual <= 1e-12);
    CHECK(d.max_b12 <= 10 * c.hz());
    second.push_back(std::max({d.phi_ss, d.phi_sz, d.phi_zz, d.m_second_weighted}));
  }
  // Refinement increments contract.
  CHECK(std::abs(second[2] - second[1]) <= 0.8 * std::abs(second[1] - second[0]) + 1e-12);
}

TEST_CASE("doubling an interval reflects the coefficients") {
  const Domain d = Domain::interval(1.0, 20, BoundaryCondition::dirichlet);
  const CoefficientField k = make_coefficients(d, PiecewiseLinearCoefficients{1.0, 1.0, 5, 4});
  const DoubledSystem ds = double_domain(d, k);
  CHECK(ds.doubled.cells(0) == 40);
  CHECK(ds.doubled.extent(0) == doctest::Approx(2.0));
  for (int node = 0; node < ds.doubled.node_count(); ++node) {
    CHECK(ds.coefficients->density(node) == k.density(ds.mirror[node]));
    CHECK(ds.coefficients->metric(node)(0, 0) == k.metric(ds.mirror[node])(0, 0));
    CHECK(ds.mirror[node] == std::abs(node - 20));
  }
  CHECK(kind_of([&] { double_domain(d, k, {0, {0.0, 0.1, 0.0}}); }) == ErrorKind::unsupported_geometry);
  CHECK(kind_of([&] { double_domain(d, k, {1, {}}); }) == ErrorKind::invalid_argument);
}

TEST_CASE("doubling a rectangle flips the off-diagonal metric on the reflected side") {
  const Domain d = Domain::rectangle(1.0, 1.0, 6, 6, BoundaryCondition::dirichlet);
  std::vector<Eigen::MatrixXd> g(d.node_count());
  std::vector<double> kappa(d.node_count(), 1.0);
  for (int node = 0; node < d.node_count(); ++node) {
    const double x = d.node_position(node)(0);
    g[node] = Eigen::Matrix2d::Identity();
    g[node](0, 1) = g[node](1, 0) = 0.3 * x;  // zero on the side x = 0
  }
  const CoefficientField k(d, g, kappa, 0.3 + 1e-9, 0.0);
  const DoubledSystem ds = double_domain(d, k);
  for (int node = 0; node < ds.doubled.node_count(); ++node)
    CHECK(ds.coefficients->metric(node)(0, 1) == doctest::Approx(ds.side[node] * g[ds.mirror[node]](0, 1)));

  for (auto& m : g) m(0, 1) = m(1, 0) = 0.2;
  const CoefficientField coupled(d, g, kappa, 0.0, 0.0);
  CHECK(kind_of([&] { double_domain(d, coupled); }) == ErrorKind::unsupported_geometry);
}

TEST_CASE("odd extension of continuum eigenfunctions converges at second order") {
  for (int k : {1, 3}) {
    const double r1 = extension_residual(50, k), r2 = extension_residual(100, k), r3 = extension_residual(200, k);
    CHECK(std::log2(r1 / r2) >= 1.8);
    CHECK(std::log2(r2 / r3) >= 1.8);
  }
}

TEST_CASE("discrete eigenvectors extend exactly and land in the doubled spectrum") {
  const Domain d = Domain::interval(1.0, 60, BoundaryCondition::dirichlet);
  const CoefficientField k = make_coefficients(d, PiecewiseLinearCoefficients{1.0, 1.0, 8, 4});
  auto op = std::make_shared<const DiscreteOperator>(assemble(d, k));
  const Spectrum one = compute_spectrum(op);
  const DoubledSystem ds = double_domain(d, k);
  const Spectrum two = compute_spectrum(ds.op);
  for (int j = 0; j < 10; ++j) {
    const Extension e = extend_eigenfunction(ds, one.vector(j), one.eigenvalue(j), BoundaryCondition::dirichlet);
    CHECK(e.residual <= 1e-9);
    CHECK_FALSE(e.parity_mismatch);
  }
  for (double gap : spectral_inclusion(one, two, 10)) CHECK(gap <= 1e-8);

  const Extension wrong =
      extend_eigenfunction(ds, one.vector(0), one.eigenvalue(0), BoundaryCondition::dirichlet, Parity::even);
  CHECK(wrong.parity_mismatch);
  CHECK(kind_of([&] {
          extend_eigenfunction(ds, one.vector(0), one.eigenvalue(0), BoundaryCondition::neumann);
        }) == ErrorKind::invalid_argument);
  CHECK(kind_of([&] { spectral_inclusion(one, two, one.size() + 1); }) == ErrorKind::invalid_argument);
}

TEST_CASE("even extension of the Neumann constant") {
  const Domain d = Domain::interval(2.0, 30, BoundaryCondition::neumann);
  const CoefficientField k = make_coefficients(d, PiecewiseLinearCoefficients{1.0, 1.0, 2, 3});
  const DoubledSystem ds = double_domain(d, k);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d.unknown_count());
  const Extension e = extend_eigenfunction(ds, ones, 0.0, BoundaryCondition::neumann);
  CHECK(e.residual <= 1e-12);
  CHECK((e.field.array() == 1.0).all());
}
