#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "speclab/control.hpp"
#include "speclab/error.hpp"
#include "speclab/inequality.hpp"
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

Spectrum pi_spectrum(int cells, BoundaryCondition bc = BoundaryCondition::dirichlet,
                     double length = M_PI) {
  return compute_spectrum(testing::unit_interval_op(cells, bc, length));
}

ObservationSet cloud(const Domain& d, const std::vector<double>& xs) {
  std::vector<Eigen::Vector2d> pts;
  for (double x : xs) pts.emplace_back(x, 0.0);
  return ObservationSet::from_points(d, pts, 0.5, 1.0);
}

// Gram matrix of sqrt(2/pi) sin(kx), k = 1..n, over (0, a).
Eigen::MatrixXd sine_gram(int n, double a) {
  Eigen::MatrixXd G(n, n);
  for (int j = 1; j <= n; ++j)
    for (int k = 1; k <= n; ++k)
      G(j - 1, k - 1) = j == k ? (a - std::sin(2 * j * a) / (2 * j)) / M_PI
                               : (std::sin((j - k) * a) / (j - k) - std::sin((j + k) * a) / (j + k)) / M_PI;
  return G;
}

// Restriction of the first n modes to the rows where the set carries weight.
struct Restricted {
  Eigen::MatrixXd Phi;
  Eigen::VectorXd w;
};

Restricted restrict_to(const Spectrum& sp, const ObservationSet& set, int n) {
  const Eigen::VectorXd wE = set.unknown_weights(sp.op());
  Restricted r;
  std::vector<int> rows;
  for (int i = 0; i < wE.size(); ++i)
    if (wE(i) > 0) rows.push_back(i);
  r.Phi.resize(rows.size(), n);
  r.w.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    r.Phi.row(i) = sp.vectors().row(rows[i]).head(n);
    r.w(i) = wE(rows[i]);
  }
  return r;
}

double l1_on(const Restricted& r, const Eigen::VectorXd& c) { return r.w.dot((r.Phi * c).cwiseAbs()); }

}  // namespace

TEST_CASE("L2 constant on the whole domain is one") {
  const Spectrum sp = pi_spectrum(80);
  const Domain& d = sp.op().domain();
  const ObservationSet full = set_from_mask(d, std::vector<bool>(d.cell_count(), true));
  for (double cutoff : {1.0, 5.0, 20.0}) {
    const L2Constant c = constant_L2(sp, full, cutoff);
    CHECK(c.constant == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(c.observable);
  }
}

TEST_CASE("L2 constant against the continuum sine Gram matrix") {
  const Spectrum sp = pi_spectrum(400);
  const Domain& d = sp.op().domain();
  for (double a : {M_PI / 2, 3 * M_PI / 4}) {
    const ObservationSet E = set_from_box(d, 0.0, a);
    for (int n : {1, 2, 3}) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sine_gram(n, a));
      const double oracle = 1.0 / std::sqrt(eig.eigenvalues()(0));
      const L2Constant c = constant_L2(sp, E, n + 0.5);
      CHECK(c.modes == n);
      CHECK(testing::rel(c.constant, oracle) <= 1e-2);
    }
  }
  // Single mode has a closed form.
  const ObservationSet half = set_from_box(d, 0.0, M_PI / 2);
  CHECK(testing::rel(constant_L2(sp, half, 1.0).constant, std::sqrt(2.0)) <= 1e-4);
}

TEST_CASE("L2 constant against sampling the unit sphere") {
  const Spectrum sp = pi_spectrum(120);
  const ObservationSet E = set_from_box(sp.op().domain(), 0.3, 2.0);
  const Restricted r = restrict_to(sp, E, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 20000; ++i) {
    Eigen::Vector3d c(normal(rng), normal(rng), normal(rng));
    c.normalize();
    const Eigen::VectorXd phi = r.Phi * c;
    best = std::min(best, r.w.dot(phi.cwiseProduct(phi)));
  }
  const double sampled = 1.0 / std::sqrt(best);
  const double c = constant_L2(sp, E, 3.5).constant;
  CHECK(c >= sampled * (1 - 1e-12));
  CHECK(testing::rel(c, sampled) <= 1e-2);
}

TEST_CASE("L2 constant is monotone in the set and the cutoff") {
  const Spectrum sp = pi_spectrum(100);
  const Domain& d = sp.op().domain();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<bool> small(100, false), large(100, false);
    for (int c = 0; c < 100; ++c) {
      const double x = u(rng);
      small[c] = x < 0.3;
      large[c] = x < 0.6;
    }
    small[trial] = large[trial] = true;
    const ObservationSet a = set_from_mask(d, small), b = set_from_mask(d, large);
    double prev = 0.0;
    for (double cutoff : {1.0, 2.0, 4.0, 7.0}) {
      const double ca = constant_L2(sp, a, cutoff).constant, cb = constant_L2(sp, b, cutoff).constant;
      CHECK(cb <= ca * (1 + 1e-10));
      CHECK(ca >= prev * (1 - 1e-10));
      prev = ca;
    }
  }
}

TEST_CASE("L2 constant is infinite past the rank of the set") {
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(4, 3);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
  w(0) = w(1) = 1.0;
  const L2Constant c = gram_constant(Phi, w);
  CHECK_FALSE(c.observable);
  CHECK(std::isinf(c.constant));
}

TEST_CASE("L1 constant, one mode") {
  const Spectrum sp = pi_spectrum(100);
  const ObservationSet E = set_from_box(sp.op().domain(), 0.0, 1.0);
  const Restricted r = restrict_to(sp, E, 1);
  const double exact = 1.0 / r.w.dot(r.Phi.col(0).cwiseAbs());
  CHECK(testing::rel(constant_L1(sp, E, 1.0).constant, exact) <= 1e-12);
}

TEST_CASE("L1 constant, constant Neumann mode on the whole domain") {
  const Spectrum sp = pi_spectrum(50, BoundaryCondition::neumann, 2.0);
  const Domain& d = sp.op().domain();
  const ObservationSet full = set_from_mask(d, std::vector<bool>(d.cell_count(), true));
  CHECK(constant_L1(sp, full, 0.0).constant == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("L1 constant, two modes on three cells against a great-circle grid") {
  const Spectrum sp = pi_spectrum(60);
  const ObservationSet E = set_from_box(sp.op().domain(), 10 * M_PI / 60, 13 * M_PI / 60);
  const Restricted r = restrict_to(sp, E, 2);
  REQUIRE(r.Phi.rows() == 4);
  double grid = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10000; ++i) {
    const double th = M_PI * i / 10000;
    grid = std::min(grid, l1_on(r, Eigen::Vector2d(std::cos(th), std::sin(th))));
  }
  const L1Constant c = constant_L1(sp, E, 2.5);
  CHECK(testing::rel(c.constant, 1.0 / grid) <= 2e-2);
  // Certificate realizes the reported value.
  CHECK(c.certificate.norm() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(l1_on(r, c.certificate) == doctest::Approx(1.0 / c.constant).epsilon(1e-6));
  CHECK(c.constant >= c.l2_floor * (1 - 1e-10));
}

TEST_CASE("L1 constant, three modes against exact vertex enumeration") {
  // On each sign cone the L1 mass is linear, so its minimum over the sphere
  // sits where two of the observed values vanish.
  const Spectrum sp = pi_spectrum(40);
  const ObservationSet E = set_from_box(sp.op().domain(), 0.4, 1.3);
  const Restricted r = restrict_to(sp, E, 3);
  double exact = std::numeric_limits<double>::infinity();
  for (int i = 0; i < r.Phi.rows(); ++i)
    for (int j = i + 1; j < r.Phi.rows(); ++j) {
      const Eigen::Vector3d a = r.Phi.row(i).transpose(), b = r.Phi.row(j).transpose();
      const Eigen::Vector3d v = a.cross(b);
      if (v.norm() < 1e-12) continue;
      exact = std::min(exact, l1_on(r, v.normalized()));
    }
  const L1Constant c = constant_L1(sp, E, 3.5);
  CHECK(testing::rel(c.constant, 1.0 / exact) <= 2e-2);
  CHECK(c.constant <= (1.0 / exact) * (1 + 1e-9));
}

TEST_CASE("sup constant, single point and nodal points") {
  const Spectrum sp = pi_spectrum(60);
  const Domain& d = sp.op().domain();
  const ObservationSet p = cloud(d, {M_PI / 3});
  const Eigen::VectorXd e1 = sp.vector(0);
  const int u = p.unknowns().front();
  const SupConstant c = constant_sup(sp, p, 1.0);
  CHECK(c.constant == doctest::Approx(e1.cwiseAbs().maxCoeff() / std::abs(e1(u))).epsilon(1e-10));

  const SupConstant nodal = constant_sup(sp, cloud(d, {M_PI / 2}), 2.0);
  CHECK_FALSE(nodal.observable);
  CHECK(std::isinf(nodal.constant));
  CHECK(kind_of([&] { constant_sup(sp, set_from_box(d, 0.0, 1.0), 1.0); }) == ErrorKind::invalid_argument);
}

TEST_CASE("sup constant against vertex enumeration of the feasible polytope") {
  const Spectrum sp = pi_spectrum(60);
  const Domain& d = sp.op().domain();
  const ObservationSet p = cloud(d, {0.4, 0.9, 1.5, 2.2, 2.8});
  REQUIRE(p.unknowns().size() == 5);
  Eigen::MatrixXd A(5, 3);
  for (int i = 0; i < 5; ++i) A.row(i) = sp.vectors().row(p.unknowns()[i]).head(3);
  const Eigen::MatrixXd Phi = sp.vectors().leftCols(3);
  double exact = 0.0;
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j)
      for (int k = j + 1; k < 5; ++k)
        for (int signs = 0; signs < 8; ++signs) {
          Eigen::Matrix3d S;
          S << A.row(i), A.row(j), A.row(k);
          const Eigen::Vector3d rhs(signs & 1 ? 1 : -1, signs & 2 ? 1 : -1, signs & 4 ? 1 : -1);
          const Eigen::Vector3d v = S.fullPivLu().solve(rhs);
          if ((S * v - rhs).norm() > 1e-9) continue;
          if ((A * v).cwiseAbs().maxCoeff() > 1 + 1e-10) continue;
          exact = std::max(exact, (Phi * v).cwiseAbs().maxCoeff());
        }
  const SupConstant c = constant_sup(sp, p, 3.5);
  REQUIRE(c.modes == 3);
  CHECK(testing::rel(c.constant, exact) <= 1e-8);
  // Certificate is feasible and attains the value at the reported node.
  CHECK((A * c.certificate).cwiseAbs().maxCoeff() <= 1 + 1e-8);
  CHECK(std::abs(Phi.row(c.argmax_unknown).dot(c.certificate)) == doctest::Approx(c.constant).epsilon(1e-8));
}

TEST_CASE("sup constant does not depend on the basis of the mode space") {
  const Spectrum sp = pi_spectrum(50);
  const Domain& d = sp.op().domain();
  const ObservationSet p = cloud(d, {0.3, 0.8, 1.4, 1.9, 2.5, 2.9});
  const Eigen::MatrixXd Phi = sp.vectors().leftCols(4);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::Matrix4d R;
    for (int i = 0; i < 16; ++i) R(i / 4, i % 4) = normal(rng);
    const double base = sup_constant(Phi, p.unknowns()).constant;
    CHECK(testing::rel(sup_constant(Phi * R, p.unknowns()).constant, base) <= 1e-8);
    CHECK(testing::rel(sup_constant(3.0 * Phi, p.unknowns()).constant, base) <= 1e-10);
  }
}

TEST_CASE("growth fits") {
  ConstantSweep flat;
  for (int i = 0; i < 6; ++i) flat.entries.push_back({1.0 + i, 1.0, i + 1, true});
  const GrowthFit f = fit_growth(flat);
  CHECK(f.degenerate_flat);
  CHECK(f.rate == 0.0);
  CHECK(std::isnan(f.r2));

  ConstantSweep exp_sweep;
  for (int i = 0; i < 8; ++i) {
    const double L = 1.0 + 0.5 * i;
    exp_sweep.entries.push_back({L, 2.0 * std::exp(0.7 * L), i + 1, true});
  }
  exp_sweep.entries.push_back({10.0, std::numeric_limits<double>::infinity(), 20, false});
  const GrowthFit g = fit_growth(exp_sweep);
  CHECK(g.rate == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(g.prefactor == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.points == 8);

  exp_sweep.entries.resize(4);
  CHECK(kind_of([&] { fit_growth(exp_sweep); }) == ErrorKind::insufficient_data);
}

TEST_CASE("interpolation quantities for a single mode") {
  const Spectrum sp = pi_spectrum(100);
  const ObservationSet E = set_from_box(sp.op().domain(), 0.0, M_PI / 2);
  const double s = 0.05, t = 0.3, lam = sp.eigenvalue(0);
  const InterpolationReport r = interpolation_check(sp, E, sp.vector(0), s, t);
  const Restricted rr = restrict_to(sp, E, 1);
  CHECK(r.lhs == doctest::Approx(std::exp(-t * lam)).epsilon(1e-12));
  CHECK(r.earlier == doctest::Approx(std::exp(-s * lam)).epsilon(1e-12));
  CHECK(r.observation == doctest::Approx(std::exp(-t * lam) * rr.w.dot(rr.Phi.col(0).cwiseAbs())).epsilon(1e-12));
  CHECK(r.tail <= 1e-14);
  CHECK(kind_of([&] { interpolation_check(sp, E, sp.vector(0), s, t, 1.0); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([&] { interpolation_check(sp, E, sp.vector(0), t, s); }) == ErrorKind::invalid_argument);
}

TEST_CASE("interpolation minimizer, tail bound and required constant") {
  const Spectrum sp = pi_spectrum(100);
  const ObservationSet E = set_from_box(sp.op().domain(), 0.0, M_PI / 4);
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Eigen::VectorXd f = testing::random_vector(sp.op().size(), seed);
    const InterpolationReport r = interpolation_check(sp, E, f, 0.01, 0.2, 0.5);
    CHECK(r.tail_ok);
    CHECK(interpolation_holds(r, r.required_n * (1 + 1e-9), 0.19, 0.5));
    CHECK_FALSE(interpolation_holds(r, r.required_n * 0.99, 0.19, 0.5));
    if (r.alpha_explicit > 1.0) {
      CHECK(r.alpha_gap <= 1e-8);
      ++checked;
    }
  }
  CHECK(checked >= 10);
  // Constant in closed form at N = 1.
  CHECK(required_constant(std::exp(1.0 / 0.5), 1.0, 1.0, 0.5, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Phung-Wang sequences") {
  const IntervalSet full({{0.0, 1.0}});
  const TimeSequence seq = phung_wang_times(full, 1.0, 2.0, 0.3);
  for (double r : seq.measured_ratios) CHECK(r == doctest::Approx(1.0));
  CHECK(seq.tag == SequenceTag::phung_wang);
  CHECK(seq.ratio == doctest::Approx(0.5));

  const IntervalSet fat = fat_cantor(0.5, 8);
  CHECK(fat.measure() == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(fat.intervals().size() == 256);
  const TimeSequence pw = phung_wang_times(fat, 1.0, 2.0, 0.0);
  CHECK(pw.measured_ratios.size() == 8);
  for (double r : pw.measured_ratios) CHECK(r >= 1.0 / 3.0);
  for (std::size_t m = 1; m < pw.times.size(); ++m) CHECK(pw.times[m] < pw.times[m - 1]);

  CHECK(kind_of([&] { phung_wang_times(fat, 1.0, 1.0, 0.0); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([&] { phung_wang_times(IntervalSet({{0.0, 0.2}}), 1.0, 2.0, 0.5); }) ==
        ErrorKind::invalid_argument);
  CHECK(full.measure_in(0.25, 0.75) == doctest::Approx(0.5));
}

TEST_CASE("telescoping over a geometric sequence") {
  const Spectrum sp = pi_spectrum(60);
  const Domain& d = sp.op().domain();
  const ObservationSet full = set_from_mask(d, std::vector<bool>(d.cell_count(), true));
  const TimeSequence seq = lr_schedule(1.0, 0.5, 12);
  const double D = 1.0;
  const TelescopeReport rep = telescope_check(sp, full, seq, sp.vector(0), D);
  const Restricted r = restrict_to(sp, full, 1);
  const double l1 = r.w.dot(r.Phi.col(0).cwiseAbs()), lam = sp.eigenvalue(0);
  double log_sup = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n + 1 < seq.times.size(); ++n) {
    const double sn = 1.0 - seq.times[n], gap = seq.times[n + 1] - seq.times[n];
    log_sup = std::max(log_sup, -D / gap + std::log(std::exp(-sn * lam) * l1));
  }
  CHECK(rep.constant == doctest::Approx(std::exp(-lam - log_sup)).epsilon(1e-12));
  CHECK(rep.max_residual <= 1e-12);
  CHECK(rep.d_multiple == doctest::Approx(2.0));

  TimeSequence bad = seq;
  bad.times = {0.0, 0.5, 0.6, 0.9};
  CHECK(kind_of([&] { telescope_check(sp, full, bad, sp.vector(0), D); }) == ErrorKind::invalid_argument);
}

TEST_CASE("Fubini slices") {
  const Domain d = Domain::interval(M_PI, 40, BoundaryCondition::dirichlet);
  const FubiniSlices p = fubini_slices(d, product_mask(set_from_box(d, 0.0, M_PI / 2), 2.0, 10));
  CHECK(p.measure == doctest::Approx(M_PI));
  CHECK(p.good_slabs.size() == 10);
  CHECK(p.good_measure == doctest::Approx(2.0));
  CHECK(p.bound == doctest::Approx(0.25));

  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const FubiniSlices r = fubini_slices(d, random_space_time_mask(d, 1.0, 16, 0.05 + 0.03 * seed, seed));
    CHECK(r.holds);
    CHECK(r.good_measure >= r.bound * (1 - 1e-12));
  }
  SpaceTimeMask empty;
  empty.horizon = 1.0;
  empty.slab_cells.resize(4);
  CHECK(kind_of([&] { fubini_slices(d, empty); }) == ErrorKind::invalid_argument);
}
