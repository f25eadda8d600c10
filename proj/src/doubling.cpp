#include "speclab/doubling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "speclab/error.hpp"

namespace speclab {

BoundaryNormal boundary_normal(const Eigen::MatrixXd& a) {
  require(a.rows() == a.cols() && a.rows() >= 1, ErrorKind::invalid_argument,
          "boundary metric must be square");
  require((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + a.cwiseAbs().maxCoeff()),
          ErrorKind::invalid_argument, "boundary metric is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  require(eig.eigenvalues().minCoeff() > 0.0, ErrorKind::invalid_argument,
          "boundary metric is not positive definite");
  const Eigen::VectorXd col = a.llt().solve(Eigen::VectorXd::Unit(a.rows(), 0));
  BoundaryNormal out;
  out.lambda = col(0);
  out.normal = col / std::sqrt(out.lambda);
  return out;
}

double poisson_weight(double delta, double h, double s) {
  return (std::atan((delta + 0.5 * h) / s) - std::atan((delta - 0.5 * h) / s)) / M_PI;
}

namespace {

// Offsets beyond this radius carry less than `truncation` of the kernel mass.
int kernel_reach(double hz, double s, double truncation, int nz) {
  const double radius = s / std::tan(0.5 * M_PI * truncation);
  const double cells = std::ceil(radius / hz);
  return cells >= nz ? nz : static_cast<int>(cells);
}

}  // namespace

double poisson_mass(int nz, int iz, double hz, double s, double truncation) {
  require(s >= 0.0, ErrorKind::invalid_argument, "smoothing height must be non-negative");
  if (s == 0.0) return 1.0;
  const int reach = kernel_reach(hz, s, truncation, nz);
  double mass = 0.0;
  for (int jz = std::max(0, iz - reach); jz <= std::min(nz - 1, iz + reach); ++jz)
    mass += poisson_weight((jz - iz) * hz, hz, s);
  return mass;
}

std::vector<std::vector<Eigen::Vector2d>> smooth_normal(const std::vector<Eigen::Vector2d>& field,
                                                        double hz,
                                                        const std::vector<double>& s_grid,
                                                        double truncation) {
  require(hz > 0.0 && !field.empty(), ErrorKind::invalid_argument, "empty tangential grid");
  const int nz = static_cast<int>(field.size());
  std::vector<std::vector<Eigen::Vector2d>> out(s_grid.size(),
                                                std::vector<Eigen::Vector2d>(nz, Eigen::Vector2d::Zero()));
  for (std::size_t is = 0; is < s_grid.size(); ++is) {
    const double s = s_grid[is];
    require(s >= 0.0, ErrorKind::invalid_argument, "smoothing height must be non-negative");
    if (s == 0.0) {
      out[is] = field;
      continue;
    }
    const int reach = kernel_reach(hz, s, truncation, nz);
    std::vector<double> w(reach + 1);
    for (int k = 0; k <= reach; ++k) w[k] = poisson_weight(k * hz, hz, s);
    for (int iz = 0; iz < nz; ++iz) {
      Eigen::Vector2d acc = Eigen::Vector2d::Zero();
      for (int jz = std::max(0, iz - reach); jz <= std::min(nz - 1, iz + reach); ++jz)
        acc += w[std::abs(jz - iz)] * field[jz];
      out[is][iz] = acc;
    }
  }
  return out;
}

Eigen::Vector2d BoundaryChart::phi(int is, int iz) const {
  return Eigen::Vector2d(0.0, z[iz]) + s[is] * m[is][iz];
}

double smooth_cutoff(double z, double inner, double outer) {
  require(outer > inner && inner >= 0.0, ErrorKind::invalid_argument, "cutoff needs 0 <= inner < outer");
  const double t = (outer - std::abs(z)) / (outer - inner);
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double f = std::exp(-1.0 / t), g = std::exp(-1.0 / (1.0 - t));
  return f / (f + g);
}

BoundaryChart make_chart(ChartMetric metric, const std::function<double(double)>& chi,
                         double s_max, int ns, double z_lo, double z_hi, int nz) {
  require(s_max > 0.0 && ns >= 3 && nz >= 3 && z_hi > z_lo, ErrorKind::invalid_argument,
          "chart grid needs at least 3 points per direction");
  BoundaryChart c;
  c.metric = std::move(metric);
  for (int i = 0; i < ns; ++i) c.s.push_back(s_max * i / (ns - 1));
  for (int i = 0; i < nz; ++i) c.z.push_back(z_lo + (z_hi - z_lo) * i / (nz - 1));
  std::vector<Eigen::Vector2d> field(nz);
  for (int i = 0; i < nz; ++i) {
    const BoundaryNormal bn = boundary_normal(c.metric(0.0, c.z[i]));
    c.normal.push_back(bn.normal);
    c.lambda.push_back(bn.lambda);
    c.chi.push_back(chi(c.z[i]));
    field[i] = c.chi.back() * bn.normal;
  }
  c.m = smooth_normal(field, c.hz(), c.s);
  return c;
}

ChartDiagnostics pseudo_geodesic_diag(const BoundaryChart& c) {
  const int ns = static_cast<int>(c.s.size()), nz = static_cast<int>(c.z.size());
  require(ns >= 3 && nz >= 3 && static_cast<int>(c.m.size()) == ns, ErrorKind::invalid_argument,
          "chart is not populated");
  const double hs = c.hs(), hz = c.hz();
  ChartDiagnostics d;
  d.min_abs_det = std::numeric_limits<double>::infinity();
  d.min_b22 = std::numeric_limits<double>::infinity();

  // Second-order differences: central inside, three-point one-sided at the edges.
  auto derivative = [](auto&& f, int i, int n, double h) -> Eigen::Vector2d {
    if (i == 0) return (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h);
    if (i == n - 1) return (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * h);
    return (f(i + 1) - f(i - 1)) / (2.0 * h);
  };
  auto jacobian = [&](int is, int iz) {
    Eigen::Matrix2d J;
    J.col(0) = derivative([&](int k) { return c.phi(k, iz); }, is, ns, hs);
    J.col(1) = derivative([&](int k) { return c.phi(is, k); }, iz, nz, hz);
    return J;
  };

  bool inner = false;
  for (int iz = 0; iz < nz; ++iz) {
    const Eigen::Matrix2d a0 = c.metric(0.0, c.z[iz]);
    const Eigen::Vector2d n = c.normal[iz];
    d.unit_residual = std::max(d.unit_residual, std::abs(n.dot(a0 * n) - 1.0));
    d.orthogonality_residual =
        std::max(d.orthogonality_residual, std::abs(n.dot(a0 * Eigen::Vector2d::UnitY())));
    d.smoothing_error = std::max(d.smoothing_error, (c.m[0][iz] - c.chi[iz] * n).cwiseAbs().maxCoeff());
    if (c.chi[iz] <= 0.5) continue;
    inner = true;
    Eigen::Matrix2d closed;
    closed << c.chi[iz] * n(0), 0.0, c.chi[iz] * n(1), 1.0;
    const double det = std::abs(closed.determinant());
    d.min_abs_det = std::min(d.min_abs_det, det);
    if (det < 1e-10)
      fail(ErrorKind::degenerate_chart,
           "Jacobian of the pseudo-geodesic map is singular at z = " + std::to_string(c.z[iz]));
    d.jacobian_error = std::max(d.jacobian_error, (jacobian(0, iz) - closed).cwiseAbs().maxCoeff());
  }
  if (!inner) fail(ErrorKind::degenerate_chart, "cutoff vanishes on the whole chart");

  d.b.assign(ns, std::vector<Eigen::Matrix2d>(nz));
  for (int is = 0; is < ns; ++is) {
    for (int iz = 0; iz < nz; ++iz) {
      const Eigen::Matrix2d J = jacobian(is, iz);
      const Eigen::Vector2d p = c.phi(is, iz);
      d.b[is][iz] = J.transpose() * c.metric(p(0), p(1)) * J;
    }
  }
  for (int iz = 0; iz < nz; ++iz) {
    if (c.chi[iz] < 1.0 - 1e-12) continue;
    const Eigen::Matrix2d& b0 = d.b[0][iz];
    d.max_b12 = std::max(d.max_b12, std::abs(b0(0, 1)));
    d.max_b11_error = std::max(d.max_b11_error, std::abs(b0(0, 0) - 1.0));
    d.min_b22 = std::min(d.min_b22, b0(1, 1));
  }

  for (int is = 0; is < ns; ++is) {
    for (int iz = 0; iz < nz; ++iz) {
      d.m_sup = std::max(d.m_sup, c.m[is][iz].cwiseAbs().maxCoeff());
      if (iz > 0 && iz + 1 < nz)
        d.m_sdz = std::max(d.m_sdz, c.s[is] * ((c.m[is][iz + 1] - c.m[is][iz - 1]) / (2 * hz)).cwiseAbs().maxCoeff());
      if (is == 0 || is + 1 == ns || iz == 0 || iz + 1 == nz) continue;
      auto second = [&](auto&& f) {
        const Eigen::Vector2d ss = (f(is + 1, iz) - 2.0 * f(is, iz) + f(is - 1, iz)) / (hs * hs);
        const Eigen::Vector2d zz = (f(is, iz + 1) - 2.0 * f(is, iz) + f(is, iz - 1)) / (hz * hz);
        const Eigen::Vector2d sz =
            (f(is + 1, iz + 1) - f(is + 1, iz - 1) - f(is - 1, iz + 1) + f(is - 1, iz - 1)) /
            (4.0 * hs * hz);
        return std::array<double, 3>{ss.cwiseAbs().maxCoeff(), sz.cwiseAbs().maxCoeff(),
                                     zz.cwiseAbs().maxCoeff()};
      };
      const auto p = second([&](int i, int j) { return c.phi(i, j); });
      d.phi_ss = std::max(d.phi_ss, p[0]);
      d.phi_sz = std::max(d.phi_sz, p[1]);
      d.phi_zz = std::max(d.phi_zz, p[2]);
      const auto q = second([&](int i, int j) { return Eigen::Vector2d(c.m[i][j]); });
      const double worst = std::max({q[0], q[1], q[2]});
      d.m_second = std::max(d.m_second, worst);
      d.m_second_weighted = std::max(d.m_second_weighted, c.s[is] * worst);
    }
  }
  return d;
}

DoubledSystem double_domain(const Domain& domain, const CoefficientField& coeffs,
                            const DoublingInterface& interface) {
  const int dim = domain.dimension();
  require(interface.axis >= 0 && interface.axis < dim, ErrorKind::invalid_argument,
          "doubling axis outside the domain");
  if (!interface.profile.empty()) {
    const auto [lo, hi] = std::minmax_element(interface.profile.begin(), interface.profile.end());
    if (*hi - *lo > 1e-14)
      fail(ErrorKind::unsupported_geometry, "doubling across a curved side is not supported");
  }
  const int axis = interface.axis;
  const int n = domain.cells(axis);

  DoubledSystem out{domain,
                    dim == 1 ? Domain::interval(2.0 * domain.extent(0), 2 * n, domain.bc())
                    : axis == 0
                        ? Domain::rectangle(2.0 * domain.extent(0), domain.extent(1), 2 * n,
                                            domain.cells(1), domain.bc())
                        : Domain::rectangle(domain.extent(0), 2.0 * domain.extent(1),
                                            domain.cells(0), 2 * n, domain.bc()),
                    nullptr, nullptr, axis, {}, {}};
  const Domain& dd = out.doubled;
  Eigen::MatrixXd flip = Eigen::MatrixXd::Identity(dim, dim);
  flip(axis, axis) = -1.0;

  std::vector<Eigen::MatrixXd> metric(dd.node_count());
  std::vector<double> density(dd.node_count());
  out.mirror.resize(dd.node_count());
  out.side.resize(dd.node_count());
  for (int node = 0; node < dd.node_count(); ++node) {
    auto ij = dd.node_ij(node);
    const int offset = ij[axis] - n;
    ij[axis] = std::abs(offset);
    const int orig = domain.node_index(ij[0], ij[1]);
    out.mirror[node] = orig;
    out.side[node] = offset > 0 ? 1 : (offset < 0 ? -1 : 0);
    const Eigen::MatrixXd& g = coeffs.metric(orig);
    if (offset == 0 && dim == 2 &&
        std::abs(g(0, 1)) > 1e-12 * (1.0 + g.cwiseAbs().maxCoeff()))
      fail(ErrorKind::unsupported_geometry,
           "metric has a tangential-normal coupling on the interface; only boundary-normal "
           "forms can be reflected");
    metric[node] = offset < 0 ? Eigen::MatrixXd(flip * g * flip) : g;
    density[node] = coeffs.density(orig);
  }
  out.coefficients = std::make_shared<const CoefficientField>(
      dd, std::move(metric), std::move(density), coeffs.declared_lip_metric(),
      coeffs.declared_lip_density());
  out.op = std::make_shared<const DiscreteOperator>(assemble(dd, *out.coefficients));
  return out;
}

Extension extend_eigenfunction(const DoubledSystem& doubled, const Eigen::VectorXd& values,
                               double eigenvalue, BoundaryCondition bc,
                               std::optional<Parity> parity) {
  const Domain& orig = doubled.original;
  const Domain& dd = doubled.doubled;
  require(bc == orig.bc(), ErrorKind::invalid_argument,
          "eigenpair boundary condition does not match the doubled system");
  require(values.size() == orig.unknown_count(), ErrorKind::invalid_argument,
          "eigenfunction length does not match the one-sided unknowns");
  const Parity rule = parity.value_or(bc == BoundaryCondition::dirichlet ? Parity::odd : Parity::even);

  Extension out;
  out.field = Eigen::VectorXd::Zero(dd.unknown_count());
  for (int k = 0; k < dd.unknown_count(); ++k) {
    const int node = dd.node_of_unknown(k);
    const int u = orig.unknown_of_node(doubled.mirror[node]);
    double v = u < 0 ? 0.0 : values(u);
    if (rule == Parity::odd) {
      if (doubled.side[node] == 0) v = 0.0;
      if (doubled.side[node] < 0) v = -v;
    }
    out.field(k) = v;
  }
  const DiscreteOperator& op = *doubled.op;
  const Eigen::VectorXd r = apply(op, out.field) - eigenvalue * out.field;
  const double scale = op.norm(out.field);
  out.residual = scale > 0.0 ? op.norm(r) / scale : op.norm(r);
  const int n = orig.cells(doubled.axis);
  for (int k = 0; k < dd.unknown_count(); ++k) {
    const int node = dd.node_of_unknown(k);
    const bool near = std::abs(dd.node_ij(node)[doubled.axis] - n) <= 1;
    double& slot = near ? out.interface_residual : out.bulk_residual;
    slot = std::max(slot, std::abs(r(k)));
  }
  out.parity_mismatch =
      out.interface_residual > 10.0 * std::max(out.bulk_residual, 1e-8 * (1.0 + eigenvalue));
  return out;
}

std::vector<double> spectral_inclusion(const Spectrum& one_sided, const Spectrum& doubled,
                                       int count) {
  require(count >= 1 && count <= one_sided.size(), ErrorKind::invalid_argument,
          "inclusion count outside the one-sided spectrum");
  std::vector<double> out;
  for (int k = 0; k < count; ++k) {
    const double target = one_sided.eigenvalue(k);
    out.push_back((doubled.eigenvalues().array() - target).abs().minCoeff());
  }
  return out;
}

}  // namespace speclab
