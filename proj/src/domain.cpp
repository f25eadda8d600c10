#include "speclab/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "speclab/error.hpp"

namespace speclab {

const char* to_string(BoundaryCondition bc) noexcept {
  return bc == BoundaryCondition::dirichlet ? "dirichlet" : "neumann";
}

BoundaryCondition parse_boundary_condition(const std::string& name) {
  if (name == "dirichlet" || name == "Dirichlet") return BoundaryCondition::dirichlet;
  if (name == "neumann" || name == "Neumann") return BoundaryCondition::neumann;
  fail(ErrorKind::invalid_argument, "unknown boundary condition '" + name + "'");
}

Domain Domain::interval(double length, int n_cells, BoundaryCondition bc) {
  require(length > 0.0 && std::isfinite(length), ErrorKind::invalid_argument,
          "interval length must be positive");
  require(n_cells >= 2, ErrorKind::invalid_argument, "interval needs at least 2 cells");
  Domain d;
  d.dim_ = 1;
  d.bc_ = bc;
  d.n_cells_ = {n_cells, 0};
  d.extent_ = {length, 0.0};
  d.h_ = {length / n_cells, 0.0};
  d.finalize();
  return d;
}

Domain Domain::rectangle(double lx, double ly, int nx, int ny, BoundaryCondition bc) {
  require(lx > 0.0 && ly > 0.0 && std::isfinite(lx) && std::isfinite(ly),
          ErrorKind::invalid_argument, "rectangle side lengths must be positive");
  require(nx >= 2 && ny >= 2, ErrorKind::invalid_argument,
          "rectangle needs at least 2 cells per axis");
  Domain d;
  d.dim_ = 2;
  d.bc_ = bc;
  d.n_cells_ = {nx, ny};
  d.extent_ = {lx, ly};
  d.h_ = {lx / nx, ly / ny};
  d.finalize();
  return d;
}

void Domain::finalize() {
  for (int axis = 0; axis < dim_; ++axis) {
    auto& c = coords_[axis];
    c.resize(n_cells_[axis] + 1);
    for (int i = 0; i <= n_cells_[axis]; ++i) c[i] = i * h_[axis];
    c.back() = extent_[axis];
  }
  node_count_ = (n_cells_[0] + 1) * (dim_ == 2 ? n_cells_[1] + 1 : 1);
  unknown_of_node_.assign(node_count_, -1);
  node_of_unknown_.clear();
  for (int node = 0; node < node_count_; ++node) {
    if (bc_ == BoundaryCondition::dirichlet && is_boundary_node(node)) continue;
    unknown_of_node_[node] = static_cast<int>(node_of_unknown_.size());
    node_of_unknown_.push_back(node);
  }
}

double Domain::max_width() const noexcept {
  return dim_ == 2 ? std::max(h_[0], h_[1]) : h_[0];
}

std::array<int, 2> Domain::node_ij(int node) const noexcept {
  const int stride = n_cells_[0] + 1;
  return {node % stride, node / stride};
}

Eigen::Vector2d Domain::node_position(int node) const {
  const auto [i, j] = node_ij(node);
  return {coords_[0].at(i), dim_ == 2 ? coords_[1].at(j) : 0.0};
}

bool Domain::is_boundary_node(int node) const noexcept {
  const auto [i, j] = node_ij(node);
  if (i == 0 || i == n_cells_[0]) return true;
  if (dim_ == 2 && (j == 0 || j == n_cells_[1])) return true;
  return false;
}

int Domain::cell_count() const noexcept {
  return dim_ == 2 ? n_cells_[0] * n_cells_[1] : n_cells_[0];
}

std::array<int, 2> Domain::cell_ij(int cell) const noexcept {
  return {cell % n_cells_[0], cell / n_cells_[0]};
}

double Domain::cell_volume() const noexcept {
  return dim_ == 2 ? h_[0] * h_[1] : h_[0];
}

Eigen::Vector2d Domain::cell_center(int cell) const {
  const auto [i, j] = cell_ij(cell);
  return {(i + 0.5) * h_[0], dim_ == 2 ? (j + 0.5) * h_[1] : 0.0};
}

std::vector<int> Domain::cell_nodes(int cell) const {
  const auto [i, j] = cell_ij(cell);
  if (dim_ == 1) return {node_index(i), node_index(i + 1)};
  return {node_index(i, j), node_index(i + 1, j), node_index(i, j + 1), node_index(i + 1, j + 1)};
}

double Domain::control_volume(int node) const {
  const auto [i, j] = node_ij(node);
  double v = (i == 0 || i == n_cells_[0]) ? 0.5 * h_[0] : h_[0];
  if (dim_ == 2) v *= (j == 0 || j == n_cells_[1]) ? 0.5 * h_[1] : h_[1];
  return v;
}

double Domain::volume() const noexcept {
  return dim_ == 2 ? extent_[0] * extent_[1] : extent_[0];
}

// ---------------------------------------------------------------------------

CoefficientField::CoefficientField(const Domain& domain, std::vector<Eigen::MatrixXd> metric,
                                   std::vector<double> density, double lip_metric,
                                   double lip_density)
    : dim_(domain.dimension()),
      metric_(std::move(metric)),
      density_(std::move(density)),
      lip_metric_(lip_metric),
      lip_density_(lip_density) {
  const int n = domain.node_count();
  require(static_cast<int>(metric_.size()) == n && static_cast<int>(density_.size()) == n,
          ErrorKind::invalid_argument, "coefficient tables do not match the node count");
  require(lip_metric >= 0.0 && lip_density >= 0.0, ErrorKind::invalid_argument,
          "declared Lipschitz constants must be non-negative");

  min_metric_eig_ = std::numeric_limits<double>::infinity();
  min_density_ = std::numeric_limits<double>::infinity();
  flux_.resize(n);
  for (int node = 0; node < n; ++node) {
    const Eigen::MatrixXd& g = metric_[node];
    require(g.rows() == dim_ && g.cols() == dim_, ErrorKind::invalid_argument,
            "metric at node " + std::to_string(node) + " has the wrong shape");
    require((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + g.cwiseAbs().maxCoeff()),
            ErrorKind::coefficient_regularity,
            "metric not symmetric at node " + std::to_string(node));
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .minCoeff();
    require(llt.info() == Eigen::Success && lo > 0.0, ErrorKind::coefficient_regularity,
            "metric not positive definite at node " + std::to_string(node));
    const double k = density_[node];
    require(std::isfinite(k) && k > 0.0, ErrorKind::coefficient_regularity,
            "density not positive at node " + std::to_string(node));
    min_metric_eig_ = std::min(min_metric_eig_, lo);
    min_density_ = std::min(min_density_, k);
    flux_[node] = k * g.inverse();
  }

  // Difference-quotient scan over axis-adjacent node pairs.
  auto scan = [&](int a, int b, double dist) {
    measured_lip_density_ =
        std::max(measured_lip_density_, std::abs(density_[a] - density_[b]) / dist);
    measured_lip_metric_ = std::max(
        measured_lip_metric_, (metric_[a] - metric_[b]).cwiseAbs().maxCoeff() / dist);
  };
  const int nx = domain.cells(0);
  const int ny = dim_ == 2 ? domain.cells(1) : 0;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      if (i < nx) scan(domain.node_index(i, j), domain.node_index(i + 1, j), domain.width(0));
      if (dim_ == 2 && j < ny)
        scan(domain.node_index(i, j), domain.node_index(i, j + 1), domain.width(1));
    }
  }
  const auto within = [](double measured, double declared) {
    return measured <= declared * (1.0 + 1e-9) + 1e-12;
  };
  require(within(measured_lip_density_, lip_density_), ErrorKind::coefficient_regularity,
          "density difference quotient " + std::to_string(measured_lip_density_) +
              " exceeds declared constant " + std::to_string(lip_density_));
  require(within(measured_lip_metric_, lip_metric_), ErrorKind::coefficient_regularity,
          "metric difference quotient " + std::to_string(measured_lip_metric_) +
              " exceeds declared constant " + std::to_string(lip_metric_));
}

namespace {

// Piecewise-linear random profile on [0, length] with |values| <= amplitude
// and knot-to-knot slope <= lip; sampled at the given coordinates.
std::vector<double> random_profile(const std::vector<double>& coords, double length,
                                   double amplitude, double lip, int knots,
                                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double spacing = length / knots;
  const double step = std::min(lip * spacing, amplitude);
  std::vector<double> values(knots + 1);
  values[0] = step > 0.0 ? 0.5 * amplitude * unit(rng) : 0.0;
  for (int k = 1; k <= knots; ++k)
    values[k] = std::clamp(values[k - 1] + step * unit(rng), -amplitude, amplitude);
  std::vector<double> out(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double u = std::clamp(coords[i] / spacing, 0.0, static_cast<double>(knots));
    const int k = std::min(static_cast<int>(u), knots - 1);
    const double frac = u - k;
    out[i] = (1.0 - frac) * values[k] + frac * values[k + 1];
  }
  return out;
}

CoefficientField build(const Domain& domain, const ConstantCoefficients& spec) {
  const int d = domain.dimension();
  Eigen::MatrixXd g = spec.metric_matrix ? *spec.metric_matrix
                                         : Eigen::MatrixXd(spec.metric * Eigen::MatrixXd::Identity(d, d));
  require(g.rows() == d && g.cols() == d, ErrorKind::invalid_argument,
          "constant metric has the wrong shape");
  return CoefficientField(domain, std::vector<Eigen::MatrixXd>(domain.node_count(), g),
                          std::vector<double>(domain.node_count(), spec.density), 0.0, 0.0);
}

CoefficientField build(const Domain& domain, const PiecewiseLinearCoefficients& spec) {
  require(spec.lip_metric >= 0.0 && spec.lip_density >= 0.0, ErrorKind::invalid_argument,
          "Lipschitz constants must be non-negative");
  require(spec.knots >= 1, ErrorKind::invalid_argument, "need at least one knot interval");
  std::mt19937_64 rng(spec.seed);
  const int d = domain.dimension();
  const int n = domain.node_count();
  std::vector<Eigen::MatrixXd> metric(n, Eigen::MatrixXd::Identity(d, d));
  std::vector<double> density(n, 1.0);

  if (d == 1) {
    const auto& x = domain.nodes(0);
    const double L = domain.extent(0);
    const auto kap = random_profile(x, L, 0.5, spec.lip_density, spec.knots, rng);
    const auto g = random_profile(x, L, 0.5, spec.lip_metric, spec.knots, rng);
    for (int i = 0; i < n; ++i) {
      density[i] = 1.0 + kap[i];
      metric[i](0, 0) = 1.0 + g[i];
    }
  } else {
    const auto& x = domain.nodes(0);
    const auto& y = domain.nodes(1);
    const double lx = domain.extent(0), ly = domain.extent(1);
    const auto kx = random_profile(x, lx, 0.25, spec.lip_density, spec.knots, rng);
    const auto ky = random_profile(y, ly, 0.25, spec.lip_density, spec.knots, rng);
    std::array<std::vector<double>, 3> gx, gy;
    for (int e = 0; e < 3; ++e) {
      const double amp = e == 2 ? 0.1 : 0.25;
      gx[e] = random_profile(x, lx, amp, spec.lip_metric, spec.knots, rng);
      gy[e] = random_profile(y, ly, amp, spec.lip_metric, spec.knots, rng);
    }
    for (int node = 0; node < n; ++node) {
      const auto [i, j] = domain.node_ij(node);
      density[node] = 1.0 + kx[i] + ky[j];
      auto& g = metric[node];
      g(0, 0) = 1.0 + gx[0][i] + gy[0][j];
      g(1, 1) = 1.0 + gx[1][i] + gy[1][j];
      g(0, 1) = g(1, 0) = gx[2][i] + gy[2][j];
    }
  }
  return CoefficientField(domain, std::move(metric), std::move(density), spec.lip_metric,
                          spec.lip_density);
}

CoefficientField build(const Domain& domain, const SampledCoefficients& spec) {
  return CoefficientField(domain, spec.metric, spec.density, spec.lip_metric, spec.lip_density);
}

}  // namespace

CoefficientField make_coefficients(const Domain& domain, const CoefficientSpec& spec) {
  return std::visit([&](const auto& s) { return build(domain, s); }, spec);
}

SampledCoefficients load_coefficient_table(const std::string& path, const Domain& domain,
                                           double lip_metric, double lip_density) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::invalid_argument, "cannot open " + path);
  const int d = domain.dimension();
  const int n = domain.node_count();
  SampledCoefficients out;
  out.metric.assign(n, Eigen::MatrixXd());
  out.density.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.lip_metric = lip_metric;
  out.lip_density = lip_density;

  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    std::vector<double> values;
    double v;
    while (row >> v) values.push_back(v);
    const bool header = first && values.empty();
    first = false;
    if (header) continue;
    require(static_cast<int>(values.size()) == 2 + d * d, ErrorKind::invalid_argument,
            path + ":" + std::to_string(line_no) + ": expected " + std::to_string(2 + d * d) +
                " columns");
    const int node = static_cast<int>(values[0]);
    require(node >= 0 && node < n, ErrorKind::invalid_argument,
            path + ":" + std::to_string(line_no) + ": node index out of range");
    Eigen::MatrixXd g(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) g(r, c) = values[1 + r * d + c];
    out.metric[node] = g;
    out.density[node] = values.back();
  }
  for (int node = 0; node < n; ++node)
    require(out.metric[node].size() == d * d, ErrorKind::invalid_argument,
            path + ": missing row for node " + std::to_string(node));
  return out;
}

}  // namespace speclab
