#pragma once

#include <cmath>
#include <memory>
#include <random>

#include <Eigen/Dense>

#include "speclab/domain.hpp"
#include "speclab/operator.hpp"
#include "speclab/spectrum.hpp"

namespace speclab::testing {

inline std::shared_ptr<const DiscreteOperator> make_op(const Domain& d,
                                                      const CoefficientSpec& spec = ConstantCoefficients{}) {
  return std::make_shared<const DiscreteOperator>(assemble(d, make_coefficients(d, spec)));
}

inline std::shared_ptr<const DiscreteOperator> unit_interval_op(int cells,
                                                               BoundaryCondition bc = BoundaryCondition::dirichlet,
                                                               double length = M_PI) {
  return make_op(Domain::interval(length, cells, bc));
}

inline Eigen::VectorXd random_vector(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace speclab::testing
