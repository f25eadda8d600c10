#pragma once

#include <vector>

namespace speclab {

/// Ordinary least squares y ~ intercept + slope * x. r2 is NaN when y is
/// constant (no variance to explain).
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace speclab
