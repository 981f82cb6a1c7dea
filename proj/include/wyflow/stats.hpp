#pragma once

#include <span>

namespace wyflow {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

/// Observed convergence order from errors at successively halved spacings.
double observed_order(double coarse_error, double fine_error);

}  // namespace wyflow
