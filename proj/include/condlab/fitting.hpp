#pragma once

// Small least-squares fitters shared by the decay/contraction measurements.

#include <cstddef>
#include <vector>

namespace condlab {

/// Straight-line fit of log(y) against x over the points with
/// floor < y <= cap; rate = exp(slope). ok requires >= 3 usable points.
struct LogLinearFit {
  double rate = 0.0;
  double intercept = 0.0;  // value of the fitted curve at x = 0
  double r2 = 0.0;
  std::size_t points_used = 0;
  bool ok = false;
};

LogLinearFit fit_log_linear(const std::vector<double>& x,
                            const std::vector<double>& y, double floor = 1e-13,
                            double cap = 1e300);

/// Least-squares fit of y_i ~ M * beta^i + m with beta constrained to (0, 1).
/// For fixed beta the (M, m) pair is linear; beta is found by a multi-start
/// grid over {0.1, ..., 0.9} followed by ternary refinement, ties broken by
/// lowest residual then lowest beta. ok flags r2 >= 0.9.
struct GeometricFit {
  double M = 0.0;
  double beta = 0.0;
  double m = 0.0;
  double r2 = 0.0;
  double rmse = 0.0;
  bool ok = false;

  double eval(double i) const;
};

GeometricFit fit_geometric(const std::vector<double>& y);

}  // namespace condlab
