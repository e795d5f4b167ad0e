#pragma once

#include <functional>

namespace frailtycc {

struct QuadratureResult {
  double value = 0.0;
  double abs_value = 0.0;       // integral of |f|, the scale of the error test
  double error_estimate = 0.0;
  int intervals = 0;
};

/// Globally adaptive Gauss-Legendre integration of `f` over (0, inf).
///
/// The half line is mapped onto (0, 1) with w = u / (1 - u); the interval
/// with the largest error estimate is bisected until the summed estimate is
/// below `rel_tol` times the integral of |f|. Throws NumericalError when
/// `max_intervals` is reached first.
QuadratureResult integrate_half_line(const std::function<double(double)>& f, double rel_tol = 1e-9,
                                     int max_intervals = 6000);

}  // namespace frailtycc
