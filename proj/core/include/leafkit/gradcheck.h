#pragma once

#include <functional>

#include "leafkit/tensor.h"

namespace leafkit {

// Compares the reverse-mode gradient of a scalar function against central
// differences (f(x+h e_i) - f(x-h e_i)) / 2h, coordinate by coordinate.
//
// `eps` is snapped to the nearest power of two so that x +/- h is exact for
// moderate |x|, and the realized step is used as the divisor. Per coordinate
// the error is |a - n| / max(|a|, |n|), falling back to |a - n| when both
// magnitudes are below 1e-6. Returns the maximum over coordinates.
//
// Throws NumericError when f produces a non-finite value.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps = 1e-3);

// Same check with respect to a tensor captured by `loss` (e.g. a model
// parameter). The parameter is perturbed in place and restored; its gradient
// buffer is reset before the analytic pass.
double finite_diff_check_param(const std::function<Tensor()>& loss, Tensor param, double eps = 1e-3);

}  // namespace leafkit
