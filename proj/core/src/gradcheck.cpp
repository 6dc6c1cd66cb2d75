#include "leafkit/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "leafkit/error.h"

namespace leafkit {

namespace {

double snap_step(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ParameterError("finite-difference step must be positive");
  return std::exp2(std::round(std::log2(eps)));
}

double scalar_value(const Tensor& y) {
  if (y.numel() != 1) throw ContractError("gradient check needs a scalar function, got " + shape_to_string(y.shape()));
  const double v = y.item();
  if (!std::isfinite(v)) throw NumericError("function value is not finite");
  return v;
}

double coordinate_error(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale < 1e-6 ? diff : diff / scale;
}

// Central difference of `eval` with respect to values[i], restoring it afterwards.
template <typename Eval>
double central_difference(std::span<float> values, std::size_t i, double h, Eval&& eval) {
  const float original = values[i];
  values[i] = static_cast<float>(original + h);
  const float plus_point = values[i];
  const double f_plus = eval();
  values[i] = static_cast<float>(original - h);
  const float minus_point = values[i];
  const double f_minus = eval();
  values[i] = original;
  return (f_plus - f_minus) / (static_cast<double>(plus_point) - static_cast<double>(minus_point));
}

}  // namespace

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  const double h = snap_step(eps);

  Tensor probe = x.clone();
  probe.set_requires_grad(true);
  const Tensor y = f(probe);
  scalar_value(y);
  y.backward();
  std::vector<float> analytic = probe.has_grad() ? std::vector<float>(probe.grad().begin(), probe.grad().end())
                                                 : std::vector<float>(probe.numel(), 0.0f);
  for (float g : analytic) {
    if (!std::isfinite(g)) throw NumericError("analytic gradient is not finite");
  }

  NoGradGuard no_grad;
  Tensor moved = x.clone();
  auto values = moved.data();
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double numeric = central_difference(values, i, h, [&] { return scalar_value(f(moved)); });
    worst = std::max(worst, coordinate_error(analytic[i], numeric));
  }
  return worst;
}

double finite_diff_check_param(const std::function<Tensor()>& loss, Tensor param, double eps) {
  const double h = snap_step(eps);

  param.zero_grad();
  const Tensor y = loss();
  scalar_value(y);
  y.backward();
  std::vector<float> analytic = param.has_grad() ? std::vector<float>(param.grad().begin(), param.grad().end())
                                                 : std::vector<float>(param.numel(), 0.0f);

  NoGradGuard no_grad;
  auto values = param.data();
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double numeric = central_difference(values, i, h, [&] { return scalar_value(loss()); });
    worst = std::max(worst, coordinate_error(analytic[i], numeric));
  }
  return worst;
}

}  // namespace leafkit
