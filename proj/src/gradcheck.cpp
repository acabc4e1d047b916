#include "neurotube/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "neurotube/error.hpp"
#include "neurotube/rng.hpp"

namespace neurotube {

double gradcheck_rel_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double reduce(const Tensor& y, const std::vector<double>& proj) {
  const auto d = y.data();
  double total = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(static_cast<double>(d[i])))
      throw NumericError("grad_check: non-finite function output at element " + std::to_string(i));
    total += proj[i] * d[i];
  }
  return total;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& fn, std::vector<Tensor> inputs,
                           double epsilon, double tolerance, std::uint64_t projection_seed) {
  if (epsilon <= 0) throw ArgumentError("grad_check: epsilon must be positive");
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }

  Tensor y = fn();
  std::vector<double> proj(y.numel(), 1.0);
  if (y.numel() > 1) {
    Rng rng(projection_seed);
    for (auto& r : proj) r = rng.uniform(-1.0, 1.0);
  }
  reduce(y, proj);
  {
    std::vector<real> upstream(proj.begin(), proj.end());
    y.backward(upstream);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto data = inputs[k].data();
    const auto grad = inputs[k].grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const real original = data[i];
      const real plus = static_cast<real>(original + epsilon);
      const real minus = static_cast<real>(original - epsilon);
      data[i] = plus;
      const double f_plus = reduce(fn(), proj);
      data[i] = minus;
      const double f_minus = reduce(fn(), proj);
      data[i] = original;
      const double numeric =
          (f_plus - f_minus) / (static_cast<double>(plus) - static_cast<double>(minus));
      const double analytic = grad[i];
      if (!std::isfinite(analytic) || !std::isfinite(numeric))
        throw NumericError("grad_check: non-finite gradient for input " + std::to_string(k) +
                           " element " + std::to_string(i));
      const double err = gradcheck_rel_error(analytic, numeric);
      report.elements.push_back({k, i, analytic, numeric, err});
      report.max_rel_error = std::max(report.max_rel_error, err);
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace neurotube
