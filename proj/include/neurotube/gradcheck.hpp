#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "neurotube/tensor.hpp"

namespace neurotube {

struct ElementCheck {
  std::size_t input = 0;
  std::size_t index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

struct GradCheckReport {
  std::vector<ElementCheck> elements;
  double max_rel_error = 0;
  double tolerance = 0;
  bool passed = false;
};

/// Relative error with a unit floor on the denominator, so gradients of
/// magnitude below one are judged on absolute error.
double gradcheck_rel_error(double analytic, double numeric);

/// Compares the analytic gradient of a graph against central differences.
///
/// `fn` rebuilds the graph from the (captured) inputs on each call. Its
/// output is reduced to a scalar as sum_i r_i * y_i with fixed pseudo-random
/// r in [-1, 1] (seeded by `projection_seed`), accumulated in double; for a
/// scalar output r = 1. The finite difference uses the step actually
/// representable in the input's precision.
GradCheckReport grad_check(const std::function<Tensor()>& fn, std::vector<Tensor> inputs,
                           double epsilon = 1e-3, double tolerance = 1e-3,
                           std::uint64_t projection_seed = 0);

struct OpCheckSummary {
  std::string op;
  std::size_t instances = 0;
  std::size_t failures = 0;
  double max_rel_error = 0;
  bool passed() const { return instances > 0 && failures == 0; }
};

/// Names accepted by grad_check_op, one per differentiable op.
const std::vector<std::string>& gradcheck_op_names();

/// Checks `instances` random small instances of one op. Inputs are drawn
/// away from kinks (relu near zero, ties inside max-pool windows) so the
/// central difference is meaningful.
OpCheckSummary grad_check_op(const std::string& op, std::size_t instances, std::uint64_t seed,
                             double epsilon = 1e-3, double tolerance = 1e-3);

}  // namespace neurotube
