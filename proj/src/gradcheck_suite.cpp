#include <algorithm>
#include <numeric>

#include "neurotube/error.hpp"
#include "neurotube/gradcheck.hpp"
#include "neurotube/losses.hpp"
#include "neurotube/ops.hpp"
#include "neurotube/rng.hpp"

namespace neurotube {

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

Tensor uniform_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  std::vector<real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<real>(rng.uniform(lo, hi));
  return Tensor(shape, std::move(v));
}

// |x| in [0.1, 1] with random sign.
Tensor off_zero_tensor(const Shape& shape, Rng& rng) {
  std::vector<real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<real>((rng.uniform01() < 0.5 ? -1 : 1) * rng.uniform(0.1, 1.0));
  return Tensor(shape, std::move(v));
}

// Distinct values on a grid of spacing 0.02, shuffled.
Tensor distinct_tensor(const Shape& shape, Rng& rng) {
  const std::size_t n = shape_numel(shape);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[pick(rng, 0, i - 1)]);
  std::vector<real> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<real>(0.02 * double(order[i]) - 0.01 * double(n));
  return Tensor(shape, std::move(v));
}

GradCheckReport check_instance(const std::string& op, Rng& rng, std::uint64_t proj, double eps,
                               double tol) {
  if (op == "conv3d") {
    const std::size_t cin = pick(rng, 1, 2), cout = pick(rng, 1, 3);
    const std::size_t k = rng.uniform01() < 0.25 ? 1 : 3;
    const std::size_t pad = k == 3 ? pick(rng, 0, 1) : 0;
    const Shape xs{cin, pick(rng, 3, 4), pick(rng, 3, 4), pick(rng, 3, 5)};
    Tensor x = uniform_tensor(xs, rng, -1, 1);
    Tensor w = uniform_tensor({cout, cin, k, k, k}, rng, -0.5, 0.5);
    Tensor b = uniform_tensor({cout}, rng, -0.5, 0.5);
    return grad_check([=] { return ops::conv3d(x, w, b, pad); }, {x, w, b}, eps, tol, proj);
  }
  if (op == "maxpool3d") {
    const ops::Window3 win{pick(rng, 1, 2), 2, pick(rng, 1, 2)};
    Tensor x = distinct_tensor({pick(rng, 1, 2), win.d * pick(rng, 1, 2), win.h * pick(rng, 1, 2),
                                win.w * pick(rng, 1, 3)},
                               rng);
    return grad_check([=] { return ops::maxpool3d(x, win); }, {x}, eps, tol, proj);
  }
  if (op == "transconv3d") {
    const std::size_t cin = pick(rng, 1, 2), cout = pick(rng, 1, 2);
    Tensor x = uniform_tensor({cin, pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, 3)}, rng, -1, 1);
    Tensor w = uniform_tensor({cin, cout, 2, 2, 2}, rng, -0.5, 0.5);
    return grad_check([=] { return ops::transconv3d(x, w, 2); }, {x, w}, eps, tol, proj);
  }
  if (op == "dense") {
    const std::size_t f = pick(rng, 2, 8), g = pick(rng, 2, 6);
    Tensor x = uniform_tensor({f}, rng, -1, 1);
    Tensor w = uniform_tensor({g, f}, rng, -0.5, 0.5);
    Tensor b = uniform_tensor({g}, rng, -0.5, 0.5);
    return grad_check([=] { return ops::dense(x, w, b); }, {x, w, b}, eps, tol, proj);
  }
  if (op == "relu") {
    Tensor x = off_zero_tensor({pick(rng, 1, 2), 3, 3, pick(rng, 2, 4)}, rng);
    return grad_check([=] { return ops::relu(x); }, {x}, eps, tol, proj);
  }
  if (op == "sigmoid") {
    Tensor x = uniform_tensor({pick(rng, 1, 2), 3, 3, pick(rng, 2, 4)}, rng, -4, 4);
    return grad_check([=] { return ops::sigmoid(x); }, {x}, eps, tol, proj);
  }
  if (op == "softmax") {
    Tensor x = uniform_tensor({pick(rng, 1, 3), pick(rng, 2, 10)}, rng, -3, 3);
    return grad_check([=] { return ops::softmax(x); }, {x}, eps, tol, proj);
  }
  if (op == "group_norm") {
    const std::size_t c = pick(rng, 2, 4);
    const std::size_t groups = rng.uniform01() < 0.5 ? 1 : c;
    Tensor x = uniform_tensor({c, 2, pick(rng, 2, 3), pick(rng, 2, 3)}, rng, -1, 1);
    Tensor gamma = uniform_tensor({c}, rng, 0.5, 1.5);
    Tensor beta = uniform_tensor({c}, rng, -0.5, 0.5);
    return grad_check([=] { return ops::group_norm(x, gamma, beta, groups); }, {x, gamma, beta},
                      eps, tol, proj);
  }
  if (op == "weighted_cross_entropy") {
    const std::size_t n = pick(rng, 2, 10);
    Tensor p = uniform_tensor({n}, rng, 0.05, 1.0);
    std::vector<real> label(n, 0);
    label[pick(rng, 0, n - 1)] = 1;
    const double w = rng.uniform(0.1, 1.0);
    return grad_check([=] { return losses::weighted_cross_entropy(label, p, w); }, {p}, eps, tol,
                      proj);
  }
  if (op == "binary_cross_entropy") {
    Tensor p = uniform_tensor({1, 2, pick(rng, 2, 3), pick(rng, 2, 3)}, rng, 0.05, 0.95);
    std::vector<float> target(p.numel());
    for (auto& t : target) t = rng.uniform01() < 0.4 ? 1.0f : 0.0f;
    return grad_check([=] { return losses::binary_cross_entropy(p, target); }, {p}, eps, tol, proj);
  }
  throw ArgumentError("gradcheck: unknown op '" + op + "'");
}

}  // namespace

const std::vector<std::string>& gradcheck_op_names() {
  static const std::vector<std::string> names{
      "conv3d",  "maxpool3d",  "transconv3d",           "dense",
      "relu",    "sigmoid",    "softmax",               "group_norm",
      "weighted_cross_entropy", "binary_cross_entropy"};
  return names;
}

OpCheckSummary grad_check_op(const std::string& op, std::size_t instances, std::uint64_t seed,
                             double epsilon, double tolerance) {
  OpCheckSummary s;
  s.op = op;
  for (std::size_t i = 0; i < instances; ++i) {
    Rng rng(derive_seed(seed, {fnv1a(op), i}));
    const auto report = check_instance(op, rng, derive_seed(seed, {fnv1a(op), i, 1}), epsilon,
                                       tolerance);
    ++s.instances;
    s.failures += !report.passed;
    s.max_rel_error = std::max(s.max_rel_error, report.max_rel_error);
  }
  return s;
}

}  // namespace neurotube
