#include "neurotube/tensor.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "neurotube/error.hpp"

namespace neurotube {

namespace {
thread_local bool g_grad_mode = true;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<real>& detail::Node::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), real(0));
  return grad;
}

Tensor::Tensor(Shape shape, real fill, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  for (auto d : shape)
    if (d == 0) throw DimensionError("tensor dims must be positive, got " + shape_str(shape));
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<real> data, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  for (auto d : shape)
    if (d == 0) throw DimensionError("tensor dims must be positive, got " + shape_str(shape));
  if (shape_numel(shape) != data.size())
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(real value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<real>{value}, requires_grad);
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

const Shape& Tensor::shape() const {
  if (!node_) throw StateError("undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t i) const {
  const auto& s = shape();
  if (i >= s.size()) throw DimensionError("dim index out of range for " + shape_str(s));
  return s[i];
}

std::size_t Tensor::numel() const { return node_ ? node_->data.size() : 0; }

std::span<real> Tensor::data() { return node_->data; }
std::span<const real> Tensor::data() const { return node_->data; }

real Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }

std::span<real> Tensor::grad() { return node_->ensure_grad(); }
std::span<const real> Tensor::grad() const { return node_->ensure_grad(); }

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), real(0));
}

void Tensor::backward() {
  if (numel() != 1)
    throw DimensionError("backward() without upstream needs a scalar, got " + shape_str(shape()));
  const real one = 1;
  backward(std::span<const real>(&one, 1));
}

void Tensor::backward(std::span<const real> upstream) {
  if (!node_) throw StateError("backward on undefined tensor");
  if (upstream.size() != numel())
    throw DimensionError("upstream gradient length mismatch for " + shape_str(shape()));
  if (!node_->requires_grad) throw StateError("backward on tensor that does not require grad");

  // Iterative post-order DFS gives a topological order with each node once.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      detail::Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (auto* n : order)
    if (!n->is_leaf()) n->ensure_grad().assign(n->data.size(), real(0));

  auto& g = node_->ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += upstream[i];

  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
}

Tensor Tensor::detach() const {
  if (!node_) return {};
  auto n = std::make_shared<detail::Node>();
  n->shape = node_->shape;
  n->data = node_->data;
  return from_node(std::move(n));
}

Tensor Tensor::clone() const {
  if (!node_) return {};
  auto n = std::make_shared<detail::Node>();
  n->shape = node_->shape;
  n->data = node_->data;
  n->requires_grad = node_->requires_grad;
  return from_node(std::move(n));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

bool grad_mode_enabled() { return g_grad_mode; }

Tensor detail::make_result(Shape shape, std::vector<real> data, std::vector<Tensor> inputs,
                           std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  const bool track =
      g_grad_mode && std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    n->requires_grad = true;
    n->inputs.reserve(inputs.size());
    for (auto& t : inputs) n->inputs.push_back(t.node());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor::from_node(std::move(n));
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, std::numeric_limits<int>::max());
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

}  // namespace neurotube
