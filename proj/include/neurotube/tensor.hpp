#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace neurotube {

#ifdef NEUROTUBE_DOUBLE
using real = double;
#else
using real = float;
#endif

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<real> data;
  std::vector<real> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Propagates this node's grad into its inputs' grads.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<real>& ensure_grad();
};

}  // namespace detail

/// Dense row-major array with reverse-mode gradient tracking.
///
/// A Tensor is a shared handle: copies alias the same storage. Use clone()
/// for an independent copy. Ops record provenance only while grad mode is
/// on and at least one input requires grad.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, real fill = real(0), bool requires_grad = false);
  Tensor(Shape shape, std::vector<real> data, bool requires_grad = false);

  static Tensor scalar(real value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t numel() const;

  std::span<real> data();
  std::span<const real> data() const;
  real item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  /// Gradient storage; allocated (zero-filled) on first access.
  std::span<real> grad();
  std::span<const real> grad() const;
  void zero_grad();

  /// Backpropagates from this scalar. Intermediate gradients are reset on
  /// every call; leaf gradients accumulate until zero_grad().
  void backward();
  /// Backpropagates with an explicit upstream gradient of this tensor's shape.
  void backward(std::span<const real> upstream);

  /// Same storage, no provenance.
  Tensor detach() const;
  /// Deep copy of data (and requires_grad flag), no provenance.
  Tensor clone() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables provenance recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

namespace detail {

/// Builds an op result. Provenance is attached only when grad mode is on
/// and some input requires grad; otherwise backward_fn is dropped.
Tensor make_result(Shape shape, std::vector<real> data,
                   std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward_fn);

}  // namespace detail

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// OS, which otherwise dominates training time through page faults. Affects
/// the whole process; a no-op outside glibc.
void tune_allocator();

}  // namespace neurotube
