#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace frae {

/// NCHW extent of a tensor. Scalars are 1x1x1x1.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized lazily, on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::span<double> grad_buffer();
};

}  // namespace detail

/// Gradient recording is on by default and is thread-local.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Reference-counted handle to a dense double-precision NCHW array that
/// participates in reverse-mode differentiation. Copies share storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, v); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->shape.numel(); }

  std::span<const double> values() const { return node_->value; }
  /// Writable view. Only meaningful on leaves (parameters, buffers, inputs).
  std::span<double> mutable_values() { return node_->value; }

  /// Empty when no gradient has been accumulated.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  double item() const;
  double at(int n, int c, int h, int w) const;

  /// Copy of the values with no autograd history.
  Tensor detach() const;

  /// Backpropagates from this scalar. The graph is released afterwards.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

  /// Builds an op result. `backward` receives the result node (whose grad
  /// is populated) and must accumulate into the inputs' grad buffers. It is
  /// only recorded when grad mode is on and some input requires grad.
  static Tensor from_op(Shape shape, std::vector<double> values,
                        const std::vector<Tensor>& inputs,
                        std::function<void(detail::Node&)> backward);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Accumulation target for `t`'s gradient, or an empty span when `t` does
/// not require grad.
std::span<double> grad_target(const Tensor& t);

}  // namespace frae
