#include "frae/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "frae/error.hpp"

namespace frae {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

std::span<double> detail::Node::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor::Tensor(Shape shape, double fill)
    : node_(std::make_shared<detail::Node>()) {
  node_->shape = shape;
  node_->value.assign(shape.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : node_(std::make_shared<detail::Node>()) {
  if (values.size() != shape.numel()) {
    throw InvalidArgument("tensor value count " +
                          std::to_string(values.size()) +
                          " does not match shape " + shape.str());
  }
  node_->shape = shape;
  node_->value = std::move(values);
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor& Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw InvalidArgument("item() on non-scalar tensor " + shape().str());
  }
  return node_->value[0];
}

double Tensor::at(int n, int c, int h, int w) const {
  const Shape& s = node_->shape;
  return node_->value[((static_cast<std::size_t>(n) * s.c + c) * s.h + h) *
                          s.w +
                      w];
}

Tensor Tensor::detach() const {
  return Tensor(node_->shape, node_->value);
}

Tensor Tensor::from_op(Shape shape, std::vector<double> values,
                       const std::vector<Tensor>& inputs,
                       std::function<void(detail::Node&)> backward) {
  Tensor out(shape, std::move(values));
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const Tensor& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  out.node_->requires_grad = true;
  for (const Tensor& in : inputs) {
    if (in.requires_grad()) out.node_->parents.push_back(in.node_);
  }
  out.node_->backward = std::move(backward);
  return out;
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw InvalidArgument("backward() requires a scalar, got " +
                          shape().str());
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  // Release interior nodes so activations are freed with the graph.
  for (detail::Node* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->parents.clear();
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

std::span<double> grad_target(const Tensor& t) {
  if (!t.requires_grad()) return {};
  return t.node()->grad_buffer();
}

}  // namespace frae
