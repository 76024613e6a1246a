#include "spdnet/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace spdnet {

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ",";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one axis");
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_string(shape));
    n *= e;
  }
  return n;
}

void check_all_finite(const std::vector<double>& v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string(where) + ": non-finite value encountered");
    }
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values, bool requires_grad) {
  const std::size_t n = checked_numel(shape);
  if (n != values.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                " does not match shape " + shape_string(shape));
  }
  check_all_finite(values, "tensor construction");
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  const std::size_t n = checked_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
  const std::size_t n = checked_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::from_vector(std::vector<double> values, bool requires_grad) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

const std::vector<std::size_t>& Tensor::shape() const {
  if (!node_) throw std::invalid_argument("undefined tensor");
  return node_->shape;
}

std::size_t Tensor::extent(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for shape " + shape_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return values().size(); }

std::vector<double>& Tensor::values() {
  if (!node_) throw std::invalid_argument("undefined tensor");
  return node_->values;
}

const std::vector<double>& Tensor::values() const {
  if (!node_) throw std::invalid_argument("undefined tensor");
  return node_->values;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item() requires a single-element tensor, got shape " + shape_string(shape()));
  }
  return values()[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) {
    throw std::invalid_argument("index rank mismatch for shape " + shape_string(s));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) throw std::invalid_argument("index out of range for shape " + shape_string(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return values()[flat];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

OpKind Tensor::op() const {
  if (!node_) throw std::invalid_argument("undefined tensor");
  return node_->op;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->values.size(); }

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) {
    throw std::runtime_error("tensor has no accumulated gradient");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

void Tensor::backward() const {
  if (!node_) throw std::invalid_argument("backward: undefined tensor");
  if (node_->values.size() != 1) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_string(node_->shape));
  }
  if (!node_->requires_grad) {
    throw std::invalid_argument("backward: loss does not depend on any trainable tensor");
  }

  // Reverse topological order over the requires_grad subgraph.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  visited.insert(node_.get());
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_parent < top.node->parents.size()) {
      detail::Node* parent = top.node->parents[top.next_parent++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.push_back({parent, 0});
      }
    } else {
      order.push_back(top.node);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace spdnet
