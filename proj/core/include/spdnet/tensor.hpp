#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace spdnet {

/// Operation identity attached to every graph node.
enum class OpKind : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kScale,
  kScaleBy,
  kMatmul,
  kConv1d,
  kDepthwiseConv1d,
  kConv2d,
  kSoftmax,
  kLayerNorm,
  kGelu,
  kRelu,
  kMean,
  kSum,
  kReshape,
  kPermute,
  kSlice,
  kPad,
  kConcat,
};

std::string shape_string(const std::vector<std::size_t>& shape);

namespace detail {

/// Autodiff bookkeeping node. Holds the forward value, the reverse pass
/// callback and the accumulated gradient. Parents keep the graph alive
/// from any live output down to the leaves.
struct Node {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  bool requires_grad = false;

  OpKind op = OpKind::kLeaf;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  std::vector<double> grad;  // empty until first use; same length as values once active

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

/// Dense n-dimensional array of 64-bit floats in row-major order.
///
/// A Tensor is a cheap shared handle: copies alias the same storage and the
/// same autodiff node. Values are validated to be finite on construction and
/// after every operation; NaN/Inf raises instead of propagating.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> values, bool requires_grad = false);
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_vector(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t numel() const;

  std::vector<double>& values();
  const std::vector<double>& values() const;
  /// Scalar access; requires numel() == 1.
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  OpKind op() const;

  bool has_grad() const;
  const std::vector<double>& grad() const;
  /// Clears the accumulated gradient. Gradients otherwise accumulate
  /// across backward() calls.
  void zero_grad();

  /// Reverse-mode sweep from a scalar loss. Gradients of every reachable
  /// tensor with requires_grad are accumulated into their .grad buffers.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

}  // namespace spdnet
